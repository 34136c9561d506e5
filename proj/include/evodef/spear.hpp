#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "evodef/plant.hpp"
#include "evodef/predictor.hpp"
#include "evodef/rng.hpp"
#include "evodef/store.hpp"

namespace evodef::spear {

struct SearchConfig {
  std::size_t population = 100;
  bool use_ga = true;
  std::size_t generations = 5;
  std::size_t offspring_count = 20;
  std::size_t max_slots = 10;  // n_m: max nonzero slots per vector
  double mutation_prob = 0.1;
  double mutation_sigma_fraction = 0.1;
  double crossover_prob = 0.5;
  bool elitism = true;
  double coverage_weight = 1.0;  // 0 disables the coverage component
};

// Per-slot delta bounds: configuration slots span +/- factor * |nominal|,
// sensor and actuator bias slots span +/- sigmas * their nominal stddev.
struct SlotBounds {
  std::vector<double> lo, hi;
};

inline SlotBounds make_slot_bounds(const plant::PlantSpec& spec, const plant::DriftStats& stats,
                                   double config_bound_factor = 2.0, double bias_bound_sigmas = 8.0) {
  SlotBounds b;
  b.lo.assign(plant::kAttackSlotCount, 0.0);
  b.hi.assign(plant::kAttackSlotCount, 0.0);
  for (std::size_t i = 0; i < plant::kSensorCount + plant::kActuatorCount; ++i) {
    double r = bias_bound_sigmas * stats.stddev[i];
    b.lo[i] = -r;
    b.hi[i] = r;
  }
  for (std::size_t c = 0; c < plant::kConfigCount; ++c) {
    double r = config_bound_factor * std::fabs(spec.nominal_configs[c]);
    b.lo[plant::config_slot(c)] = -r;
    b.hi[plant::config_slot(c)] = r;
  }
  return b;
}

// Embeddings of previously injected attacks; append-only within a campaign.
struct EmbeddingArchive {
  std::vector<std::vector<double>> embeddings;

  void append(std::vector<double> e) { embeddings.push_back(std::move(e)); }
  std::size_t size() const { return embeddings.size(); }
  bool empty() const { return embeddings.empty(); }

  void save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write embedding archive: " + path);
    for (const auto& e : embeddings) {
      for (std::size_t i = 0; i < e.size(); ++i)
        out << (i ? "," : "") << store::format_double(e[i]);
      out << "\n";
    }
  }

  static EmbeddingArchive load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read embedding archive: " + path);
    EmbeddingArchive arc;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::vector<double> e;
      for (const std::string& f : store::split_csv_line(line))
        e.push_back(store::parse_double_strict(f, path + ":" + std::to_string(lineno)));
      arc.embeddings.push_back(std::move(e));
    }
    return arc;
  }
};

struct FitnessReport {
  double coverage = 0.0;  // weighted, normalized novelty score
  double safety = 0.0;    // sum of per-sensor proximity-to-limit scores
  double total = 0.0;     // coverage + safety
};

// Proximity-to-safety-limit score for one predicted sensor value:
//   inside [L, H]:  1 - min(v - L, H - v) / (H - L)   (1 at a bound, 0.5 mid)
//   outside:        1 + min(|v - L|, |v - H|) / (H - L)
inline double safety_fitness_single(double value, double low, double high) {
  double range = high - low;
  if (value >= low && value <= high)
    return 1.0 - std::min(value - low, high - value) / range;
  return 1.0 + std::min(std::fabs(value - low), std::fabs(value - high)) / range;
}

// Sum over the critical sensors of the predicted state.
inline double safety_fitness(const std::vector<double>& predicted_sensors,
                             const plant::SafetyEnvelope& env) {
  if (predicted_sensors.size() != plant::kSensorCount)
    throw std::invalid_argument("safety_fitness: expected one value per critical sensor");
  double total = 0.0;
  for (std::size_t i = 0; i < plant::kSensorCount; ++i)
    total += safety_fitness_single(predicted_sensors[i], env.low[i], env.high[i]);
  return total;
}

inline double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// Mean L2 distance from each candidate embedding to the archive, min-max
// scaled over the pool. Empty archive or a degenerate pool (all distances
// equal) scores everyone 0.
inline std::vector<double> coverage_fitness(const std::vector<std::vector<double>>& embeddings,
                                            const EmbeddingArchive& archive) {
  if (embeddings.empty()) throw std::invalid_argument("coverage_fitness: empty candidate set");
  std::vector<double> d(embeddings.size(), 0.0);
  if (archive.empty()) return d;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    double acc = 0.0;
    for (const auto& f : archive.embeddings) acc += l2_distance(embeddings[i], f);
    d[i] = acc / static_cast<double>(archive.size());
  }
  double dmin = *std::min_element(d.begin(), d.end());
  double dmax = *std::max_element(d.begin(), d.end());
  if (dmax <= dmin) {
    std::fill(d.begin(), d.end(), 0.0);
    return d;
  }
  for (double& v : d) v = (v - dmin) / (dmax - dmin);
  return d;
}

struct Candidate {
  plant::AttackVector vector;
  std::vector<double> embedding;
  std::vector<double> predicted;  // forecast critical sensors, physical units
  double mean_archive_distance = 0.0;
  FitnessReport fitness;
};

namespace detail {

inline Candidate score_candidate(plant::AttackVector v, const predictor::PredictorModel& model,
                                 const predictor::Window& window, const plant::SafetyEnvelope& env,
                                 const EmbeddingArchive& archive) {
  Candidate c;
  c.vector = std::move(v);
  c.predicted = predictor::predict_effect(model, window, c.vector);
  c.embedding = predictor::embed(model, window, c.vector);
  if (!archive.empty()) {
    double acc = 0.0;
    for (const auto& f : archive.embeddings) acc += l2_distance(c.embedding, f);
    c.mean_archive_distance = acc / static_cast<double>(archive.size());
  }
  c.fitness.safety = safety_fitness(c.predicted, env);
  return c;
}

// Coverage is relative to the pool, so totals are refreshed whenever the
// pool's composition changes.
inline void rescore_pool(std::vector<Candidate>& pool, double coverage_weight) {
  if (pool.empty()) return;
  double dmin = pool[0].mean_archive_distance, dmax = dmin;
  for (const Candidate& c : pool) {
    dmin = std::min(dmin, c.mean_archive_distance);
    dmax = std::max(dmax, c.mean_archive_distance);
  }
  for (Candidate& c : pool) {
    double norm = dmax > dmin ? (c.mean_archive_distance - dmin) / (dmax - dmin) : 0.0;
    c.fitness.coverage = coverage_weight * norm;
    c.fitness.total = c.fitness.coverage + c.fitness.safety;
  }
}

}  // namespace detail

// Random attack vector: n ~ Uniform{1..n_m} distinct slots, each delta
// uniform within its bounds.
inline plant::AttackVector random_vector(const SlotBounds& bounds, const SearchConfig& cfg,
                                         Rng& rng) {
  plant::AttackVector v;
  std::size_t n_slots = bounds.lo.size();
  std::size_t n_m = std::min(cfg.max_slots, n_slots);
  std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_int(n_m));
  for (std::size_t slot : rng.pick_distinct(n_slots, n))
    v.deltas[slot] = rng.uniform(bounds.lo[slot], bounds.hi[slot]);
  return v;
}

// Initial pool of `population` scored candidates.
inline std::vector<Candidate> generate_candidates(const predictor::Window& window,
                                                  const predictor::PredictorModel& model,
                                                  const plant::SafetyEnvelope& env,
                                                  const SlotBounds& bounds,
                                                  const EmbeddingArchive& archive,
                                                  const SearchConfig& cfg, Rng& rng) {
  std::vector<Candidate> pool;
  pool.reserve(cfg.population);
  for (std::size_t i = 0; i < cfg.population; ++i)
    pool.push_back(detail::score_candidate(random_vector(bounds, cfg, rng), model, window, env,
                                           archive));
  detail::rescore_pool(pool, cfg.coverage_weight);
  return pool;
}

// Fitness-proportional pick: draw r in [0, sum), walk the cumulative sum
// until it exceeds r. All-zero fitness falls back to a uniform draw.
inline std::size_t roulette_index(const std::vector<double>& fitness, Rng& rng) {
  if (fitness.empty()) throw std::invalid_argument("roulette_index: empty pool");
  double sum = 0.0;
  for (double f : fitness) {
    if (f < 0.0) throw std::invalid_argument("roulette_index: negative fitness");
    sum += f;
  }
  if (sum <= 0.0) return static_cast<std::size_t>(rng.uniform_int(fitness.size()));
  double r = rng.uniform01() * sum;
  double acc = 0.0;
  for (std::size_t i = 0; i < fitness.size(); ++i) {
    acc += fitness[i];
    if (acc > r) return i;
  }
  // r landed on the last accumulation boundary by rounding
  for (std::size_t i = fitness.size(); i-- > 0;)
    if (fitness[i] > 0.0) return i;
  return fitness.size() - 1;
}

inline const Candidate& roulette_select(const std::vector<Candidate>& pool, Rng& rng) {
  std::vector<double> fitness(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) fitness[i] = pool[i].fitness.total;
  return pool[roulette_index(fitness, rng)];
}

// Keeps a child's nonzero slot count within n_m by zeroing the smallest
// surplus magnitudes.
inline void enforce_slot_budget(plant::AttackVector& v, std::size_t max_slots) {
  std::vector<std::size_t> nonzero;
  for (std::size_t i = 0; i < v.deltas.size(); ++i)
    if (v.deltas[i] != 0.0) nonzero.push_back(i);
  if (nonzero.size() <= max_slots) return;
  std::stable_sort(nonzero.begin(), nonzero.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(v.deltas[a]) < std::fabs(v.deltas[b]);
  });
  for (std::size_t k = 0; k < nonzero.size() - max_slots; ++k) v.deltas[nonzero[k]] = 0.0;
}

// Offspring generation: roulette parents on total fitness, uniform per-slot
// crossover, per-slot Gaussian mutation scaled to the slot range, clamp to
// bounds, then enforce the slot budget.
inline std::vector<Candidate> crossover_and_mutate(const std::vector<Candidate>& pool,
                                                   const SlotBounds& bounds,
                                                   const SearchConfig& cfg,
                                                   const predictor::PredictorModel& model,
                                                   const predictor::Window& window,
                                                   const plant::SafetyEnvelope& env,
                                                   const EmbeddingArchive& archive, Rng& rng) {
  if (pool.size() < 2) throw std::invalid_argument("crossover_and_mutate: need at least 2 parents");
  std::vector<double> fitness(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) fitness[i] = pool[i].fitness.total;

  std::vector<Candidate> children;
  children.reserve(cfg.offspring_count);
  for (std::size_t k = 0; k < cfg.offspring_count; ++k) {
    const Candidate& pa = pool[roulette_index(fitness, rng)];
    const Candidate& pb = pool[roulette_index(fitness, rng)];
    plant::AttackVector child = pa.vector;
    for (std::size_t slot = 0; slot < child.deltas.size(); ++slot) {
      if (rng.uniform01() < cfg.crossover_prob) child.deltas[slot] = pb.vector.deltas[slot];
    }
    for (std::size_t slot = 0; slot < child.deltas.size(); ++slot) {
      if (rng.uniform01() < cfg.mutation_prob) {
        double range = bounds.hi[slot] - bounds.lo[slot];
        child.deltas[slot] += rng.normal(0.0, cfg.mutation_sigma_fraction * range);
      }
      child.deltas[slot] = std::clamp(child.deltas[slot], bounds.lo[slot], bounds.hi[slot]);
    }
    enforce_slot_budget(child, cfg.max_slots);
    children.push_back(detail::score_candidate(std::move(child), model, window, env, archive));
  }
  return children;
}

namespace detail {

// Downselect to `population`: the best candidate survives outright
// (one-slot elitism), the rest by roulette without replacement.
inline void downselect(std::vector<Candidate>& pool, const SearchConfig& cfg, Rng& rng) {
  if (pool.size() <= cfg.population) return;
  std::vector<Candidate> next;
  next.reserve(cfg.population);
  std::vector<std::size_t> alive(pool.size());
  for (std::size_t i = 0; i < alive.size(); ++i) alive[i] = i;

  if (cfg.elitism) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pool.size(); ++i)
      if (pool[i].fitness.total > pool[best].fitness.total) best = i;
    next.push_back(pool[best]);
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(best));
  }
  while (next.size() < cfg.population && !alive.empty()) {
    std::vector<double> fitness(alive.size());
    for (std::size_t i = 0; i < alive.size(); ++i) fitness[i] = pool[alive[i]].fitness.total;
    std::size_t pick = roulette_index(fitness, rng);
    next.push_back(pool[alive[pick]]);
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  pool = std::move(next);
}

}  // namespace detail

// Full attack generation: random pool, optional GA refinement, final
// roulette pick. The caller appends the chosen candidate's embedding to the
// archive after injecting the attack.
inline Candidate generate_attack(const predictor::Window& window,
                                 const predictor::PredictorModel& model,
                                 const plant::SafetyEnvelope& env, const SlotBounds& bounds,
                                 const EmbeddingArchive& archive, const SearchConfig& cfg,
                                 Rng& rng) {
  std::vector<Candidate> pool =
      generate_candidates(window, model, env, bounds, archive, cfg, rng);
  if (cfg.use_ga) {
    for (std::size_t gen = 0; gen < cfg.generations; ++gen) {
      std::vector<Candidate> children =
          crossover_and_mutate(pool, bounds, cfg, model, window, env, archive, rng);
      for (Candidate& c : children) pool.push_back(std::move(c));
      detail::rescore_pool(pool, cfg.coverage_weight);
      detail::downselect(pool, cfg, rng);
      detail::rescore_pool(pool, cfg.coverage_weight);
    }
  }
  return roulette_select(pool, rng);
}

// Episode classification from trace metadata: shutdown after the injection
// is an effective attack, shutdown before it excludes the run, and reaching
// the episode cap without shutdown means the attack was ineffective.
inline plant::Outcome classify_outcome(const plant::Trace& trace) {
  if (trace.shutdown_tick < 0) return plant::Outcome::Ineffective;
  if (trace.shutdown_tick >= trace.injection_tick) return plant::Outcome::Effective;
  return plant::Outcome::ExcludedShort;
}

}  // namespace evodef::spear
