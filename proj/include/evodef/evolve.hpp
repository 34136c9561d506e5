#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "evodef/nn.hpp"
#include "evodef/plant.hpp"
#include "evodef/predictor.hpp"
#include "evodef/rng.hpp"
#include "evodef/shield.hpp"
#include "evodef/spear.hpp"

namespace evodef::evolve {

// Deterministic work distribution: results indexed by task, so any worker
// count produces identical output.
template <typename F>
inline void parallel_for(std::size_t n, std::size_t jobs, F&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  std::size_t n_workers = std::min(jobs, n);
  workers.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : workers) t.join();
}

struct StopRule {
  std::size_t window = 10;           // K: recent attack rounds considered
  std::size_t detect_min = 9;        // required correct decisions within K
  std::size_t false_alarm_max = 1;   // allowed false alarms within K
};

struct EvolutionConfig {
  long max_rounds = 300;
  StopRule stop;
  shield::Toggles toggles;
  double mix_ga = 0.6;
  double mix_random = 0.2;  // remainder of the mix is pure drift
  std::size_t exemplar_capacity = 2000;
  long injection_tick = 500;
  std::uint64_t seed = 1;
  nn::TrainConfig train;
  shield::DetectorSpec detector;
  shield::EndToEndRule rule;
  spear::SearchConfig search;
};

struct RoundRecord {
  long round = 0;
  std::string attack_id;
  std::string kind;  // ga | random | drift
  plant::Outcome outcome = plant::Outcome::Ineffective;
  bool decision_attack = false;
  bool decision_correct = false;
  std::size_t harvested = 0;
  std::size_t exemplar_size = 0;
  double validation_accuracy = 0.0;
  long cumulative_traces = 0;
  bool trained = false;
  bool diverged = false;
  std::vector<double> attack_vector;
  double fitness_coverage = 0.0;
  double fitness_safety = 0.0;
  double fitness_total = 0.0;
};

inline nlohmann::json to_json(const RoundRecord& r) {
  return {{"round", r.round},
          {"attack_id", r.attack_id},
          {"kind", r.kind},
          {"outcome", plant::to_string(r.outcome)},
          {"decision", r.decision_attack ? "attack" : "no_attack"},
          {"decision_correct", r.decision_correct},
          {"harvested", r.harvested},
          {"exemplar_size", r.exemplar_size},
          {"validation_accuracy", r.validation_accuracy},
          {"cumulative_traces", r.cumulative_traces},
          {"trained", r.trained},
          {"diverged", r.diverged},
          {"attack_vector", r.attack_vector},
          {"fitness", {{"coverage", r.fitness_coverage},
                       {"safety", r.fitness_safety},
                       {"total", r.fitness_total}}}};
}

struct EvolutionResult {
  shield::Detector detector;
  std::vector<RoundRecord> records;
  bool stopped = false;
  long rounds_run = 0;
  shield::ExemplarSet exemplars;
  spear::EmbeddingArchive archive;
};

// Everything a campaign needs besides its own config: the plant, the trained
// predictor, golden-trace statistics, and the search bounds derived from them.
struct EvolutionContext {
  plant::PlantSpec plant_spec;
  plant::SafetyEnvelope env;
  predictor::PredictorModel predictor;
  plant::DriftStats stats;
  predictor::Window golden_window;  // nominal window preceding the injection point
  spear::SlotBounds bounds;
};

inline std::uint64_t episode_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
  return Rng::derive(seed, tag, index).next_u64();
}

// Assembles a campaign context from the golden nominal trace: drift
// statistics, search bounds, and the nominal window the Spear perturbs.
inline EvolutionContext make_context(const plant::PlantSpec& spec,
                                     const plant::SafetyEnvelope& env,
                                     predictor::PredictorModel model, const plant::Trace& golden,
                                     long injection_tick, double config_bound_factor = 2.0,
                                     double bias_bound_sigmas = 8.0) {
  EvolutionContext ctx;
  ctx.plant_spec = spec;
  ctx.env = env;
  ctx.stats = plant::trace_statistics(golden);
  ctx.bounds = spear::make_slot_bounds(spec, ctx.stats, config_bound_factor, bias_bound_sigmas);
  std::size_t width = model.window.width;
  if (golden.rows.size() < width + 2)
    throw std::invalid_argument("make_context: golden trace shorter than the predictor window");
  std::size_t end_row = static_cast<std::size_t>(injection_tick) >= width + 2
                            ? static_cast<std::size_t>(injection_tick) - 2
                            : width - 1;
  end_row = std::min(end_row, golden.rows.size() - 1);
  ctx.golden_window = predictor::window_from_trace(golden, spec, model.window, end_row);
  ctx.predictor = std::move(model);
  return ctx;
}

// Stop once the defender detects enough of the recent attacks: among the
// last K effective attacks, at least detect_min were declared, and the
// rounds spanning that window raised at most false_alarm_max false alarms.
// A window of anything weaker than K effective attacks never stops, so an
// under-alarming detector cannot stop a campaign by staying quiet.
inline bool check_stop(const std::vector<RoundRecord>& records, const StopRule& rule) {
  std::size_t attacks = 0, detections = 0, false_alarms = 0;
  for (std::size_t i = records.size(); i-- > 0 && attacks < rule.window;) {
    const RoundRecord& r = records[i];
    if (r.outcome == plant::Outcome::Effective) {
      ++attacks;
      if (r.decision_attack) ++detections;
    } else if (r.outcome == plant::Outcome::Ineffective && r.decision_attack) {
      ++false_alarms;
    }
  }
  if (attacks < rule.window) return false;
  return detections >= rule.detect_min && false_alarms <= rule.false_alarm_max;
}

// The attacker-defender loop. Attack generation draws from its own RNG
// stream and never reads detector state, so the attack sequence for a given
// seed is identical across toggle configurations.
inline EvolutionResult run_evolution(const EvolutionContext& ctx, const EvolutionConfig& cfg,
                                     const std::vector<shield::Sample>& validation) {
  EvolutionResult result;
  Rng attack_rng = Rng::derive(cfg.seed, "attack");
  Rng detector_rng = Rng::derive(cfg.seed, "detector-init");
  result.detector = shield::make_detector(cfg.detector, ctx.env, detector_rng);
  result.exemplars.capacity = cfg.exemplar_capacity;

  for (long round = 0; round < cfg.max_rounds; ++round) {
    RoundRecord rec;
    rec.round = round;
    rec.attack_id = "round-" + std::to_string(round);

    double u = attack_rng.uniform01();
    spear::Candidate chosen;
    if (u < cfg.mix_ga || (u < cfg.mix_ga + cfg.mix_random)) {
      spear::SearchConfig search = cfg.search;
      search.use_ga = u < cfg.mix_ga;
      rec.kind = search.use_ga ? "ga" : "random";
      chosen = spear::generate_attack(ctx.golden_window, ctx.predictor, ctx.env, ctx.bounds,
                                      result.archive, search, attack_rng);
    } else {
      rec.kind = "drift";
      plant::AttackVector v = plant::inject_drift(ctx.stats, attack_rng);
      chosen = spear::detail::score_candidate(std::move(v), ctx.predictor, ctx.golden_window,
                                              ctx.env, result.archive);
      chosen.fitness.total = chosen.fitness.safety;
    }
    rec.attack_vector = chosen.vector.deltas;
    rec.fitness_coverage = chosen.fitness.coverage;
    rec.fitness_safety = chosen.fitness.safety;
    rec.fitness_total = chosen.fitness.total;

    plant::Trace trace =
        plant::run_episode(ctx.plant_spec, ctx.env, chosen.vector, cfg.injection_tick,
                           episode_seed(cfg.seed, "episode", static_cast<std::uint64_t>(round)));
    trace.episode_id = rec.attack_id;
    rec.outcome = trace.outcome;
    result.archive.append(chosen.embedding);

    if (trace.outcome != plant::Outcome::ExcludedShort) {
      std::vector<shield::Verdict> verdicts = shield::judge_trace(result.detector, trace);
      rec.decision_attack = shield::end_to_end_decide(verdicts, cfg.rule);
      rec.decision_correct = trace.outcome == plant::Outcome::Effective
                                 ? rec.decision_attack
                                 : !rec.decision_attack;
      shield::MisclassifiedBatch batch =
          shield::collect_misclassified(verdicts, trace, cfg.detector);
      rec.harvested = batch.size();

      if (!batch.empty() || !rec.decision_correct) {
        Rng round_rng = Rng::derive(cfg.seed, "train", static_cast<std::uint64_t>(round));
        shield::TrainRoundResult tr = shield::train_round(
            result.detector, batch.samples, result.exemplars, cfg.train, cfg.toggles, round_rng);
        rec.trained = tr.trained;
        rec.diverged = tr.diverged;
        if (tr.trained && !tr.diverged && cfg.toggles.exe) {
          std::vector<shield::Sample> combined = result.exemplars.samples;
          std::vector<long> rounds = result.exemplars.rounds;
          for (const shield::Sample& s : batch.samples) {
            combined.push_back(s);
            rounds.push_back(round);
          }
          result.exemplars = shield::select_exemplars(combined, rounds, result.detector,
                                                      cfg.exemplar_capacity);
        }
      }
    }
    rec.exemplar_size = result.exemplars.size();
    rec.validation_accuracy =
        validation.empty() ? 0.0 : shield::detector_accuracy(result.detector, validation);
    rec.cumulative_traces = round + 1;
    result.records.push_back(std::move(rec));
    result.rounds_run = round + 1;
    if (check_stop(result.records, cfg.stop)) {
      result.stopped = true;
      break;
    }
  }
  return result;
}

// --- held-out pools -------------------------------------------------------------

struct EvalPool {
  std::vector<plant::Trace> effective;
  std::vector<plant::Trace> ineffective;
};

// Generates labeled held-out traces with a seed stream disjoint from any
// campaign. The pool is produced by the same attack pipeline as a campaign
// (GA, random search, and drift in the configured mix, with its own
// embedding archive) so evaluation sees an independently generated set of
// the same attack family.
inline EvalPool build_eval_pool(const EvolutionContext& ctx, std::size_t n_effective,
                                std::size_t n_ineffective, long injection_tick,
                                const spear::SearchConfig& base_search, std::uint64_t seed,
                                double mix_ga = 0.6, double mix_random = 0.2) {
  EvalPool pool;
  Rng rng = Rng::derive(seed, "eval-pool");
  spear::EmbeddingArchive archive;
  const std::size_t max_attempts = 40 * (n_effective + n_ineffective) + 100;
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    if (pool.effective.size() >= n_effective && pool.ineffective.size() >= n_ineffective) break;
    double u = rng.uniform01();
    plant::AttackVector v;
    std::vector<double> embedding;
    if (u < mix_ga + mix_random) {
      spear::SearchConfig search = base_search;
      search.use_ga = u < mix_ga;
      spear::Candidate c = spear::generate_attack(ctx.golden_window, ctx.predictor, ctx.env,
                                                  ctx.bounds, archive, search, rng);
      v = std::move(c.vector);
      embedding = std::move(c.embedding);
    } else {
      v = plant::inject_drift(ctx.stats, rng);
      embedding = predictor::embed(ctx.predictor, ctx.golden_window, v);
    }
    plant::Trace trace = plant::run_episode(ctx.plant_spec, ctx.env, v, injection_tick,
                                            episode_seed(seed, "eval-episode", attempt));
    archive.append(std::move(embedding));
    if (trace.outcome == plant::Outcome::Effective && pool.effective.size() < n_effective) {
      trace.episode_id = "eval-eff-" + std::to_string(pool.effective.size());
      pool.effective.push_back(std::move(trace));
    } else if (trace.outcome == plant::Outcome::Ineffective &&
               pool.ineffective.size() < n_ineffective) {
      trace.episode_id = "eval-ineff-" + std::to_string(pool.ineffective.size());
      pool.ineffective.push_back(std::move(trace));
    }
  }
  if (pool.effective.size() < n_effective || pool.ineffective.size() < n_ineffective)
    throw std::runtime_error("build_eval_pool: could not fill pools within the attempt budget");
  return pool;
}

// Fixed validation windows drawn from held-out traces at a coarse stride.
inline std::vector<shield::Sample> make_validation_samples(const std::vector<plant::Trace>& traces,
                                                           const shield::DetectorSpec& spec,
                                                           std::size_t stride_multiple = 4) {
  std::vector<shield::Sample> samples;
  std::size_t step = spec.stride * stride_multiple;
  if (step == 0) step = 1;
  for (const plant::Trace& t : traces) {
    if (t.rows.size() < spec.window) continue;
    for (std::size_t start = 0; start + spec.window <= t.rows.size(); start += step)
      samples.push_back(shield::make_sample(t, start, spec));
  }
  return samples;
}

// --- ablation ---------------------------------------------------------------------

struct AblationRun {
  std::uint64_t seed = 0;
  bool stopped = false;
  long traces_to_stop = 0;  // max_rounds when the run did not converge
  double final_accuracy = 0.0;
  std::vector<double> curve;  // validation accuracy per round
};

struct AblationSummary {
  shield::Toggles toggles;
  std::vector<AblationRun> runs;
  std::vector<std::size_t> kept;  // run indices after dropping best/worst by final accuracy
  std::vector<double> mean_curve, std_curve;
  double median_traces_to_stop = 0.0;
  bool all_converged = true;
};

inline const std::array<shield::Toggles, 8>& ablation_configurations() {
  static const std::array<shield::Toggles, 8> configs = {{
      {false, false, false},  // baseline
      {true, false, false},   // CBL
      {false, true, false},   // EXE
      {false, false, true},   // CBP
      {true, true, false},    // CBL+EXE
      {true, false, true},    // CBL+CBP
      {false, true, true},    // EXE+CBP
      {true, true, true},     // full
  }};
  return configs;
}

// All eight toggle combinations x the given seeds. Curves are padded to a
// common length with their final value; per configuration the best and worst
// runs by final accuracy are dropped before the mean/std and the median
// traces-to-stop are computed.
inline std::vector<AblationSummary> ablation_campaign(const EvolutionContext& ctx,
                                                      const EvolutionConfig& base,
                                                      const std::vector<std::uint64_t>& seeds,
                                                      const std::vector<shield::Sample>& validation,
                                                      std::size_t jobs = 1) {
  const auto& configs = ablation_configurations();
  std::vector<AblationSummary> summaries(configs.size());
  for (std::size_t c = 0; c < configs.size(); ++c) {
    summaries[c].toggles = configs[c];
    summaries[c].runs.resize(seeds.size());
  }

  std::size_t total = configs.size() * seeds.size();
  parallel_for(total, jobs, [&](std::size_t task) {
    std::size_t c = task / seeds.size();
    std::size_t s = task % seeds.size();
    EvolutionConfig cfg = base;
    cfg.toggles = configs[c];
    cfg.seed = seeds[s];
    EvolutionResult res = run_evolution(ctx, cfg, validation);
    AblationRun& run = summaries[c].runs[s];
    run.seed = seeds[s];
    run.stopped = res.stopped;
    run.traces_to_stop = res.stopped ? res.rounds_run : base.max_rounds;
    for (const RoundRecord& r : res.records) run.curve.push_back(r.validation_accuracy);
    run.final_accuracy = run.curve.empty() ? 0.0 : run.curve.back();
  });

  std::size_t common_len = 0;
  for (const auto& summary : summaries)
    for (const auto& run : summary.runs) common_len = std::max(common_len, run.curve.size());

  for (auto& summary : summaries) {
    for (auto& run : summary.runs) {
      double pad = run.curve.empty() ? 0.0 : run.curve.back();
      run.curve.resize(common_len, pad);
      if (!run.stopped) summary.all_converged = false;
    }
    std::vector<std::size_t> order(summary.runs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return summary.runs[a].final_accuracy < summary.runs[b].final_accuracy;
    });
    summary.kept = order;
    if (summary.kept.size() >= 3) {
      summary.kept.erase(summary.kept.begin());  // lowest
      summary.kept.pop_back();                   // highest
    }
    std::sort(summary.kept.begin(), summary.kept.end());

    summary.mean_curve.assign(common_len, 0.0);
    summary.std_curve.assign(common_len, 0.0);
    for (std::size_t i = 0; i < common_len; ++i) {
      double mean = 0.0;
      for (std::size_t k : summary.kept) mean += summary.runs[k].curve[i];
      mean /= static_cast<double>(summary.kept.size());
      double var = 0.0;
      for (std::size_t k : summary.kept) {
        double d = summary.runs[k].curve[i] - mean;
        var += d * d;
      }
      summary.mean_curve[i] = mean;
      summary.std_curve[i] = std::sqrt(var / static_cast<double>(summary.kept.size()));
    }
    std::vector<long> tts;
    for (std::size_t k : summary.kept) tts.push_back(summary.runs[k].traces_to_stop);
    std::sort(tts.begin(), tts.end());
    summary.median_traces_to_stop = tts.empty() ? 0.0 : static_cast<double>(tts[tts.size() / 2]);
  }
  return summaries;
}

// --- parameter sweep -----------------------------------------------------------------

struct SweepCell {
  std::size_t width = 0;
  std::size_t stride = 0;
  bool feasible = false;
  bool converged = false;
  double accuracy = 0.0;  // held-out sample accuracy
};

// Detection needs W_d ticks of window, a stride of slack, and C full
// segments of anomalous verdicts before the plant shuts down.
inline std::size_t detection_span(std::size_t width, std::size_t stride,
                                  const shield::EndToEndRule& rule) {
  return width + stride + rule.consecutive_required * rule.segment_len;
}

// One campaign plus a held-out evaluation per feasible (width, stride) cell;
// cells whose detection span exceeds the shortest attack-to-shutdown span
// are skipped.
inline std::vector<SweepCell> parameter_sweep(const EvolutionContext& ctx,
                                              const EvolutionConfig& base,
                                              const std::vector<std::size_t>& widths,
                                              const std::vector<std::size_t>& strides,
                                              std::size_t min_attack_span,
                                              const std::vector<plant::Trace>& holdout,
                                              std::size_t jobs = 1) {
  std::vector<SweepCell> cells;
  for (std::size_t w : widths)
    for (std::size_t s : strides) {
      SweepCell cell;
      cell.width = w;
      cell.stride = s;
      cell.feasible = detection_span(w, s, base.rule) <= min_attack_span;
      cells.push_back(cell);
    }
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    SweepCell& cell = cells[i];
    if (!cell.feasible) return;
    EvolutionConfig cfg = base;
    cfg.detector.window = cell.width;
    cfg.detector.stride = cell.stride;
    std::vector<shield::Sample> validation = make_validation_samples(holdout, cfg.detector);
    EvolutionResult res = run_evolution(ctx, cfg, validation);
    cell.converged = res.stopped;
    cell.accuracy = validation.empty() ? 0.0 : shield::detector_accuracy(res.detector, validation);
  });
  return cells;
}

}  // namespace evodef::evolve
