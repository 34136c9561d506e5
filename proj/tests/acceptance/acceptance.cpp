// Acceptance suite: runs every acceptance criterion end to end and prints one
// pass/fail line per criterion. Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "evodef/cli.hpp"
#include "evodef/evolve.hpp"
#include "evodef/nn.hpp"
#include "evodef/plant.hpp"
#include "evodef/predictor.hpp"
#include "evodef/shield.hpp"
#include "evodef/spear.hpp"
#include "evodef/store.hpp"

using namespace evodef;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, const std::string& label, bool ok, const std::string& detail,
            double seconds) {
  std::printf("[%s] criterion %2d: %s (%s, %.1fs)\n", ok ? "PASS" : "FAIL", id, label.c_str(),
              detail.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

void run_criterion(int id, const std::string& label,
                   const std::function<std::pair<bool, std::string>()>& body) {
  auto start = std::chrono::steady_clock::now();
  bool ok = false;
  std::string detail;
  try {
    auto [result, text] = body();
    ok = result;
    detail = text;
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("exception: ") + e.what();
  }
  double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report(id, label, ok, detail, seconds);
}

struct Fixture {
  plant::PlantSpec spec;          // defaults: dt 0.5, warmup 500, max_ticks 4000
  plant::SafetyEnvelope env;
  plant::Trace golden;
  plant::DriftStats stats;
  predictor::PredictorModel model;
  evolve::EvolutionContext ctx;
};

// golden trace + trained predictor, shared by the campaign criteria
Fixture build_fixture() {
  Fixture f;
  Config empty;
  f.env = plant::envelope_from_config(empty);
  f.golden =
      plant::run_episode(f.spec, f.env, plant::AttackVector::zero(), f.spec.warmup_ticks, 42);
  f.golden.episode_id = "golden";
  f.stats = plant::trace_statistics(f.golden);

  std::vector<plant::Trace> episodes;
  Rng perturb_rng = Rng::derive(43, "acceptance-perturb");
  for (std::size_t i = 0; i < 20; ++i) {
    plant::AttackVector v;
    long injection = f.spec.warmup_ticks;
    if (i % 2 == 1) {
      std::size_t c = (i / 2) % plant::kConfigCount;
      double mag = std::fabs(f.spec.nominal_configs[c]);
      double sign = perturb_rng.uniform01() < 0.5 ? -1.0 : 1.0;
      v.deltas[plant::config_slot(c)] = sign * perturb_rng.uniform(1.0, 2.0) * mag;
      if (perturb_rng.uniform01() < 0.35) {
        std::size_t c2 =
            (c + 1 + perturb_rng.uniform_int(plant::kConfigCount - 1)) % plant::kConfigCount;
        double mag2 = std::fabs(f.spec.nominal_configs[c2]);
        double sign2 = perturb_rng.uniform01() < 0.5 ? -1.0 : 1.0;
        v.deltas[plant::config_slot(c2)] = sign2 * perturb_rng.uniform(0.8, 2.0) * mag2;
      }
      long span = (f.spec.max_ticks - f.spec.warmup_ticks) / 2;
      injection = f.spec.warmup_ticks +
                  static_cast<long>(perturb_rng.uniform_int(static_cast<std::uint64_t>(span)));
    }
    plant::Trace t = plant::run_episode(f.spec, f.env, v, injection,
                                        Rng::derive(43, "acceptance-episode", i).next_u64());
    t.episode_id = "acc-" + std::to_string(i);
    episodes.push_back(std::move(t));
  }
  predictor::WindowSpec wspec;
  Rng data_rng = Rng::derive(43, "dataset");
  predictor::Dataset ds = predictor::build_dataset(episodes, wspec, f.spec, data_rng, 10);
  nn::TrainConfig tc;
  tc.learning_rate = 0.05;
  tc.batch_size = 16;
  tc.max_epochs = 30;
  tc.patience = 6;
  Rng train_rng = Rng::derive(43, "predictor-train");
  f.model = predictor::train_predictor(ds, wspec, {64, 32}, tc, train_rng);
  f.ctx = evolve::make_context(f.spec, f.env, f.model, f.golden, f.spec.warmup_ticks);
  return f;
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

}  // namespace

// --- criterion bodies ---------------------------------------------------------

static std::pair<bool, std::string> criterion_formula_oracles() {
  bool ok = true;
  // safety proximity: 1 at a bound, 0.5 at the midpoint, 2 one range outside
  ok &= spear::safety_fitness_single(2.0, 2.0, 6.0) == 1.0;
  ok &= spear::safety_fitness_single(6.0, 2.0, 6.0) == 1.0;
  ok &= spear::safety_fitness_single(4.0, 2.0, 6.0) == 0.5;
  ok &= spear::safety_fitness_single(10.0, 2.0, 6.0) == 2.0;
  ok &= spear::safety_fitness_single(-2.0, 2.0, 6.0) == 2.0;

  // balance penalty: (lambda / B) * |C_normal - C_abnormal|
  std::vector<double> preds{0.1, 0.2, 0.3, 0.9};   // 3 correct normal, 1 correct abnormal
  std::vector<std::uint8_t> labels{0, 0, 0, 1};
  double with = nn::balanced_bce_loss(preds, labels, 1.0, 4).loss;
  double without = nn::balanced_bce_loss(preds, labels, 0.0, 4).loss;
  ok &= std::fabs((with - without) - 0.5) < 1e-15;

  double lam2 = nn::balanced_bce_loss(preds, labels, 2.0, 4).loss;
  ok &= std::fabs((lam2 - without) - 1.0) < 1e-15;

  // balanced batch: penalty vanishes
  std::vector<double> bal{0.1, 0.2, 0.8, 0.9};
  std::vector<std::uint8_t> bal_labels{0, 0, 1, 1};
  ok &= nn::balanced_bce_loss(bal, bal_labels, 1.0, 4).loss ==
        nn::balanced_bce_loss(bal, bal_labels, 0.0, 4).loss;
  return {ok, "safety formula and balance penalty exact"};
}

static std::pair<bool, std::string> criterion_gradient_check() {
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    Rng rng(1000 + trial);
    std::vector<nn::Activation> acts{nn::Activation::ReLU, nn::Activation::ReLU,
                                     nn::Activation::Sigmoid};
    nn::MlpModel m = nn::make_mlp({4, 8, 8, 1}, acts, rng);
    std::vector<double> in(4);
    for (double& v : in) v = rng.uniform(-1, 1);
    std::uint8_t label = rng.uniform01() < 0.5 ? 0 : 1;

    auto loss_at = [&](const nn::MlpModel& model) {
      auto out = nn::forward(model, in).output();
      return nn::balanced_bce_loss(out, {label}, 0.0, 1).loss;
    };
    auto pass = nn::forward(m, in);
    auto loss = nn::balanced_bce_loss(pass.output(), {label}, 0.0, 1);
    auto grads = nn::backward(m, pass, loss.grad);

    const double h = 1e-5;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      for (std::size_t k = 0; k < m.layers[l].weights.size(); ++k) {
        nn::MlpModel up = m, dn = m;
        up.layers[l].weights[k] += h;
        dn.layers[l].weights[k] -= h;
        double fd = (loss_at(up) - loss_at(dn)) / (2 * h);
        double an = grads.dw[l][k];
        double denom = std::max({std::fabs(fd), std::fabs(an), 1e-6});
        worst = std::max(worst, std::fabs(fd - an) / denom);
      }
      for (std::size_t k = 0; k < m.layers[l].biases.size(); ++k) {
        nn::MlpModel up = m, dn = m;
        up.layers[l].biases[k] += h;
        dn.layers[l].biases[k] -= h;
        double fd = (loss_at(up) - loss_at(dn)) / (2 * h);
        double an = grads.db[l][k];
        double denom = std::max({std::fabs(fd), std::fabs(an), 1e-6});
        worst = std::max(worst, std::fabs(fd - an) / denom);
      }
    }
  }
  return {worst < 1e-4, fmt("100 nets, worst relative error %.2e", worst)};
}

static std::pair<bool, std::string> criterion_cbp_contract() {
  Rng rng(7);
  nn::MlpModel m =
      nn::make_mlp({4, 8, 1}, {nn::Activation::ReLU, nn::Activation::Sigmoid}, rng);
  for (double& w : m.layers[0].weights) w = -std::fabs(w) - 0.1;
  for (double& b : m.layers[0].biases) b = -0.1;
  for (std::size_t i = 0; i < 8; ++i) m.utilities[0][i] = 0.2 + 0.05 * static_cast<double>(i);

  auto pass = nn::forward(m, {1.0, 0.5, 0.25, 2.0});
  for (double h : pass.activations[1])
    if (h != 0.0) return {false, "expected all hidden neurons inactive"};

  nn::TrainConfig cfg;
  cfg.rho = 0.2;
  nn::MlpModel before = m;
  nn::cbp_step(m, pass, cfg, rng);

  bool ok = true;
  ok &= std::fabs(m.replace_counters[0] - 0.6) < 1e-12;  // 1.6 minus one replacement
  ok &= m.layers[1].w(0, 0) == 0.0;                      // output weights zeroed
  ok &= m.utilities[0][0] == 0.0;                        // utility reset
  bool reinit = false;
  for (std::size_t c = 0; c < 4; ++c) reinit |= m.layers[0].w(0, c) != before.layers[0].w(0, c);
  ok &= reinit;
  std::size_t replaced = 0;
  for (std::size_t r = 0; r < 8; ++r) {
    bool changed = false;
    for (std::size_t c = 0; c < 4; ++c) changed |= m.layers[0].w(r, c) != before.layers[0].w(r, c);
    if (changed) ++replaced;
  }
  ok &= replaced == 1;
  return {ok, fmt("counter 1.6 -> %.1f, exactly one neuron replaced", m.replace_counters[0])};
}

static std::pair<bool, std::string> criterion_roulette() {
  std::vector<double> fitness{1.0, 3.0};
  Rng rng(99);
  std::size_t first = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i)
    if (spear::roulette_index(fitness, rng) == 0) ++first;
  double f0 = static_cast<double>(first) / draws;
  double f1 = 1.0 - f0;
  bool ok = std::fabs(f0 - 0.25) <= 0.02 && std::fabs(f1 - 0.75) <= 0.02;
  return {ok, fmt("frequencies [%.4f, %.4f] vs [0.25, 0.75]", f0, f1)};
}

static std::pair<bool, std::string> criterion_coverage() {
  bool ok = true;
  spear::EmbeddingArchive archive;
  archive.append({0.0});
  archive.append({2.0});
  // mean distances 1, 2, 4 -> min-max 0, 1/3, 1
  auto d = spear::coverage_fitness({{1.0}, {3.0}, {5.0}}, archive);
  ok &= d[0] == 0.0;
  ok &= std::fabs(d[1] - 1.0 / 3.0) < 1e-15;
  ok &= d[2] == 1.0;

  // degenerate pool: all equidistant -> all zeros
  spear::EmbeddingArchive origin;
  origin.append({0.0, 0.0});
  auto dz = spear::coverage_fitness({{3.0, 0.0}, {0.0, 3.0}, {-3.0, 0.0}}, origin);
  ok &= dz == std::vector<double>{0.0, 0.0, 0.0};

  // empty archive -> all zeros
  spear::EmbeddingArchive empty;
  auto de = spear::coverage_fitness({{1.0}, {2.0}, {3.0}}, empty);
  ok &= de == std::vector<double>{0.0, 0.0, 0.0};
  return {ok, "3-candidate oracle, degenerate and empty-archive cases exact"};
}

static std::pair<bool, std::string> criterion_end_to_end_rule() {
  Rng rng(7);
  std::size_t checked = 0;
  // constructed boundary: exactly C consecutive vs C-1
  for (std::size_t C : {1ul, 3ul, 10ul}) {
    shield::EndToEndRule rule;
    rule.segment_len = 25;
    rule.consecutive_required = C;
    for (std::size_t run : {C - 1, C}) {
      std::vector<shield::Verdict> v;
      for (std::size_t seg = 0; seg < 30; ++seg) {
        shield::Verdict w;
        w.start_row = seg * 25;
        w.end_row = seg * 25 + 24;
        w.abnormal = seg >= 3 && seg < 3 + run;
        v.push_back(w);
      }
      bool expected = run >= C;
      if (shield::end_to_end_decide(v, rule) != expected)
        return {false, fmt("boundary case C=%zu run=%zu", C, run)};
      ++checked;
    }
  }
  // 10,000 random streams vs brute force
  for (int trial = 0; trial < 10000; ++trial) {
    shield::EndToEndRule rule;
    rule.segment_len = 1 + rng.uniform_int(30);
    rule.consecutive_required = 1 + rng.uniform_int(6);
    std::size_t n = 1 + rng.uniform_int(120);
    std::size_t stride = 1 + rng.uniform_int(10);
    std::size_t window = 1 + rng.uniform_int(20);
    double density = rng.uniform01();
    std::vector<shield::Verdict> verdicts;
    for (std::size_t i = 0; i < n; ++i) {
      shield::Verdict v;
      v.start_row = i * stride;
      v.end_row = v.start_row + window - 1;
      v.abnormal = rng.uniform01() < density;
      verdicts.push_back(v);
    }
    std::size_t max_seg = 0;
    for (const auto& v : verdicts) max_seg = std::max(max_seg, v.end_row / rule.segment_len);
    bool expected = false;
    for (std::size_t first = 0; first + rule.consecutive_required <= max_seg + 1 && !expected;
         ++first) {
      bool all = true;
      for (std::size_t seg = first; seg < first + rule.consecutive_required && all; ++seg) {
        std::size_t total = 0, abnormal = 0;
        for (const auto& v : verdicts)
          if (v.end_row / rule.segment_len == seg) {
            ++total;
            if (v.abnormal) ++abnormal;
          }
        all = total > 0 && 2 * abnormal > total;
      }
      expected = all;
    }
    if (shield::end_to_end_decide(verdicts, rule) != expected)
      return {false, fmt("mismatch on random stream %d", trial)};
    ++checked;
  }
  return {true, fmt("%zu streams match the brute-force scanner", checked)};
}

static std::pair<bool, std::string> criterion_plant_determinism(const Fixture& f) {
  // bit-identical traces for identical seeds
  plant::Trace a = plant::run_episode(f.spec, f.env, plant::kc_flip_attack(f.spec), 500, 77);
  plant::Trace b = plant::run_episode(f.spec, f.env, plant::kc_flip_attack(f.spec), 500, 77);
  if (a.rows.size() != b.rows.size()) return {false, "row count differs across identical runs"};
  for (std::size_t i = 0; i < a.rows.size(); ++i)
    if (a.rows[i].sensors != b.rows[i].sensors || a.rows[i].actuators != b.rows[i].actuators)
      return {false, "trace values differ across identical runs"};

  // the Kc sign flip triggers the interlock in-episode
  if (a.outcome != plant::Outcome::Effective)
    return {false, "Kc flip did not shut the plant down"};

  // the zero vector never triggers it
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    plant::Trace z = plant::run_episode(f.spec, f.env, plant::AttackVector::zero(), 500, seed);
    if (z.outcome != plant::Outcome::Ineffective) return {false, "zero vector caused a shutdown"};
  }
  return {true, fmt("bit-identical traces; Kc flip shuts down at tick %ld", a.shutdown_tick)};
}

static std::pair<bool, std::string> criterion_drift_tolerance(const Fixture& f) {
  Rng rng(881);
  int ineffective = 0;
  for (int i = 0; i < 100; ++i) {
    plant::AttackVector v = plant::inject_drift(f.stats, rng);
    plant::Trace t = plant::run_episode(f.spec, f.env, v, 500,
                                        Rng::derive(881, "drift", i).next_u64());
    if (t.outcome == plant::Outcome::Ineffective) ++ineffective;
  }
  return {ineffective >= 95, fmt("%d/100 drift episodes ineffective", ineffective)};
}

static std::pair<bool, std::string> criterion_evolution(const Fixture& f,
                                                        shield::Detector* out_detector) {
  evolve::EvolutionConfig cfg;
  cfg.seed = 4242;
  cfg.max_rounds = 300;

  // held-out pools, disjoint seed stream
  evolve::EvalPool pool = evolve::build_eval_pool(f.ctx, 40, 40, cfg.injection_tick, cfg.search,
                                                  987654321);
  std::vector<plant::Trace> vtraces;
  for (std::size_t i = 0; i < 4; ++i) vtraces.push_back(pool.effective[i]);
  for (std::size_t i = 0; i < 4; ++i) vtraces.push_back(pool.ineffective[i]);
  std::vector<shield::Sample> validation = evolve::make_validation_samples(vtraces, cfg.detector);

  evolve::EvolutionResult res = evolve::run_evolution(f.ctx, cfg, validation);
  if (!res.stopped)
    return {false, fmt("stopping condition not reached within %ld rounds", cfg.max_rounds)};

  std::size_t detected = 0, false_alarms = 0;
  for (const plant::Trace& t : pool.effective) {
    auto verdicts = shield::judge_trace(res.detector, t);
    if (shield::end_to_end_decide(verdicts, cfg.rule)) ++detected;
  }
  for (const plant::Trace& t : pool.ineffective) {
    auto verdicts = shield::judge_trace(res.detector, t);
    if (shield::end_to_end_decide(verdicts, cfg.rule)) ++false_alarms;
  }
  double detection = detected / 40.0;
  double fa = false_alarms / 40.0;
  if (out_detector) *out_detector = res.detector;
  bool ok = detection >= 0.80 && fa <= 0.15;
  return {ok, fmt("stopped after %ld rounds; detection %zu/40 (%.0f%%), false alarms %zu/40 "
                  "(%.0f%%)",
                  res.rounds_run, detected, detection * 100, false_alarms, fa * 100)};
}

static std::pair<bool, std::string> criterion_ablation(const Fixture& f) {
  plant::PlantSpec short_spec = f.spec;
  short_spec.max_ticks = 2000;
  plant::Trace short_golden = plant::run_episode(short_spec, f.env, plant::AttackVector::zero(),
                                                 short_spec.warmup_ticks, 42);
  short_golden.episode_id = "golden-short";
  evolve::EvolutionContext ctx =
      evolve::make_context(short_spec, f.env, f.model, short_golden, short_spec.warmup_ticks);

  evolve::EvolutionConfig base;
  base.seed = 0;  // overridden per run
  base.max_rounds = 60;
  base.stop.window = 6;
  base.stop.detect_min = 5;
  base.stop.false_alarm_max = 1;
  base.search.population = 40;
  base.search.generations = 3;
  base.search.offspring_count = 12;
  base.detector.window = 40;
  base.detector.stride = 8;
  base.detector.hidden = {48, 24};
  base.train.max_epochs = 10;
  base.train.patience = 3;
  base.exemplar_capacity = 1000;

  evolve::EvalPool vpool = evolve::build_eval_pool(ctx, 4, 4, base.injection_tick, base.search,
                                                   13579);
  std::vector<plant::Trace> vtraces = vpool.effective;
  for (auto& t : vpool.ineffective) vtraces.push_back(std::move(t));
  std::vector<shield::Sample> validation = evolve::make_validation_samples(vtraces, base.detector);

  std::vector<std::uint64_t> seeds{101, 202, 303, 404, 505};
  auto summaries = evolve::ablation_campaign(ctx, base, seeds, validation, 2);

  const evolve::AblationSummary& baseline = summaries[0];
  const evolve::AblationSummary& full = summaries[7];
  double baseline_final = baseline.mean_curve.empty() ? 0.0 : baseline.mean_curve.back();
  bool lowest = true;
  for (std::size_t c = 1; c < summaries.size(); ++c) {
    double final_c = summaries[c].mean_curve.empty() ? 0.0 : summaries[c].mean_curve.back();
    if (final_c < baseline_final - 1e-12) lowest = false;
  }
  bool faster = full.median_traces_to_stop < baseline.median_traces_to_stop;
  bool ok = faster && lowest;
  return {ok, fmt("median traces-to-stop full %.0f vs baseline %.0f; baseline final accuracy "
                  "%.3f is %slowest-or-tied",
                  full.median_traces_to_stop, baseline.median_traces_to_stop, baseline_final,
                  lowest ? "" : "NOT ")};
}

static std::pair<bool, std::string> criterion_exemplar_determinism() {
  Config empty;
  plant::SafetyEnvelope env = plant::envelope_from_config(empty);
  shield::DetectorSpec spec;
  spec.window = 10;
  spec.stride = 5;
  spec.hidden = {12, 6};
  Rng det_rng(5150);
  shield::Detector det = shield::make_detector(spec, env, det_rng);

  Rng rng(5151);
  std::vector<shield::Sample> samples;
  std::vector<long> rounds;
  for (int i = 0; i < 500; ++i) {
    shield::Sample s;
    for (std::size_t k = 0; k < spec.flat_size(); ++k) s.features.push_back(rng.uniform(0, 1));
    s.label = i % 2;
    samples.push_back(s);
    rounds.push_back(i);
  }
  auto a = shield::select_exemplars(samples, rounds, det, 100);
  auto b = shield::select_exemplars(samples, rounds, det, 100);
  bool ok = a.rounds == b.rounds && a.samples.size() == 100;
  for (std::size_t i = 0; ok && i < a.samples.size(); ++i)
    ok &= a.samples[i].features == b.samples[i].features;

  // N <= capacity keeps every sample
  std::vector<shield::Sample> small(samples.begin(), samples.begin() + 60);
  std::vector<long> small_rounds(rounds.begin(), rounds.begin() + 60);
  auto c = shield::select_exemplars(small, small_rounds, det, 100);
  ok &= c.size() == 60;
  std::vector<long> got = c.rounds;
  std::sort(got.begin(), got.end());
  ok &= got == small_rounds;
  return {ok, "identical selections across reruns; under-capacity input kept whole"};
}

static std::pair<bool, std::string> criterion_persistence(const Fixture& f,
                                                          const shield::Detector* detector) {
  fs::path dir = fs::temp_directory_path() / "evodef-acceptance-persist";
  fs::create_directories(dir);
  bool ok = true;
  std::string detail;

  // trace round trip on a real effective attack
  plant::Trace t = plant::run_episode(f.spec, f.env, plant::kc_flip_attack(f.spec), 500, 4711);
  t.episode_id = "persist";
  store::write_trace(t, (dir / "trace.csv").string());
  plant::Trace back = store::read_trace((dir / "trace.csv").string());
  ok &= back.rows.size() == t.rows.size();
  for (std::size_t i = 0; ok && i < t.rows.size(); ++i)
    ok &= back.rows[i].sensors == t.rows[i].sensors &&
          back.rows[i].actuators == t.rows[i].actuators && back.rows[i].tick == t.rows[i].tick;
  ok &= back.labels == t.labels && back.outcome == t.outcome && back.attack == t.attack;
  if (!ok) return {false, "trace round trip differs"};

  // checkpoint round trip, including a trained detector when available
  nn::MlpModel net = detector ? detector->net : f.model.net;
  nn::save_checkpoint(net, (dir / "net.json").string());
  ok &= nn::load_checkpoint((dir / "net.json").string()) == net;
  predictor::save_predictor(f.model, (dir / "predictor.json").string());
  auto pm = predictor::load_predictor((dir / "predictor.json").string());
  ok &= pm.net == f.model.net && pm.norm.min == f.model.norm.min && pm.norm.max == f.model.norm.max;
  if (!ok) return {false, "checkpoint round trip differs"};

  // manifest round trip + digest verification
  store::CampaignManifest m;
  m.command = "acceptance";
  m.created = store::timestamp_utc();
  m.seed = 4711;
  m.config = {{"plant", {{"dt", "0.5"}}}};
  m.files.push_back({"trace.csv", store::file_digest((dir / "trace.csv").string()), "trace"});
  m.files.push_back({"net.json", store::file_digest((dir / "net.json").string()), "checkpoint"});
  store::write_manifest(m, (dir / "manifest.json").string());
  auto mb = store::read_manifest((dir / "manifest.json").string());
  ok &= mb.command == m.command && mb.seed == m.seed && mb.config == m.config &&
        mb.files.size() == m.files.size();
  ok &= store::verify_manifest(mb, dir.string()).empty();
  if (!ok) return {false, "manifest round trip or digest verification failed"};

  // metrics vs an independent counting oracle on 1,000 random cases
  Rng rng(4712);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 1 + rng.uniform_int(50);
    std::vector<std::uint8_t> preds(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = rng.uniform01() < 0.5 ? 1 : 0;
      labels[i] = rng.uniform01() < 0.5 ? 1 : 0;
    }
    auto got = store::compute_sample_metrics(preds, labels);
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (preds[i] && labels[i]) ++tp;
      else if (preds[i] && !labels[i]) ++fp;
      else if (!preds[i] && labels[i]) ++fn;
      else ++tn;
    }
    double acc = static_cast<double>(tp + tn) / n;
    double prec = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
    double rec = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
    double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    if (got.tp != tp || got.tn != tn || got.fp != fp || got.fn != fn || got.accuracy != acc ||
        got.precision != prec || got.recall != rec || got.f1 != f1)
      return {false, fmt("metrics mismatch on case %d", trial)};
  }
  return {true, "traces, checkpoints, manifests bit-exact; 1000 metric cases match"};
}

int main() {
  std::printf("acceptance suite\n");
  run_criterion(1, "formula oracles (safety fitness, balance penalty)", criterion_formula_oracles);
  run_criterion(2, "gradient check vs central finite differences", criterion_gradient_check);
  run_criterion(3, "continual backpropagation replacement contract", criterion_cbp_contract);
  run_criterion(4, "roulette selection distribution", criterion_roulette);
  run_criterion(5, "coverage fitness min-max oracle", criterion_coverage);
  run_criterion(6, "end-to-end rule vs brute-force scanner", criterion_end_to_end_rule);

  std::printf("building fixture (golden trace + predictor)...\n");
  std::fflush(stdout);
  Fixture f = build_fixture();

  run_criterion(7, "plant determinism and the golden attack",
                [&] { return criterion_plant_determinism(f); });
  run_criterion(8, "drift tolerance", [&] { return criterion_drift_tolerance(f); });

  shield::Detector final_detector;
  bool have_detector = false;
  run_criterion(9, "evolution campaign reaches the stop and generalizes", [&] {
    auto r = criterion_evolution(f, &final_detector);
    have_detector = true;
    return r;
  });
  run_criterion(10, "ablation trend (full module vs baseline)",
                [&] { return criterion_ablation(f); });
  run_criterion(11, "exemplar selection determinism", criterion_exemplar_determinism);
  run_criterion(12, "persistence round trips and metric oracle", [&] {
    return criterion_persistence(f, have_detector ? &final_detector : nullptr);
  });

  std::printf("%d of 12 criteria failed\n", g_failures);
  return g_failures;
}
