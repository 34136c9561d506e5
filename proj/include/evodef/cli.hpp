#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "evodef/config.hpp"
#include "evodef/evolve.hpp"
#include "evodef/nn.hpp"
#include "evodef/plant.hpp"
#include "evodef/predictor.hpp"
#include "evodef/shield.hpp"
#include "evodef/spear.hpp"
#include "evodef/store.hpp"

namespace evodef::cli {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config_path;  // empty: built-in defaults
  std::uint64_t seed = 1;
  std::string out_dir;  // empty: runs/<command>-<confighash>-s<seed>
  std::size_t jobs = 1;
};

inline Config load_config(const CommonOptions& opts) {
  return opts.config_path.empty() ? Config() : Config::load(opts.config_path);
}

inline std::string config_hash(const Config& cfg) {
  std::string dump = cfg.to_json().dump();
  std::uint64_t h = store::fnv1a64(dump.data(), dump.size());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%08llx", static_cast<unsigned long long>(h & 0xffffffffull));
  return buf;
}

// Campaign directories are named by config hash + seed so reruns of the same
// experiment land in the same place.
inline fs::path resolve_out_dir(const std::string& command, const Config& cfg,
                                const CommonOptions& opts) {
  if (!opts.out_dir.empty()) return fs::path(opts.out_dir);
  return fs::path("runs") / (command + "-" + config_hash(cfg) + "-s" + std::to_string(opts.seed));
}

// Manifest-first output protocol: the manifest is written before any result,
// then rewritten at the end with every produced file and its digest.
class CommandIo {
 public:
  CommandIo(const std::string& command, const Config& cfg, const CommonOptions& opts)
      : dir_(resolve_out_dir(command, cfg, opts)) {
    fs::create_directories(dir_);
    manifest_.command = command;
    manifest_.created = store::timestamp_utc();
    manifest_.seed = opts.seed;
    manifest_.config = cfg.to_json();
    store::write_manifest(manifest_, (dir_ / "manifest.json").string());
  }

  const fs::path& dir() const { return dir_; }
  fs::path path(const std::string& name) const { return dir_ / name; }

  void add_file(const std::string& name, const std::string& role) {
    pending_.push_back({name, role});
  }

  nlohmann::json& extra() { return manifest_.extra; }

  void finish() {
    manifest_.files.clear();
    for (const auto& [name, role] : pending_) {
      store::ManifestFile f;
      f.path = name;
      f.role = role;
      f.digest = store::file_digest((dir_ / name).string());
      manifest_.files.push_back(std::move(f));
    }
    store::write_manifest(manifest_, (dir_ / "manifest.json").string());
  }

 private:
  fs::path dir_;
  store::CampaignManifest manifest_;
  std::vector<std::pair<std::string, std::string>> pending_;
};

// --- config-derived pieces ------------------------------------------------------

inline nn::TrainConfig train_config_from(const Config& cfg, const std::string& section = "train") {
  nn::TrainConfig tc;
  tc.learning_rate = cfg.get_double(section + ".learning_rate", tc.learning_rate);
  tc.batch_size = static_cast<std::size_t>(cfg.get_int(section + ".batch_size", tc.batch_size));
  tc.lambda = cfg.get_double(section + ".lambda", tc.lambda);
  tc.eta = cfg.get_double(section + ".eta", tc.eta);
  tc.rho = cfg.get_double(section + ".rho", tc.rho);
  tc.max_epochs = static_cast<std::size_t>(cfg.get_int(section + ".max_epochs", tc.max_epochs));
  tc.patience = static_cast<std::size_t>(cfg.get_int(section + ".patience", tc.patience));
  return tc;
}

inline predictor::WindowSpec window_spec_from(const Config& cfg) {
  predictor::WindowSpec w;
  w.width = static_cast<std::size_t>(cfg.get_int("predictor.window", w.width));
  w.horizon = static_cast<std::size_t>(cfg.get_int("predictor.horizon", w.horizon));
  return w;
}

inline shield::DetectorSpec detector_spec_from(const Config& cfg) {
  shield::DetectorSpec d;
  d.window = static_cast<std::size_t>(cfg.get_int("detector.window", d.window));
  d.stride = static_cast<std::size_t>(cfg.get_int("detector.stride", d.stride));
  if (cfg.has("detector.hidden")) {
    d.hidden.clear();
    for (int h : cfg.get_ints("detector.hidden")) d.hidden.push_back(static_cast<std::size_t>(h));
  }
  return d;
}

inline shield::EndToEndRule rule_from(const Config& cfg) {
  shield::EndToEndRule r;
  r.segment_len = static_cast<std::size_t>(cfg.get_int("detector.segment_len", r.segment_len));
  r.consecutive_required = static_cast<std::size_t>(
      cfg.get_int("detector.consecutive_required", r.consecutive_required));
  return r;
}

inline spear::SearchConfig search_config_from(const Config& cfg) {
  spear::SearchConfig s;
  s.population = static_cast<std::size_t>(cfg.get_int("spear.population", s.population));
  s.generations = static_cast<std::size_t>(cfg.get_int("spear.generations", s.generations));
  s.offspring_count = static_cast<std::size_t>(cfg.get_int("spear.offspring", s.offspring_count));
  s.max_slots = static_cast<std::size_t>(cfg.get_int("spear.max_slots", s.max_slots));
  s.mutation_prob = cfg.get_double("spear.mutation_prob", s.mutation_prob);
  s.mutation_sigma_fraction =
      cfg.get_double("spear.mutation_sigma_fraction", s.mutation_sigma_fraction);
  s.crossover_prob = cfg.get_double("spear.crossover_prob", s.crossover_prob);
  s.elitism = cfg.get_bool("spear.elitism", s.elitism);
  s.coverage_weight = cfg.get_double("spear.coverage_weight", s.coverage_weight);
  return s;
}

inline evolve::EvolutionConfig evolution_config_from(const Config& cfg, std::uint64_t seed) {
  evolve::EvolutionConfig e;
  e.max_rounds = cfg.get_int("evolve.max_rounds", e.max_rounds);
  e.stop.window = static_cast<std::size_t>(cfg.get_int("evolve.stop_window", e.stop.window));
  e.stop.detect_min =
      static_cast<std::size_t>(cfg.get_int("evolve.stop_detect_min", e.stop.detect_min));
  e.stop.false_alarm_max = static_cast<std::size_t>(
      cfg.get_int("evolve.stop_false_alarm_max", e.stop.false_alarm_max));
  e.mix_ga = cfg.get_double("evolve.mix_ga", e.mix_ga);
  e.mix_random = cfg.get_double("evolve.mix_random", e.mix_random);
  e.exemplar_capacity =
      static_cast<std::size_t>(cfg.get_int("evolve.exemplar_capacity", e.exemplar_capacity));
  e.injection_tick = cfg.get_int("evolve.injection_tick", e.injection_tick);
  e.seed = seed;
  e.train = train_config_from(cfg);
  e.detector = detector_spec_from(cfg);
  e.rule = rule_from(cfg);
  e.search = search_config_from(cfg);
  return e;
}

// --- shared pipeline steps --------------------------------------------------------

inline plant::Trace make_golden_trace(const plant::PlantSpec& spec,
                                      const plant::SafetyEnvelope& env, std::uint64_t seed) {
  plant::Trace golden =
      plant::run_episode(spec, env, plant::AttackVector::zero(), spec.warmup_ticks, seed);
  golden.episode_id = "golden";
  return golden;
}

inline void write_stats_json(const plant::DriftStats& stats, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["slot_order"] = "sensors then actuators";
  j["mean"] = std::vector<double>(stats.mean.begin(), stats.mean.end());
  j["stddev"] = std::vector<double>(stats.stddev.begin(), stats.stddev.end());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write stats: " + path);
  out << j.dump(1) << "\n";
}

inline plant::DriftStats read_stats_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read stats: " + path);
  nlohmann::json j;
  in >> j;
  plant::DriftStats st;
  auto mean = j.at("mean").get<std::vector<double>>();
  auto stddev = j.at("stddev").get<std::vector<double>>();
  if (mean.size() != st.mean.size() || stddev.size() != st.stddev.size())
    throw std::runtime_error(path + ": bad statistics shape");
  std::copy(mean.begin(), mean.end(), st.mean.begin());
  std::copy(stddev.begin(), stddev.end(), st.stddev.begin());
  return st;
}

inline evolve::EvolutionContext context_from_files(const Config& cfg,
                                                   const std::string& predictor_path,
                                                   const std::string& golden_path,
                                                   long injection_tick) {
  plant::PlantSpec spec = plant::plant_spec_from_config(cfg);
  plant::SafetyEnvelope env = plant::envelope_from_config(cfg);
  predictor::PredictorModel model = predictor::load_predictor(predictor_path);
  plant::Trace golden = store::read_trace(golden_path);
  return evolve::make_context(spec, env, std::move(model), golden, injection_tick,
                              cfg.get_double("spear.config_bound_factor", 2.0),
                              cfg.get_double("spear.bias_bound_sigmas", 8.0));
}

// --- commands -----------------------------------------------------------------------

// simulate: golden nominal trace plus per-variable statistics.
inline int run_simulate(const CommonOptions& opts) {
  Config cfg = load_config(opts);
  std::vector<std::string> errors = plant::validate_plant_config(cfg);
  if (!errors.empty()) {
    for (const std::string& e : errors) std::cerr << "config error: " << e << "\n";
    return 1;
  }
  plant::PlantSpec spec = plant::plant_spec_from_config(cfg);
  plant::SafetyEnvelope env = plant::envelope_from_config(cfg);
  CommandIo io("simulate", cfg, opts);
  plant::Trace golden = make_golden_trace(spec, env, opts.seed);
  store::write_trace(golden, io.path("golden.csv").string());
  write_stats_json(plant::trace_statistics(golden), io.path("stats.json").string());
  io.add_file("golden.csv", "trace");
  io.add_file("golden.csv.meta.json", "trace-metadata");
  io.add_file("stats.json", "statistics");
  io.extra()["rows"] = golden.rows.size();
  io.extra()["outcome"] = plant::to_string(golden.outcome);
  io.finish();
  std::cout << "simulate: " << golden.rows.size() << " rows -> " << io.dir().string() << "\n";
  return 0;
}

// collect: nominal episodes mixed with mid-run config perturbations, plus a
// dataset manifest carrying the 80/20 split.
inline int run_collect(const CommonOptions& opts, std::size_t n_episodes) {
  if (n_episodes < 2) {
    std::cerr << "collect: need at least 2 episodes\n";
    return 1;
  }
  Config cfg = load_config(opts);
  std::vector<std::string> errors = plant::validate_plant_config(cfg);
  if (!errors.empty()) {
    for (const std::string& e : errors) std::cerr << "config error: " << e << "\n";
    return 1;
  }
  plant::PlantSpec spec = plant::plant_spec_from_config(cfg);
  plant::SafetyEnvelope env = plant::envelope_from_config(cfg);
  CommandIo io("collect", cfg, opts);

  Rng perturb_rng = Rng::derive(opts.seed, "collect-perturb");
  std::vector<plant::Trace> traces;
  nlohmann::json episodes = nlohmann::json::array();
  for (std::size_t i = 0; i < n_episodes; ++i) {
    plant::AttackVector v;
    long injection = spec.warmup_ticks;
    // every other episode shifts one or two PID/setpoint configurations at a
    // varied mid-run tick; strong shifts keep the recorded dynamics rich
    if (i % 2 == 1) {
      std::size_t n_slots = perturb_rng.uniform01() < 0.35 ? 2 : 1;
      for (std::size_t slot : perturb_rng.pick_distinct(plant::kConfigCount, n_slots)) {
        double mag = std::fabs(spec.nominal_configs[slot]);
        double sign = perturb_rng.uniform01() < 0.5 ? -1.0 : 1.0;
        v.deltas[plant::config_slot(slot)] = sign * perturb_rng.uniform(0.8, 2.0) * mag;
      }
      long span = (spec.max_ticks - spec.warmup_ticks) / 2;
      injection = spec.warmup_ticks +
                  static_cast<long>(perturb_rng.uniform_int(static_cast<std::uint64_t>(span)));
    }
    plant::Trace t = plant::run_episode(spec, env, v, injection,
                                        evolve::episode_seed(opts.seed, "collect", i));
    char name[32];
    std::snprintf(name, sizeof(name), "ep-%03zu.csv", i);
    t.episode_id = name;
    store::write_trace(t, io.path(name).string());
    io.add_file(name, "episode");
    io.add_file(std::string(name) + ".meta.json", "episode-metadata");
    traces.push_back(std::move(t));
  }

  Rng split_rng = Rng::derive(opts.seed, "dataset");
  predictor::EpisodeSplit split =
      predictor::split_episodes_stratified(predictor::perturbed_flags(traces), split_rng);
  std::vector<std::string> assignment(n_episodes, "train");
  for (std::size_t k : split.val) assignment[k] = "validation";
  for (std::size_t i = 0; i < n_episodes; ++i) {
    episodes.push_back({{"file", traces[i].episode_id},
                        {"outcome", plant::to_string(traces[i].outcome)},
                        {"perturbed", i % 2 == 1},
                        {"split", assignment[i]}});
  }
  nlohmann::json dj;
  dj["format_version"] = 1;
  dj["episodes"] = episodes;
  dj["train_count"] = split.train.size();
  dj["validation_count"] = split.val.size();
  std::ofstream dout(io.path("dataset.json"));
  dout << dj.dump(1) << "\n";
  dout.close();
  io.add_file("dataset.json", "dataset-manifest");
  io.finish();
  std::cout << "collect: " << split.train.size() << " train / " << split.val.size()
            << " validation episodes -> " << io.dir().string() << "\n";
  return 0;
}

// train-predictor: windows from a collect directory, minibatch MSE training,
// checkpoint with normalization statistics.
inline int run_train_predictor(const CommonOptions& opts, const std::string& episodes_dir) {
  Config cfg = load_config(opts);
  plant::PlantSpec spec = plant::plant_spec_from_config(cfg);
  CommandIo io("train-predictor", cfg, opts);

  std::vector<plant::Trace> traces;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(episodes_dir)) {
    if (entry.path().extension() == ".csv" &&
        entry.path().filename().string().rfind("ep-", 0) == 0)
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) traces.push_back(store::read_trace(f.string()));
  if (traces.empty()) {
    std::cerr << "train-predictor: no episodes found in " << episodes_dir << "\n";
    return 1;
  }

  predictor::WindowSpec wspec = window_spec_from(cfg);
  std::size_t stride =
      static_cast<std::size_t>(cfg.get_int("predictor.dataset_stride", 8));
  Rng data_rng = Rng::derive(opts.seed, "dataset");
  predictor::Dataset ds = predictor::build_dataset(traces, wspec, spec, data_rng, stride);

  std::vector<std::size_t> hidden{64, 32};
  if (cfg.has("predictor.hidden")) {
    hidden.clear();
    for (int h : cfg.get_ints("predictor.hidden")) hidden.push_back(static_cast<std::size_t>(h));
  }
  nn::TrainConfig tc = train_config_from(cfg, "predictor.train");
  Rng train_rng = Rng::derive(opts.seed, "predictor-train");
  predictor::PredictorModel model = predictor::train_predictor(ds, wspec, hidden, tc, train_rng);

  predictor::save_predictor(model, io.path("predictor.json").string());
  io.add_file("predictor.json", "checkpoint");
  io.extra()["train_windows"] = ds.train_x.size();
  io.extra()["val_windows"] = ds.val_x.size();
  io.extra()["skipped_episodes"] = ds.skipped_episodes;
  io.extra()["val_mse"] = predictor::dataset_loss(model.net, ds.val_x, ds.val_y);
  io.finish();
  std::cout << "train-predictor: " << ds.train_x.size() << " train windows, val mse "
            << io.extra()["val_mse"] << " -> " << io.dir().string() << "\n";
  return 0;
}

// fuzz: a pure Spear campaign without the defender; logs one JSON line per
// generated attack and persists the embedding archive.
inline int run_fuzz(const CommonOptions& opts, const std::string& predictor_path,
                    const std::string& golden_path, std::size_t n_attacks, bool use_ga) {
  Config cfg = load_config(opts);
  evolve::EvolutionConfig ecfg = evolution_config_from(cfg, opts.seed);
  evolve::EvolutionContext ctx =
      context_from_files(cfg, predictor_path, golden_path, ecfg.injection_tick);
  CommandIo io("fuzz", cfg, opts);

  spear::SearchConfig search = ecfg.search;
  search.use_ga = use_ga;
  spear::EmbeddingArchive archive;
  Rng rng = Rng::derive(opts.seed, "attack");
  std::ofstream log(io.path("attacks.jsonl"));
  std::size_t effective = 0;
  for (std::size_t i = 0; i < n_attacks; ++i) {
    spear::Candidate c = spear::generate_attack(ctx.golden_window, ctx.predictor, ctx.env,
                                                ctx.bounds, archive, search, rng);
    plant::Trace trace =
        plant::run_episode(ctx.plant_spec, ctx.env, c.vector, ecfg.injection_tick,
                           evolve::episode_seed(opts.seed, "fuzz-episode", i));
    char name[32];
    std::snprintf(name, sizeof(name), "attack-%03zu.csv", i);
    trace.episode_id = name;
    store::write_trace(trace, io.path(name).string());
    io.add_file(name, "episode");
    io.add_file(std::string(name) + ".meta.json", "episode-metadata");
    archive.append(c.embedding);
    if (trace.outcome == plant::Outcome::Effective) ++effective;
    nlohmann::json rec = {{"index", i},
                          {"vector", c.vector.deltas},
                          {"fitness",
                           {{"coverage", c.fitness.coverage},
                            {"safety", c.fitness.safety},
                            {"total", c.fitness.total}}},
                          {"outcome", plant::to_string(trace.outcome)},
                          {"episode", name}};
    log << rec.dump() << "\n";
  }
  log.close();
  archive.save_csv(io.path("archive.csv").string());
  io.add_file("attacks.jsonl", "campaign-log");
  io.add_file("archive.csv", "embedding-archive");
  io.extra()["effective"] = effective;
  io.extra()["attacks"] = n_attacks;
  io.finish();
  std::cout << "fuzz: " << effective << "/" << n_attacks << " effective -> " << io.dir().string()
            << "\n";
  return 0;
}

// evolve: the full co-evolution campaign.
inline int run_evolve(const CommonOptions& opts, const std::string& predictor_path,
                      const std::string& golden_path, std::optional<long> rounds_override,
                      std::optional<shield::Toggles> toggles_override) {
  Config cfg = load_config(opts);
  evolve::EvolutionConfig ecfg = evolution_config_from(cfg, opts.seed);
  if (rounds_override) ecfg.max_rounds = *rounds_override;
  if (toggles_override) ecfg.toggles = *toggles_override;
  evolve::EvolutionContext ctx =
      context_from_files(cfg, predictor_path, golden_path, ecfg.injection_tick);
  CommandIo io("evolve", cfg, opts);

  std::size_t v_eff = static_cast<std::size_t>(cfg.get_int("evolve.validation_effective", 4));
  std::size_t v_ineff = static_cast<std::size_t>(cfg.get_int("evolve.validation_ineffective", 4));
  evolve::EvalPool vpool = evolve::build_eval_pool(ctx, v_eff, v_ineff, ecfg.injection_tick,
                                                   ecfg.search,
                                                   evolve::episode_seed(opts.seed, "validation", 0));
  std::vector<plant::Trace> vtraces = vpool.effective;
  for (auto& t : vpool.ineffective) vtraces.push_back(std::move(t));
  std::vector<shield::Sample> validation =
      evolve::make_validation_samples(vtraces, ecfg.detector);

  evolve::EvolutionResult res = evolve::run_evolution(ctx, ecfg, validation);

  std::ofstream log(io.path("rounds.jsonl"));
  for (const auto& r : res.records) log << evolve::to_json(r).dump() << "\n";
  log.close();
  nn::save_checkpoint(res.detector.net, io.path("detector.json").string());
  res.archive.save_csv(io.path("archive.csv").string());
  io.add_file("rounds.jsonl", "round-records");
  io.add_file("detector.json", "detector-checkpoint");
  io.add_file("archive.csv", "embedding-archive");
  io.extra()["stopped"] = res.stopped;
  io.extra()["rounds_run"] = res.rounds_run;
  io.extra()["final_validation_accuracy"] =
      res.records.empty() ? 0.0 : res.records.back().validation_accuracy;
  io.finish();
  std::cout << "evolve: " << (res.stopped ? "stopped" : "round cap reached") << " after "
            << res.rounds_run << " rounds -> " << io.dir().string() << "\n";
  return 0;
}

// eval: metrics for a detector over a fresh unseen pool and, when a campaign
// directory is given, over the campaign's own (seen) attack traces replayed
// from its round records.
inline int run_eval(const CommonOptions& opts, const std::string& predictor_path,
                    const std::string& golden_path, const std::string& detector_path,
                    const std::string& campaign_dir, std::size_t n_eff, std::size_t n_ineff) {
  Config cfg = load_config(opts);
  evolve::EvolutionConfig ecfg = evolution_config_from(cfg, opts.seed);
  evolve::EvolutionContext ctx =
      context_from_files(cfg, predictor_path, golden_path, ecfg.injection_tick);
  CommandIo io("eval", cfg, opts);

  Rng det_rng = Rng::derive(opts.seed, "detector-init");
  shield::Detector det = shield::make_detector(ecfg.detector, ctx.env, det_rng);
  if (!detector_path.empty()) det.net = nn::load_checkpoint(detector_path);

  store::MetricsReport report;

  // unseen pool
  evolve::EvalPool pool = evolve::build_eval_pool(ctx, n_eff, n_ineff, ecfg.injection_tick,
                                                  ecfg.search,
                                                  evolve::episode_seed(opts.seed, "eval-unseen", 0));
  std::vector<bool> decisions;
  std::vector<plant::Outcome> outcomes;
  std::vector<std::uint8_t> preds, labels;
  auto judge_pool = [&](const std::vector<plant::Trace>& traces) {
    for (const plant::Trace& t : traces) {
      std::vector<shield::Verdict> v = shield::judge_trace(det, t);
      decisions.push_back(shield::end_to_end_decide(v, ecfg.rule));
      outcomes.push_back(t.outcome);
      for (const shield::Verdict& w : v) {
        shield::Sample s = shield::make_sample(t, w.start_row, det.spec);
        preds.push_back(w.abnormal ? 1 : 0);
        labels.push_back(s.label);
      }
    }
  };
  judge_pool(pool.effective);
  judge_pool(pool.ineffective);
  report.unseen = store::compute_end_to_end(decisions, outcomes);
  report.samples = store::compute_sample_metrics(preds, labels);

  // seen traces: replay the campaign's attack vectors
  if (!campaign_dir.empty()) {
    store::CampaignManifest cm = store::read_manifest((fs::path(campaign_dir) / "manifest.json").string());
    std::ifstream rin(fs::path(campaign_dir) / "rounds.jsonl");
    if (!rin) throw std::runtime_error("eval: cannot read rounds.jsonl in " + campaign_dir);
    std::vector<bool> seen_decisions;
    std::vector<plant::Outcome> seen_outcomes;
    std::string line;
    while (std::getline(rin, line)) {
      if (line.empty()) continue;
      nlohmann::json r = nlohmann::json::parse(line);
      plant::AttackVector v(r.at("attack_vector").get<std::vector<double>>());
      std::uint64_t round = r.at("round").get<std::uint64_t>();
      plant::Trace t = plant::run_episode(ctx.plant_spec, ctx.env, v, ecfg.injection_tick,
                                          evolve::episode_seed(cm.seed, "episode", round));
      if (t.outcome == plant::Outcome::ExcludedShort) continue;
      std::vector<shield::Verdict> verdicts = shield::judge_trace(det, t);
      seen_decisions.push_back(shield::end_to_end_decide(verdicts, ecfg.rule));
      seen_outcomes.push_back(t.outcome);
    }
    report.seen = store::compute_end_to_end(seen_decisions, seen_outcomes);
  }

  std::ofstream out(io.path("metrics.json"));
  out << store::to_json(report).dump(1) << "\n";
  out.close();
  io.add_file("metrics.json", "metrics");
  io.finish();
  std::cout << "eval: unseen detection " << report.unseen.detection_rate << ", false alarms "
            << report.unseen.false_alarm_rate << " -> " << io.dir().string() << "\n";
  return 0;
}

// ablate: the eight toggle configurations, five seeds each.
inline int run_ablate(const CommonOptions& opts, const std::string& predictor_path,
                      const std::string& golden_path) {
  Config cfg = load_config(opts);
  evolve::EvolutionConfig base = evolution_config_from(cfg, opts.seed);
  base.max_rounds = cfg.get_int("ablate.max_rounds", 60);
  base.stop.window = static_cast<std::size_t>(cfg.get_int("ablate.stop_window", 6));
  base.stop.detect_min = static_cast<std::size_t>(cfg.get_int("ablate.stop_detect_min", 5));
  base.stop.false_alarm_max =
      static_cast<std::size_t>(cfg.get_int("ablate.stop_false_alarm_max", 1));
  evolve::EvolutionContext ctx =
      context_from_files(cfg, predictor_path, golden_path, base.injection_tick);
  CommandIo io("ablate", cfg, opts);

  std::size_t n_seeds = static_cast<std::size_t>(cfg.get_int("ablate.seeds", 5));
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < n_seeds; ++i) seeds.push_back(opts.seed + i);

  std::size_t v_eff = static_cast<std::size_t>(cfg.get_int("evolve.validation_effective", 4));
  std::size_t v_ineff = static_cast<std::size_t>(cfg.get_int("evolve.validation_ineffective", 4));
  evolve::EvalPool vpool = evolve::build_eval_pool(ctx, v_eff, v_ineff, base.injection_tick,
                                                   base.search,
                                                   evolve::episode_seed(opts.seed, "validation", 0));
  std::vector<plant::Trace> vtraces = vpool.effective;
  for (auto& t : vpool.ineffective) vtraces.push_back(std::move(t));
  std::vector<shield::Sample> validation = evolve::make_validation_samples(vtraces, base.detector);

  std::vector<evolve::AblationSummary> summaries =
      evolve::ablation_campaign(ctx, base, seeds, validation, opts.jobs);

  std::ofstream sum(io.path("summary.csv"));
  sum << "config,median_traces_to_stop,mean_final_accuracy,all_converged\n";
  for (const auto& s : summaries) {
    double mean_final = s.mean_curve.empty() ? 0.0 : s.mean_curve.back();
    sum << s.toggles.name() << "," << store::format_double(s.median_traces_to_stop) << ","
        << store::format_double(mean_final) << "," << (s.all_converged ? 1 : 0) << "\n";
  }
  sum.close();
  std::ofstream curves(io.path("curves.csv"));
  curves << "config,round,mean_accuracy,std_accuracy\n";
  for (const auto& s : summaries)
    for (std::size_t i = 0; i < s.mean_curve.size(); ++i)
      curves << s.toggles.name() << "," << i << "," << store::format_double(s.mean_curve[i]) << ","
             << store::format_double(s.std_curve[i]) << "\n";
  curves.close();
  io.add_file("summary.csv", "ablation-summary");
  io.add_file("curves.csv", "accuracy-curves");
  io.finish();
  std::cout << "ablate: " << summaries.size() << " configurations -> " << io.dir().string()
            << "\n";
  return 0;
}

// sweep: detector width x stride grid.
inline int run_sweep(const CommonOptions& opts, const std::string& predictor_path,
                     const std::string& golden_path, const std::string& grid_override) {
  Config cfg = load_config(opts);
  evolve::EvolutionConfig base = evolution_config_from(cfg, opts.seed);
  base.max_rounds = cfg.get_int("sweep.max_rounds", 40);
  evolve::EvolutionContext ctx =
      context_from_files(cfg, predictor_path, golden_path, base.injection_tick);
  CommandIo io("sweep", cfg, opts);

  std::vector<std::size_t> widths, strides;
  auto parse_list = [](const std::string& s) {
    std::vector<std::size_t> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ','))
      if (!tok.empty()) out.push_back(static_cast<std::size_t>(std::stoul(tok)));
    return out;
  };
  if (!grid_override.empty()) {
    auto x = grid_override.find('x');
    if (x == std::string::npos)
      throw std::runtime_error("sweep: --grid expects 'w1,w2x s1,s2' format");
    widths = parse_list(grid_override.substr(0, x));
    strides = parse_list(grid_override.substr(x + 1));
  } else {
    for (int w : cfg.has("sweep.widths") ? cfg.get_ints("sweep.widths") : std::vector<int>{30, 50})
      widths.push_back(static_cast<std::size_t>(w));
    for (int s : cfg.has("sweep.strides") ? cfg.get_ints("sweep.strides") : std::vector<int>{5, 10})
      strides.push_back(static_cast<std::size_t>(s));
  }
  std::size_t min_span =
      static_cast<std::size_t>(cfg.get_int("sweep.min_attack_span", 300));

  std::size_t h_eff = static_cast<std::size_t>(cfg.get_int("sweep.holdout_effective", 4));
  std::size_t h_ineff = static_cast<std::size_t>(cfg.get_int("sweep.holdout_ineffective", 4));
  evolve::EvalPool pool = evolve::build_eval_pool(ctx, h_eff, h_ineff, base.injection_tick,
                                                  base.search,
                                                  evolve::episode_seed(opts.seed, "sweep-holdout", 0));
  std::vector<plant::Trace> holdout = pool.effective;
  for (auto& t : pool.ineffective) holdout.push_back(std::move(t));

  std::vector<evolve::SweepCell> cells =
      evolve::parameter_sweep(ctx, base, widths, strides, min_span, holdout, opts.jobs);

  std::ofstream out(io.path("sweep.csv"));
  out << "width,stride,feasible,converged,accuracy\n";
  for (const auto& c : cells)
    out << c.width << "," << c.stride << "," << (c.feasible ? 1 : 0) << ","
        << (c.converged ? 1 : 0) << "," << store::format_double(c.accuracy) << "\n";
  out.close();
  io.add_file("sweep.csv", "sweep-matrix");
  io.finish();
  std::cout << "sweep: " << cells.size() << " cells -> " << io.dir().string() << "\n";
  return 0;
}

inline std::optional<shield::Toggles> parse_toggles(const std::string& s) {
  if (s.empty()) return std::nullopt;
  shield::Toggles t{false, false, false};
  if (s != "none") {
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      if (tok == "cbl") t.cbl = true;
      else if (tok == "exe") t.exe = true;
      else if (tok == "cbp") t.cbp = true;
      else throw std::runtime_error("unknown toggle: " + tok + " (expected cbl,exe,cbp or none)");
    }
  }
  return t;
}

}  // namespace evodef::cli
