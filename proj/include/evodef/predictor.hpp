#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "evodef/nn.hpp"
#include "evodef/plant.hpp"
#include "evodef/rng.hpp"

namespace evodef::predictor {

// Per-tick feature layout fed to the predictor: actuators, sensors, configs.
constexpr std::size_t kFeaturesPerTick =
    plant::kActuatorCount + plant::kSensorCount + plant::kConfigCount;
constexpr std::size_t kCriticalSensors = plant::kSensorCount;

struct WindowSpec {
  std::size_t width = 32;    // ticks of history consumed
  std::size_t horizon = 20;  // ticks ahead predicted

  std::size_t flat_size() const { return width * kFeaturesPerTick; }
};

// Min-max statistics per per-tick feature, fitted on training data only.
struct NormStats {
  std::vector<double> min, max;

  double normalize(std::size_t feature, double v) const {
    double range = max[feature] - min[feature];
    if (range <= 0.0) return 0.0;
    return (v - min[feature]) / range;
  }
  double denormalize(std::size_t feature, double v) const {
    double range = max[feature] - min[feature];
    if (range <= 0.0) return min[feature];
    return min[feature] + v * range;
  }
};

struct PredictorModel {
  nn::MlpModel net;  // input: flattened window (normalized), output: critical sensors (normalized)
  WindowSpec window;
  NormStats norm;
};

// A window in physical units: row-major width x kFeaturesPerTick.
using Window = std::vector<double>;

// Reconstructs the configuration vector in force at a given tick of a trace:
// nominal values, plus the initial drift's config slice from tick 0, plus the
// attack's config slice once it has landed.
inline std::array<double, plant::kConfigCount> configs_at(const plant::Trace& trace,
                                                          const plant::PlantSpec& spec,
                                                          long tick) {
  std::array<double, plant::kConfigCount> c = spec.nominal_configs;
  if (!trace.initial_drift.empty()) {
    for (std::size_t i = 0; i < plant::kConfigCount; ++i)
      c[i] += trace.initial_drift[plant::config_slot(i)];
  }
  if (trace.attack_applied() && tick >= trace.injection_tick && !trace.attack.empty()) {
    for (std::size_t i = 0; i < plant::kConfigCount; ++i)
      c[i] += trace.attack[plant::config_slot(i)];
  }
  return c;
}

// Window ending at row index end_row (inclusive), in physical units.
inline Window window_from_trace(const plant::Trace& trace, const plant::PlantSpec& spec,
                                const WindowSpec& wspec, std::size_t end_row) {
  if (end_row + 1 < wspec.width || end_row >= trace.rows.size())
    throw std::invalid_argument("window_from_trace: window out of range");
  Window w;
  w.reserve(wspec.flat_size());
  for (std::size_t r = end_row + 1 - wspec.width; r <= end_row; ++r) {
    const plant::TraceRow& row = trace.rows[r];
    for (double a : row.actuators) w.push_back(a);
    for (double s : row.sensors) w.push_back(s);
    auto c = configs_at(trace, spec, row.tick);
    for (double v : c) w.push_back(v);
  }
  return w;
}

// Writes an attack vector's deltas into every tick of a window copy: sensor
// and actuator slots as additive biases, config slots as shifted values.
inline Window perturb_window(const Window& window, const std::vector<double>& deltas,
                             const WindowSpec& wspec) {
  if (deltas.size() != plant::kAttackSlotCount)
    throw std::invalid_argument("perturb_window: bad attack vector length");
  if (window.size() != wspec.flat_size())
    throw std::invalid_argument("perturb_window: bad window size");
  Window out = window;
  for (std::size_t t = 0; t < wspec.width; ++t) {
    double* tickf = out.data() + t * kFeaturesPerTick;
    for (std::size_t a = 0; a < plant::kActuatorCount; ++a)
      tickf[a] += deltas[plant::actuator_slot(a)];
    for (std::size_t s = 0; s < plant::kSensorCount; ++s)
      tickf[plant::kActuatorCount + s] += deltas[plant::sensor_slot(s)];
    for (std::size_t c = 0; c < plant::kConfigCount; ++c)
      tickf[plant::kActuatorCount + plant::kSensorCount + c] += deltas[plant::config_slot(c)];
  }
  return out;
}

inline std::vector<double> normalize_window(const PredictorModel& model, const Window& window) {
  std::vector<double> x(window.size());
  for (std::size_t i = 0; i < window.size(); ++i)
    x[i] = model.norm.normalize(i % kFeaturesPerTick, window[i]);
  return x;
}

// --- dataset -----------------------------------------------------------------

struct Dataset {
  std::vector<std::vector<double>> train_x, val_x;    // normalized windows
  std::vector<std::vector<double>> train_y, val_y;    // normalized critical sensors
  NormStats norm;
  std::size_t skipped_episodes = 0;
  std::vector<std::string> train_episodes, val_episodes;
};

// Deterministic 80/20 episode split after a seeded shuffle; the validation
// side takes ceil(n/5) so even two episodes yield one of each.
struct EpisodeSplit {
  std::vector<std::size_t> train, val;
};

inline EpisodeSplit split_episodes(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t n_val = (n + 4) / 5;
  if (n_val >= n) n_val = n > 1 ? 1 : 0;
  EpisodeSplit split;
  split.train.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  split.val.assign(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  return split;
}

// Same 80/20 rule, stratified so perturbed and nominal episodes spread
// proportionally across both sides (largest-remainder allocation, perturbed
// group first on ties). Keeps a pure-nominal validation side from occurring
// by shuffle luck.
inline EpisodeSplit split_episodes_stratified(const std::vector<bool>& perturbed, Rng& rng) {
  const std::size_t n = perturbed.size();
  std::array<std::vector<std::size_t>, 2> groups;  // 0: perturbed, 1: nominal
  for (std::size_t i = 0; i < n; ++i) groups[perturbed[i] ? 0 : 1].push_back(i);
  for (auto& g : groups) rng.shuffle(g);

  std::size_t n_val = (n + 4) / 5;
  if (n_val >= n) n_val = n > 1 ? 1 : 0;
  std::array<std::size_t, 2> take{};
  std::array<double, 2> frac{};
  std::size_t assigned = 0;
  for (int g = 0; g < 2; ++g) {
    double exact = n ? static_cast<double>(n_val) * groups[g].size() / n : 0.0;
    take[g] = static_cast<std::size_t>(exact);
    frac[g] = exact - static_cast<double>(take[g]);
    assigned += take[g];
  }
  while (assigned < n_val) {
    int g = (frac[0] >= frac[1] && take[0] < groups[0].size()) ? 0 : 1;
    if (take[g] >= groups[g].size()) g = 1 - g;
    ++take[g];
    frac[g] = -1.0;
    ++assigned;
  }
  EpisodeSplit split;
  for (int g = 0; g < 2; ++g) {
    for (std::size_t i = 0; i < groups[g].size(); ++i)
      (i < take[g] ? split.val : split.train).push_back(groups[g][i]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  return split;
}

// An episode counts as perturbed when it carries a nonzero attack or drift.
inline std::vector<bool> perturbed_flags(const std::vector<plant::Trace>& traces) {
  std::vector<bool> flags(traces.size(), false);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    for (double d : traces[i].attack) flags[i] = flags[i] || d != 0.0;
    for (double d : traces[i].initial_drift) flags[i] = flags[i] || d != 0.0;
  }
  return flags;
}

// Sliding windows paired with horizon targets, split by episode;
// normalization is fitted on training episodes only. Episodes shorter than
// width + horizon are skipped and counted.
inline Dataset build_dataset(const std::vector<plant::Trace>& traces, const WindowSpec& wspec,
                             const plant::PlantSpec& spec, Rng& rng,
                             std::size_t window_stride = 1) {
  if (window_stride == 0) throw std::invalid_argument("build_dataset: window_stride must be >= 1");
  Dataset ds;
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (traces[i].rows.size() < wspec.width + wspec.horizon)
      ++ds.skipped_episodes;
    else
      usable.push_back(i);
  }
  if (usable.empty()) throw std::invalid_argument("build_dataset: no usable episodes");

  std::vector<bool> flags(usable.size(), false);
  for (std::size_t k = 0; k < usable.size(); ++k) {
    const plant::Trace& t = traces[usable[k]];
    for (double d : t.attack) flags[k] = flags[k] || d != 0.0;
    for (double d : t.initial_drift) flags[k] = flags[k] || d != 0.0;
  }
  EpisodeSplit split = split_episodes_stratified(flags, rng);
  std::vector<std::size_t> train_eps, val_eps;
  for (std::size_t k : split.train) train_eps.push_back(usable[k]);
  for (std::size_t k : split.val) val_eps.push_back(usable[k]);

  ds.norm.min.assign(kFeaturesPerTick, std::numeric_limits<double>::infinity());
  ds.norm.max.assign(kFeaturesPerTick, -std::numeric_limits<double>::infinity());
  for (std::size_t ti : train_eps) {
    const plant::Trace& tr = traces[ti];
    for (const plant::TraceRow& row : tr.rows) {
      std::size_t f = 0;
      auto update = [&](double v) {
        ds.norm.min[f] = std::min(ds.norm.min[f], v);
        ds.norm.max[f] = std::max(ds.norm.max[f], v);
        ++f;
      };
      for (double a : row.actuators) update(a);
      for (double s : row.sensors) update(s);
      for (double c : configs_at(tr, spec, row.tick)) update(c);
    }
  }

  // The regression target is the normalized change of each critical sensor
  // over the horizon. Predicting the trend rather than the absolute reading
  // keeps the no-change forecast at zero output, which plain SGD refines
  // quickly.
  auto emit = [&](const plant::Trace& tr, std::vector<std::vector<double>>& xs,
                  std::vector<std::vector<double>>& ys) {
    for (std::size_t end = wspec.width - 1; end + wspec.horizon < tr.rows.size();
         end += window_stride) {
      Window w = window_from_trace(tr, spec, wspec, end);
      std::vector<double> x(w.size());
      for (std::size_t i = 0; i < w.size(); ++i)
        x[i] = ds.norm.normalize(i % kFeaturesPerTick, w[i]);
      const plant::TraceRow& target_row = tr.rows[end + wspec.horizon];
      const plant::TraceRow& last_row = tr.rows[end];
      std::vector<double> y(kCriticalSensors);
      for (std::size_t s = 0; s < kCriticalSensors; ++s)
        y[s] = ds.norm.normalize(plant::kActuatorCount + s, target_row.sensors[s]) -
               ds.norm.normalize(plant::kActuatorCount + s, last_row.sensors[s]);
      xs.push_back(std::move(x));
      ys.push_back(std::move(y));
    }
  };
  for (std::size_t ti : train_eps) {
    emit(traces[ti], ds.train_x, ds.train_y);
    ds.train_episodes.push_back(traces[ti].episode_id);
  }
  for (std::size_t ti : val_eps) {
    emit(traces[ti], ds.val_x, ds.val_y);
    ds.val_episodes.push_back(traces[ti].episode_id);
  }
  return ds;
}

// --- training ----------------------------------------------------------------

inline double dataset_loss(const nn::MlpModel& net, const std::vector<std::vector<double>>& xs,
                           const std::vector<std::vector<double>>& ys) {
  if (xs.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    nn::ForwardPass pass = nn::forward(net, xs[i]);
    total += nn::mse_loss(pass.output(), ys[i]).loss;
  }
  return total / static_cast<double>(xs.size());
}

// Minibatch SGD on mean squared error with early stopping on validation
// loss; returns the best checkpoint seen. Throws on divergence.
inline PredictorModel train_predictor(const Dataset& ds, const WindowSpec& wspec,
                                      const std::vector<std::size_t>& hidden,
                                      const nn::TrainConfig& cfg, Rng& rng) {
  if (ds.train_x.empty()) throw std::invalid_argument("train_predictor: empty dataset");
  std::vector<std::size_t> sizes;
  sizes.push_back(wspec.flat_size());
  for (std::size_t h : hidden) sizes.push_back(h);
  sizes.push_back(kCriticalSensors);
  std::vector<nn::Activation> acts(sizes.size() - 1, nn::Activation::ReLU);
  acts.back() = nn::Activation::Identity;
  nn::MlpModel net = nn::make_mlp(sizes, acts, rng);

  const bool has_val = !ds.val_x.empty();
  nn::MlpModel best = net;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  std::vector<std::size_t> order(ds.train_x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t bsz = std::min(cfg.batch_size, order.size() - start);
      nn::Gradients grads = nn::Gradients::zeros_like(net);
      double batch_loss = 0.0;
      for (std::size_t k = 0; k < bsz; ++k) {
        const std::size_t idx = order[start + k];
        nn::ForwardPass pass = nn::forward(net, ds.train_x[idx]);
        nn::LossResult loss = nn::mse_loss(pass.output(), ds.train_y[idx], bsz);
        batch_loss += loss.loss;
        grads.add(nn::backward(net, pass, loss.grad));
      }
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("train_predictor: training diverged (non-finite loss)");
      nn::sgd_step(net, grads, cfg.learning_rate);
    }
    double monitored = has_val ? dataset_loss(net, ds.val_x, ds.val_y)
                               : dataset_loss(net, ds.train_x, ds.train_y);
    if (!std::isfinite(monitored))
      throw std::runtime_error("train_predictor: validation diverged (non-finite loss)");
    if (monitored < best_loss) {
      best_loss = monitored;
      best = net;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  PredictorModel model;
  model.net = std::move(best);
  model.window = wspec;
  model.norm = ds.norm;
  return model;
}

// --- inference ---------------------------------------------------------------

// Forecast of the critical sensors at the horizon, in physical units, after
// applying the attack vector's deltas to the window: the last perturbed
// readings plus the network's predicted trend. Pure function.
inline std::vector<double> predict_effect(const PredictorModel& model, const Window& window,
                                          const plant::AttackVector& v) {
  Window perturbed = perturb_window(window, v.deltas, model.window);
  std::vector<double> x = normalize_window(model, perturbed);
  nn::ForwardPass pass = nn::forward(model.net, x);
  const double* last_tick = perturbed.data() + (model.window.width - 1) * kFeaturesPerTick;
  std::vector<double> out(kCriticalSensors);
  for (std::size_t s = 0; s < kCriticalSensors; ++s) {
    std::size_t feature = plant::kActuatorCount + s;
    double range = model.norm.max[feature] - model.norm.min[feature];
    out[s] = last_tick[feature] + pass.output()[s] * (range > 0.0 ? range : 1.0);
  }
  return out;
}

// Penultimate-layer embedding of the perturbed window.
inline std::vector<double> embed(const PredictorModel& model, const Window& window,
                                 const plant::AttackVector& v) {
  Window perturbed = perturb_window(window, v.deltas, model.window);
  return nn::extract_features(model.net, normalize_window(model, perturbed));
}

// --- persistence -------------------------------------------------------------

inline nlohmann::json to_json(const PredictorModel& model) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["net"] = nn::to_json(model.net);
  j["window"] = {{"width", model.window.width}, {"horizon", model.window.horizon}};
  j["norm"] = {{"min", model.norm.min}, {"max", model.norm.max}};
  return j;
}

inline PredictorModel predictor_from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != 1)
    throw std::runtime_error("predictor checkpoint: unsupported format version");
  PredictorModel m;
  m.net = nn::model_from_json(j.at("net"));
  m.window.width = j.at("window").at("width").get<std::size_t>();
  m.window.horizon = j.at("window").at("horizon").get<std::size_t>();
  m.norm.min = j.at("norm").at("min").get<std::vector<double>>();
  m.norm.max = j.at("norm").at("max").get<std::vector<double>>();
  if (m.norm.min.size() != kFeaturesPerTick || m.norm.max.size() != kFeaturesPerTick)
    throw std::runtime_error("predictor checkpoint: bad normalization shape");
  return m;
}

inline void save_predictor(const PredictorModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write predictor checkpoint: " + path);
  out << to_json(model).dump(1) << "\n";
}

inline PredictorModel load_predictor(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read predictor checkpoint: " + path);
  nlohmann::json j;
  in >> j;
  return predictor_from_json(j);
}

}  // namespace evodef::predictor
