#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "evodef/nn.hpp"
#include "evodef/plant.hpp"
#include "evodef/predictor.hpp"
#include "evodef/rng.hpp"

namespace evodef::shield {

// Detector features per tick: actuators then sensors, configs excluded.
constexpr std::size_t kFeaturesPerTick = plant::kActuatorCount + plant::kSensorCount;

struct DetectorSpec {
  std::size_t window = 50;  // W_d: ticks per sample
  std::size_t stride = 5;   // ticks between consecutive windows
  std::vector<std::size_t> hidden = {64, 32};

  std::size_t flat_size() const { return window * kFeaturesPerTick; }
};

struct Toggles {
  bool cbl = true;  // class balance loss
  bool exe = true;  // exemplar replay
  bool cbp = true;  // continual backpropagation

  std::string name() const {
    if (!cbl && !exe && !cbp) return "baseline";
    std::string s;
    if (cbl) s += s.empty() ? "cbl" : "+cbl";
    if (exe) s += s.empty() ? "exe" : "+exe";
    if (cbp) s += s.empty() ? "cbp" : "+cbp";
    return s;
  }
};

// Binary MLP over sliding windows of actuator and sensor values. Inputs are
// scaled feature-wise: sensors by their safety envelope span, actuator
// commands used as-is (already in [0, 1]).
struct Detector {
  DetectorSpec spec;
  nn::MlpModel net;
  std::array<double, kFeaturesPerTick> offset{};
  std::array<double, kFeaturesPerTick> scale{};
};

inline Detector make_detector(const DetectorSpec& spec, const plant::SafetyEnvelope& env,
                              Rng& rng) {
  Detector det;
  det.spec = spec;
  std::vector<std::size_t> sizes{spec.flat_size()};
  for (std::size_t h : spec.hidden) sizes.push_back(h);
  sizes.push_back(1);
  std::vector<nn::Activation> acts(sizes.size() - 1, nn::Activation::ReLU);
  acts.back() = nn::Activation::Sigmoid;
  det.net = nn::make_mlp(sizes, acts, rng);
  for (std::size_t a = 0; a < plant::kActuatorCount; ++a) {
    det.offset[a] = 0.0;
    det.scale[a] = 1.0;
  }
  for (std::size_t s = 0; s < plant::kSensorCount; ++s) {
    det.offset[plant::kActuatorCount + s] = env.low[s];
    det.scale[plant::kActuatorCount + s] = env.high[s] - env.low[s];
  }
  return det;
}

struct Sample {
  std::vector<double> features;  // raw flattened window, W_d x (actuators + sensors)
  std::uint8_t label = 0;        // 1 = abnormal
};

inline Sample make_sample(const plant::Trace& trace, std::size_t start_row,
                          const DetectorSpec& spec) {
  if (start_row + spec.window > trace.rows.size())
    throw std::invalid_argument("make_sample: window out of range");
  Sample s;
  s.features.reserve(spec.flat_size());
  std::uint8_t label = 0;
  for (std::size_t r = start_row; r < start_row + spec.window; ++r) {
    const plant::TraceRow& row = trace.rows[r];
    for (double a : row.actuators) s.features.push_back(a);
    for (double v : row.sensors) s.features.push_back(v);
    // window label: abnormal iff any covered tick is abnormal
    label = label || trace.labels[r];
  }
  s.label = label;
  return s;
}

inline std::vector<double> normalize_features(const Detector& det,
                                              const std::vector<double>& raw) {
  std::vector<double> x(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    std::size_t f = i % kFeaturesPerTick;
    x[i] = (raw[i] - det.offset[f]) / det.scale[f];
  }
  return x;
}

inline double detector_score(const Detector& det, const Sample& sample) {
  return nn::forward(det.net, normalize_features(det, sample.features)).output()[0];
}

struct Verdict {
  std::size_t start_row = 0;
  std::size_t end_row = 0;  // inclusive
  double score = 0.0;
  bool abnormal = false;
};

// One verdict per window position (threshold 0.5 on the sigmoid output).
// Traces shorter than the window yield an empty verdict list.
inline std::vector<Verdict> judge_trace(const Detector& det, const plant::Trace& trace) {
  std::vector<Verdict> verdicts;
  if (trace.rows.size() < det.spec.window) return verdicts;
  for (std::size_t start = 0; start + det.spec.window <= trace.rows.size();
       start += det.spec.stride) {
    Sample s = make_sample(trace, start, det.spec);
    Verdict v;
    v.start_row = start;
    v.end_row = start + det.spec.window - 1;
    v.score = detector_score(det, s);
    v.abnormal = v.score >= 0.5;
    verdicts.push_back(v);
  }
  return verdicts;
}

// --- misclassification harvesting --------------------------------------------

enum class ErrorClass : std::uint8_t {
  PrematureAlarm,         // alarm on a window entirely before the injection
  MissedAttack,           // no alarm on an abnormal window of an effective attack
  IneffectiveFalseAlarm,  // alarm at/after an injection that never took effect
};

inline std::string to_string(ErrorClass c) {
  switch (c) {
    case ErrorClass::PrematureAlarm: return "premature_alarm";
    case ErrorClass::MissedAttack: return "missed_attack";
    case ErrorClass::IneffectiveFalseAlarm: return "ineffective_false_alarm";
  }
  return "?";
}

struct MisclassifiedBatch {
  std::vector<Sample> samples;         // with their true labels
  std::vector<ErrorClass> classes;     // per harvested sample
  std::array<bool, 3> trace_classes{};  // which error classes the trace exhibited

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
};

// Windows whose verdict disagrees with the window label, stored with their
// true labels and tagged by error class.
inline MisclassifiedBatch collect_misclassified(const std::vector<Verdict>& verdicts,
                                                const plant::Trace& trace,
                                                const DetectorSpec& spec) {
  MisclassifiedBatch batch;
  for (const Verdict& v : verdicts) {
    Sample s = make_sample(trace, v.start_row, spec);
    bool label_abnormal = s.label != 0;
    if (v.abnormal == label_abnormal) continue;
    ErrorClass cls;
    if (label_abnormal) {
      cls = ErrorClass::MissedAttack;
    } else {
      long end_tick = trace.rows[v.end_row].tick;
      cls = end_tick < trace.injection_tick ? ErrorClass::PrematureAlarm
                                            : ErrorClass::IneffectiveFalseAlarm;
    }
    batch.trace_classes[static_cast<std::size_t>(cls)] = true;
    batch.classes.push_back(cls);
    batch.samples.push_back(std::move(s));
  }
  return batch;
}

// --- exemplars ----------------------------------------------------------------

struct ExemplarSet {
  std::vector<Sample> samples;
  std::vector<long> rounds;  // provenance round per sample
  std::size_t capacity = 2000;

  std::size_t size() const { return samples.size(); }
};

// Feature-mean ranked downsampling: extract features of every candidate with
// the (updated) detector, sort ascending by L2 distance to the feature mean
// (stable, so ties keep insertion order), then keep every k-th entry of the
// sorted list with k = ceil(N / capacity).
inline ExemplarSet select_exemplars(const std::vector<Sample>& candidates,
                                    const std::vector<long>& rounds, const Detector& det,
                                    std::size_t capacity) {
  if (candidates.size() != rounds.size())
    throw std::invalid_argument("select_exemplars: provenance length mismatch");
  ExemplarSet out;
  out.capacity = capacity;
  const std::size_t n = candidates.size();
  if (n == 0 || capacity == 0) return out;

  std::vector<std::vector<double>> feats(n);
  for (std::size_t i = 0; i < n; ++i)
    feats[i] = nn::extract_features(det.net, normalize_features(det, candidates[i].features));
  std::vector<double> mean(feats[0].size(), 0.0);
  for (const auto& f : feats)
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += f[j];
  for (double& m : mean) m /= static_cast<double>(n);

  std::vector<double> dist(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < mean.size(); ++j) {
      double d = feats[i][j] - mean[j];
      acc += d * d;
    }
    dist[i] = std::sqrt(acc);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

  std::size_t k = (n + capacity - 1) / capacity;
  for (std::size_t i = 0; i < n && out.samples.size() < capacity; i += k) {
    out.samples.push_back(candidates[order[i]]);
    out.rounds.push_back(rounds[order[i]]);
  }
  return out;
}

// --- incremental training -----------------------------------------------------

struct TrainRoundResult {
  bool trained = false;
  bool diverged = false;
  std::size_t samples_used = 0;
  std::size_t epochs_run = 0;
};

inline double detector_accuracy(const Detector& det, const std::vector<Sample>& samples) {
  if (samples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const Sample& s : samples) {
    bool abnormal = detector_score(det, s) >= 0.5;
    if (abnormal == (s.label != 0)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

// One incremental round: minibatch SGD on the balance-penalized BCE loss
// over misclassified samples plus (when EXE is on) the exemplar set, with
// per-example continual backpropagation when CBP is on and early stopping on
// a held-out 10% slice. Divergence reverts the detector to its pre-round
// state bit-for-bit.
inline TrainRoundResult train_round(Detector& det, const std::vector<Sample>& misclassified,
                                    const ExemplarSet& exemplars, const nn::TrainConfig& cfg,
                                    const Toggles& toggles, Rng& rng) {
  TrainRoundResult result;
  std::vector<const Sample*> data;
  for (const Sample& s : misclassified) data.push_back(&s);
  if (toggles.exe)
    for (const Sample& s : exemplars.samples) data.push_back(&s);
  if (data.empty()) return result;

  result.trained = true;
  result.samples_used = data.size();
  const nn::MlpModel before = det.net;
  const double lambda = toggles.cbl ? cfg.lambda : 0.0;

  std::vector<std::vector<double>> xs(data.size());
  std::vector<std::uint8_t> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    xs[i] = normalize_features(det, data[i]->features);
    labels[i] = data[i]->label;
  }

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::size_t slice_n = data.size() >= 10 ? data.size() / 10 : (data.size() >= 2 ? 1 : 0);
  std::vector<std::size_t> slice(order.begin(), order.begin() + slice_n);
  std::vector<std::size_t> train(order.begin() + slice_n, order.end());

  auto slice_loss = [&]() {
    const std::vector<std::size_t>& eval = slice.empty() ? train : slice;
    std::vector<double> preds(eval.size());
    std::vector<std::uint8_t> ls(eval.size());
    for (std::size_t i = 0; i < eval.size(); ++i) {
      preds[i] = nn::forward(det.net, xs[eval[i]]).output()[0];
      ls[i] = labels[eval[i]];
    }
    try {
      return nn::balanced_bce_loss(preds, ls, lambda, preds.size()).loss;
    } catch (const std::invalid_argument&) {
      return std::numeric_limits<double>::quiet_NaN();  // non-finite scores
    }
  };

  nn::MlpModel best = det.net;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(train);
    for (std::size_t start = 0; start < train.size(); start += cfg.batch_size) {
      std::size_t bsz = std::min(cfg.batch_size, train.size() - start);
      std::vector<nn::ForwardPass> passes(bsz);
      std::vector<double> preds(bsz);
      std::vector<std::uint8_t> ls(bsz);
      for (std::size_t k = 0; k < bsz; ++k) {
        std::size_t idx = train[start + k];
        passes[k] = nn::forward(det.net, xs[idx]);
        preds[k] = passes[k].output()[0];
        ls[k] = labels[idx];
      }
      nn::LossResult loss;
      try {
        loss = nn::balanced_bce_loss(preds, ls, lambda, bsz);
      } catch (const std::invalid_argument&) {
        det.net = before;  // saturated sigmoid, treat as divergence
        result.diverged = true;
        return result;
      }
      if (!std::isfinite(loss.loss)) {
        det.net = before;
        result.diverged = true;
        return result;
      }
      nn::Gradients grads = nn::Gradients::zeros_like(det.net);
      for (std::size_t k = 0; k < bsz; ++k)
        grads.add(nn::backward(det.net, passes[k], {loss.grad[k]}));
      nn::sgd_step(det.net, grads, cfg.learning_rate);
      if (toggles.cbp)
        for (std::size_t k = 0; k < bsz; ++k) nn::cbp_step(det.net, passes[k], cfg, rng);
    }
    result.epochs_run = epoch + 1;
    double monitored = slice_loss();
    if (!std::isfinite(monitored) || !nn::all_finite(det.net)) {
      det.net = before;
      result.diverged = true;
      return result;
    }
    if (monitored < best_loss) {
      best_loss = monitored;
      best = det.net;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  det.net = std::move(best);
  return result;
}

// --- end-to-end decision --------------------------------------------------------

struct EndToEndRule {
  std::size_t segment_len = 25;         // ticks of verdict end positions per segment
  std::size_t consecutive_required = 8;  // C
};

// A trace counts as attacked when at least C consecutive segments are
// anomalous; a segment is anomalous when the majority of the window verdicts
// ending inside it are abnormal. Segments without verdicts are not anomalous.
inline bool end_to_end_decide(const std::vector<Verdict>& verdicts, const EndToEndRule& rule) {
  if (verdicts.empty()) return false;
  std::size_t max_seg = 0;
  for (const Verdict& v : verdicts) max_seg = std::max(max_seg, v.end_row / rule.segment_len);
  std::vector<std::size_t> total(max_seg + 1, 0), abnormal(max_seg + 1, 0);
  for (const Verdict& v : verdicts) {
    std::size_t seg = v.end_row / rule.segment_len;
    ++total[seg];
    if (v.abnormal) ++abnormal[seg];
  }
  std::size_t run = 0;
  for (std::size_t seg = 0; seg <= max_seg; ++seg) {
    bool anomalous = total[seg] > 0 && 2 * abnormal[seg] > total[seg];
    run = anomalous ? run + 1 : 0;
    if (run >= rule.consecutive_required) return true;
  }
  return false;
}

// --- predictor-residual baseline ------------------------------------------------

// Flags a position when the mean absolute error between the predictor's
// horizon forecast and the observed critical sensors exceeds the threshold.
// Produces a verdict stream comparable to judge_trace output.
inline std::vector<Verdict> residual_baseline(const predictor::PredictorModel& model,
                                              const plant::Trace& trace,
                                              const plant::PlantSpec& plant_spec,
                                              double threshold, std::size_t stride = 5) {
  std::vector<Verdict> verdicts;
  const std::size_t w = model.window.width;
  const std::size_t h = model.window.horizon;
  if (trace.rows.size() < w + h) return verdicts;
  const plant::AttackVector none = plant::AttackVector::zero();
  for (std::size_t end = w - 1; end + h < trace.rows.size(); end += stride) {
    predictor::Window win = predictor::window_from_trace(trace, plant_spec, model.window, end);
    std::vector<double> pred = predictor::predict_effect(model, win, none);
    const plant::TraceRow& obs = trace.rows[end + h];
    double err = 0.0;
    for (std::size_t s = 0; s < predictor::kCriticalSensors; ++s)
      err += std::fabs(pred[s] - obs.sensors[s]) / predictor::kCriticalSensors;
    Verdict v;
    v.start_row = end + h;
    v.end_row = end + h;
    v.score = err;
    v.abnormal = err > threshold;
    verdicts.push_back(v);
  }
  return verdicts;
}

// Threshold at a quantile of the residuals observed on a nominal trace.
inline double calibrate_residual_threshold(const predictor::PredictorModel& model,
                                           const plant::Trace& nominal,
                                           const plant::PlantSpec& plant_spec,
                                           double quantile = 0.995, std::size_t stride = 5) {
  std::vector<Verdict> v = residual_baseline(model, nominal, plant_spec,
                                             std::numeric_limits<double>::infinity(), stride);
  if (v.empty()) throw std::invalid_argument("calibrate_residual_threshold: trace too short");
  std::vector<double> residuals(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) residuals[i] = v[i].score;
  std::sort(residuals.begin(), residuals.end());
  std::size_t idx = static_cast<std::size_t>(quantile * (residuals.size() - 1));
  return residuals[idx];
}

}  // namespace evodef::shield
