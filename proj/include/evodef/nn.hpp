#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "evodef/rng.hpp"

namespace evodef::nn {

enum class Activation { ReLU, Identity, Sigmoid };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Identity: return "identity";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "identity") return Activation::Identity;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw std::runtime_error("unknown activation: " + s);
}

struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // row-major, out x in
  std::vector<double> biases;   // out
  Activation activation = Activation::ReLU;

  double& w(std::size_t row, std::size_t col) { return weights[row * in + col]; }
  double w(std::size_t row, std::size_t col) const { return weights[row * in + col]; }
};

// Dense network with the bookkeeping continual backpropagation needs:
// per-neuron utilities on every hidden layer and a per-layer replacement
// counter.
struct MlpModel {
  std::vector<Layer> layers;
  std::vector<std::vector<double>> utilities;  // one vector per hidden layer
  std::vector<double> replace_counters;        // one per hidden layer
  std::uint64_t seed = 0;

  std::size_t input_size() const { return layers.front().in; }
  std::size_t output_size() const { return layers.back().out; }
  std::size_t hidden_layer_count() const { return layers.size() - 1; }

  bool operator==(const MlpModel& other) const {
    if (layers.size() != other.layers.size()) return false;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].in != other.layers[l].in || layers[l].out != other.layers[l].out ||
          layers[l].activation != other.layers[l].activation ||
          layers[l].weights != other.layers[l].weights ||
          layers[l].biases != other.layers[l].biases)
        return false;
    }
    return utilities == other.utilities && replace_counters == other.replace_counters &&
           seed == other.seed;
  }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  double lambda = 1.0;  // balance-penalty factor
  double eta = 0.99;    // utility decay rate
  double rho = 1e-3;    // neuron replacement rate
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
};

inline double fan_in_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

// Fresh model: weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], zero
// biases, zero utilities and counters.
inline MlpModel make_mlp(const std::vector<std::size_t>& sizes,
                         const std::vector<Activation>& activations, Rng& rng,
                         std::uint64_t seed_tag = 0) {
  if (sizes.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output sizes");
  if (activations.size() != sizes.size() - 1)
    throw std::invalid_argument("make_mlp: one activation per layer required");
  MlpModel m;
  m.seed = seed_tag;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Layer layer;
    layer.in = sizes[l];
    layer.out = sizes[l + 1];
    layer.activation = activations[l];
    layer.weights.resize(layer.in * layer.out);
    layer.biases.assign(layer.out, 0.0);
    double bound = fan_in_bound(layer.in);
    for (double& w : layer.weights) w = rng.uniform(-bound, bound);
    m.layers.push_back(std::move(layer));
  }
  for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
    m.utilities.emplace_back(m.layers[l].out, 0.0);
    m.replace_counters.push_back(0.0);
  }
  return m;
}

// Post-activation values for every layer: activations[0] is the input,
// activations.back() the network output.
struct ForwardPass {
  std::vector<std::vector<double>> activations;
  const std::vector<double>& output() const { return activations.back(); }
  const std::vector<double>& penultimate() const { return activations[activations.size() - 2]; }
};

inline ForwardPass forward(const MlpModel& model, const std::vector<double>& input) {
  if (input.size() != model.input_size())
    throw std::invalid_argument("forward: input length " + std::to_string(input.size()) +
                                " does not match first layer " +
                                std::to_string(model.input_size()));
  ForwardPass pass;
  pass.activations.reserve(model.layers.size() + 1);
  pass.activations.push_back(input);
  for (const Layer& layer : model.layers) {
    const std::vector<double>& a = pass.activations.back();
    std::vector<double> z(layer.out);
    for (std::size_t r = 0; r < layer.out; ++r) {
      double acc = layer.biases[r];
      const double* wrow = layer.weights.data() + r * layer.in;
      for (std::size_t c = 0; c < layer.in; ++c) acc += wrow[c] * a[c];
      z[r] = acc;
    }
    switch (layer.activation) {
      case Activation::ReLU:
        for (double& v : z) v = v > 0.0 ? v : 0.0;
        break;
      case Activation::Sigmoid:
        for (double& v : z) v = 1.0 / (1.0 + std::exp(-v));
        break;
      case Activation::Identity:
        break;
    }
    pass.activations.push_back(std::move(z));
  }
  return pass;
}

// Penultimate-layer activation vector; the feature map used for exemplar
// selection and the coverage archive.
inline std::vector<double> extract_features(const MlpModel& model, const std::vector<double>& input) {
  return forward(model, input).penultimate();
}

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d prediction
};

// Binary cross-entropy with a class-balance penalty:
//   L = L_BCE + (lambda / B) * |C_normal - C_abnormal|
// where C_* count correct predictions per class at threshold 0.5. The
// penalty is piecewise constant in the predictions, so it contributes no
// gradient; with lambda = 0 the result is bit-identical to plain BCE.
// Predictions must be probabilities; a saturated sigmoid can round to an
// exact 0 or 1 in doubles, so boundary values are clamped rather than
// rejected.
inline LossResult balanced_bce_loss(const std::vector<double>& predictions,
                                    const std::vector<std::uint8_t>& labels, double lambda,
                                    std::size_t batch_size) {
  if (predictions.size() != labels.size() || predictions.size() != batch_size)
    throw std::invalid_argument("balanced_bce_loss: predictions, labels, and B must agree");
  constexpr double kEps = 1e-12;
  LossResult res;
  res.grad.resize(predictions.size());
  double bce = 0.0;
  std::size_t correct_normal = 0, correct_abnormal = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    double p = predictions[i];
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("balanced_bce_loss: prediction outside (0,1)");
    double pc = std::clamp(p, kEps, 1.0 - kEps);
    double y = labels[i] ? 1.0 : 0.0;
    bce += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
    res.grad[i] = (pc - y) / (pc * (1.0 - pc)) / static_cast<double>(batch_size);
    bool predicted_abnormal = p >= 0.5;
    if (labels[i] && predicted_abnormal) ++correct_abnormal;
    if (!labels[i] && !predicted_abnormal) ++correct_normal;
  }
  bce /= static_cast<double>(batch_size);
  double penalty = lambda / static_cast<double>(batch_size) *
                   std::fabs(static_cast<double>(correct_normal) - static_cast<double>(correct_abnormal));
  res.loss = bce + penalty;
  return res;
}

// Mean squared error over the output vector, scaled by the batch size so
// per-sample gradients can be summed across a minibatch.
inline LossResult mse_loss(const std::vector<double>& prediction, const std::vector<double>& target,
                           std::size_t batch_size = 1) {
  if (prediction.size() != target.size())
    throw std::invalid_argument("mse_loss: prediction/target length mismatch");
  LossResult res;
  res.grad.resize(prediction.size());
  double denom = static_cast<double>(prediction.size()) * static_cast<double>(batch_size);
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    double d = prediction[i] - target[i];
    res.loss += d * d / denom;
    res.grad[i] = 2.0 * d / denom;
  }
  return res;
}

struct Gradients {
  std::vector<std::vector<double>> dw;  // matches layer weight shapes
  std::vector<std::vector<double>> db;

  static Gradients zeros_like(const MlpModel& model) {
    Gradients g;
    for (const Layer& layer : model.layers) {
      g.dw.emplace_back(layer.weights.size(), 0.0);
      g.db.emplace_back(layer.out, 0.0);
    }
    return g;
  }

  void add(const Gradients& other) {
    for (std::size_t l = 0; l < dw.size(); ++l) {
      for (std::size_t i = 0; i < dw[l].size(); ++i) dw[l][i] += other.dw[l][i];
      for (std::size_t i = 0; i < db[l].size(); ++i) db[l][i] += other.db[l][i];
    }
  }
};

inline double activation_derivative(Activation act, double post) {
  switch (act) {
    case Activation::ReLU: return post > 0.0 ? 1.0 : 0.0;
    case Activation::Identity: return 1.0;
    case Activation::Sigmoid: return post * (1.0 - post);
  }
  return 0.0;
}

// Standard backpropagation. loss_gradient is d loss / d output, taken with
// respect to the post-activation network output.
inline Gradients backward(const MlpModel& model, const ForwardPass& pass,
                          const std::vector<double>& loss_gradient) {
  if (loss_gradient.size() != model.output_size())
    throw std::invalid_argument("backward: loss gradient length mismatch");
  Gradients grads = Gradients::zeros_like(model);
  std::vector<double> delta(loss_gradient.size());
  const std::vector<double>& out = pass.output();
  for (std::size_t i = 0; i < delta.size(); ++i)
    delta[i] = loss_gradient[i] * activation_derivative(model.layers.back().activation, out[i]);

  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const Layer& layer = model.layers[l];
    const std::vector<double>& a_in = pass.activations[l];
    for (std::size_t r = 0; r < layer.out; ++r) {
      grads.db[l][r] = delta[r];
      double* dwrow = grads.dw[l].data() + r * layer.in;
      for (std::size_t c = 0; c < layer.in; ++c) dwrow[c] = delta[r] * a_in[c];
    }
    if (l == 0) break;
    std::vector<double> prev(layer.in, 0.0);
    for (std::size_t r = 0; r < layer.out; ++r) {
      const double* wrow = layer.weights.data() + r * layer.in;
      for (std::size_t c = 0; c < layer.in; ++c) prev[c] += wrow[c] * delta[r];
    }
    const Layer& below = model.layers[l - 1];
    for (std::size_t c = 0; c < below.out; ++c)
      prev[c] *= activation_derivative(below.activation, a_in[c]);
    delta = std::move(prev);
  }
  return grads;
}

inline void sgd_step(MlpModel& model, const Gradients& grads, double learning_rate) {
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    Layer& layer = model.layers[l];
    for (std::size_t i = 0; i < layer.weights.size(); ++i)
      layer.weights[i] -= learning_rate * grads.dw[l][i];
    for (std::size_t i = 0; i < layer.biases.size(); ++i)
      layer.biases[i] -= learning_rate * grads.db[l][i];
  }
}

// One continual-backpropagation bookkeeping step, applied per training
// example after its forward pass:
//   1. decay-average each hidden utility:  u = eta*u + (1-eta)*|h|
//   2. per layer, add n_inactive * rho to the replacement counter
//      (inactive = ReLU output exactly zero)
//   3. while the counter exceeds 1, replace the lowest-utility neuron:
//      fresh input weights, zero bias, zero output weights, zero utility.
// Ties on utility go to the smallest neuron index.
inline void cbp_step(MlpModel& model, const ForwardPass& pass, const TrainConfig& cfg, Rng& rng) {
  for (std::size_t j = 0; j + 1 < model.layers.size(); ++j) {
    const std::vector<double>& h = pass.activations[j + 1];
    std::vector<double>& util = model.utilities[j];
    std::size_t inactive = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      util[i] = cfg.eta * util[i] + (1.0 - cfg.eta) * std::fabs(h[i]);
      if (model.layers[j].activation == Activation::ReLU && h[i] == 0.0) ++inactive;
    }
    model.replace_counters[j] += static_cast<double>(inactive) * cfg.rho;
    while (model.replace_counters[j] > 1.0) {
      std::size_t lowest = 0;
      for (std::size_t i = 1; i < util.size(); ++i)
        if (util[i] < util[lowest]) lowest = i;
      Layer& layer = model.layers[j];
      double bound = fan_in_bound(layer.in);
      for (std::size_t c = 0; c < layer.in; ++c) layer.w(lowest, c) = rng.uniform(-bound, bound);
      layer.biases[lowest] = 0.0;
      Layer& above = model.layers[j + 1];
      for (std::size_t r = 0; r < above.out; ++r) above.w(r, lowest) = 0.0;
      util[lowest] = 0.0;
      model.replace_counters[j] -= 1.0;
    }
  }
}

inline bool all_finite(const MlpModel& model) {
  for (const Layer& layer : model.layers) {
    for (double w : layer.weights)
      if (!std::isfinite(w)) return false;
    for (double b : layer.biases)
      if (!std::isfinite(b)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Checkpoint serialization. JSON keeps checkpoints inspectable; nlohmann
// prints doubles shortest-round-trip, so save/load is bit-exact for finite
// values (and weights are finite by invariant).

inline nlohmann::json to_json(const MlpModel& model) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["seed"] = model.seed;
  j["layers"] = nlohmann::json::array();
  for (const Layer& layer : model.layers) {
    nlohmann::json lj;
    lj["in"] = layer.in;
    lj["out"] = layer.out;
    lj["activation"] = to_string(layer.activation);
    lj["weights"] = layer.weights;
    lj["biases"] = layer.biases;
    j["layers"].push_back(std::move(lj));
  }
  j["utilities"] = model.utilities;
  j["replace_counters"] = model.replace_counters;
  return j;
}

inline MlpModel model_from_json(const nlohmann::json& j) {
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
    throw std::runtime_error("checkpoint: unsupported format version");
  MlpModel m;
  m.seed = j["seed"].get<std::uint64_t>();
  for (const auto& lj : j["layers"]) {
    Layer layer;
    layer.in = lj["in"].get<std::size_t>();
    layer.out = lj["out"].get<std::size_t>();
    layer.activation = activation_from_string(lj["activation"].get<std::string>());
    layer.weights = lj["weights"].get<std::vector<double>>();
    layer.biases = lj["biases"].get<std::vector<double>>();
    if (layer.weights.size() != layer.in * layer.out || layer.biases.size() != layer.out)
      throw std::runtime_error("checkpoint: layer shape mismatch");
    m.layers.push_back(std::move(layer));
  }
  m.utilities = j["utilities"].get<std::vector<std::vector<double>>>();
  m.replace_counters = j["replace_counters"].get<std::vector<double>>();
  if (m.layers.empty()) throw std::runtime_error("checkpoint: no layers");
  if (m.utilities.size() != m.layers.size() - 1 || m.replace_counters.size() != m.layers.size() - 1)
    throw std::runtime_error("checkpoint: utility shape mismatch");
  if (!all_finite(m)) throw std::runtime_error("checkpoint: non-finite weights");
  return m;
}

inline void save_checkpoint(const MlpModel& model, const std::string& path) {
  if (!all_finite(model)) throw std::runtime_error("save_checkpoint: non-finite weights");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << to_json(model).dump(1) << "\n";
}

inline MlpModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  nlohmann::json j;
  in >> j;
  return model_from_json(j);
}

}  // namespace evodef::nn
