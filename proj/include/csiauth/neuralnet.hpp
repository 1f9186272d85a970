// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "csiauth/format.hpp"
#include "csiauth/rng.hpp"

namespace csiauth::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ActivationKind { leaky_relu, tanh, sigmoid, linear };

struct Activation {
  ActivationKind kind = ActivationKind::linear;
  double alpha = 0.0;  // leaky_relu negative slope

  static Activation leaky_relu(double alpha) { return {ActivationKind::leaky_relu, alpha}; }
  static Activation tanh() { return {ActivationKind::tanh, 0.0}; }
  static Activation sigmoid() { return {ActivationKind::sigmoid, 0.0}; }
  static Activation linear() { return {ActivationKind::linear, 0.0}; }

  bool operator==(const Activation&) const = default;
};

inline std::string to_string(ActivationKind k) {
  switch (k) {
    case ActivationKind::leaky_relu: return "leaky_relu";
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::sigmoid: return "sigmoid";
    case ActivationKind::linear: return "linear";
  }
  return "?";
}

inline ActivationKind parse_activation(std::string_view s) {
  for (auto k : {ActivationKind::leaky_relu, ActivationKind::tanh, ActivationKind::sigmoid, ActivationKind::linear}) {
    if (to_string(k) == s) return k;
  }
  throw SchemaError("unknown activation '" + std::string(s) + "'");
}

inline double activate(const Activation& a, double x) {
  switch (a.kind) {
    case ActivationKind::leaky_relu: return x >= 0.0 ? x : a.alpha * x;
    case ActivationKind::tanh: return std::tanh(x);
    case ActivationKind::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case ActivationKind::linear: return x;
  }
  return x;
}

/// d activation / d pre-activation, from the pre-activation x and output y.
inline double activate_grad(const Activation& a, double x, double y) {
  switch (a.kind) {
    case ActivationKind::leaky_relu: return x >= 0.0 ? 1.0 : a.alpha;
    case ActivationKind::tanh: return 1.0 - y * y;
    case ActivationKind::sigmoid: return y * (1.0 - y);
    case ActivationKind::linear: return 1.0;
  }
  return 1.0;
}

/// y = act(W x + b), W is out x in.
struct DenseLayer {
  Matrix weights;
  Vector biases;
  Activation activation;

  DenseLayer() = default;
  DenseLayer(int in_dim, int out_dim, Activation act)
      : weights(Matrix::Zero(out_dim, in_dim)), biases(Vector::Zero(out_dim)), activation(act) {
    if (in_dim < 1 || out_dim < 1) throw std::invalid_argument("DenseLayer: dimensions must be positive");
  }

  int in_dim() const { return static_cast<int>(weights.cols()); }
  int out_dim() const { return static_cast<int>(weights.rows()); }
  std::size_t param_count() const { return static_cast<std::size_t>(weights.size() + biases.size()); }
};

/// Dense feed-forward network. dropout[i] is the rate applied to layer i's
/// output in training mode (0 disables it).
class Mlp {
 public:
  Mlp() = default;

  Mlp(std::vector<DenseLayer> layers, std::vector<double> dropout = {})
      : layers_(std::move(layers)), dropout_(std::move(dropout)) {
    if (dropout_.empty()) dropout_.assign(layers_.size(), 0.0);
    validate();
  }

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& mutable_layers() noexcept {
    touch();
    return layers_;
  }
  const std::vector<double>& dropout() const noexcept { return dropout_; }

  int input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
  int output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.param_count();
    return n;
  }

  /// Bumped whenever parameters may have changed; tapes from older
  /// generations are rejected by backward().
  std::uint64_t generation() const noexcept { return generation_; }
  void touch() noexcept { ++generation_; }

  void validate() const {
    if (layers_.empty()) throw std::invalid_argument("Mlp: no layers");
    if (dropout_.size() != layers_.size()) throw std::invalid_argument("Mlp: dropout map size mismatch");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (i > 0 && layers_[i].in_dim() != layers_[i - 1].out_dim()) {
        throw std::invalid_argument("Mlp: layer " + std::to_string(i) + " input does not chain");
      }
      if (!(dropout_[i] >= 0.0 && dropout_[i] < 1.0)) throw std::invalid_argument("Mlp: dropout rate outside [0, 1)");
      if (layers_[i].biases.size() != layers_[i].weights.rows()) throw std::invalid_argument("Mlp: bias size mismatch");
      if (!layers_[i].weights.allFinite() || !layers_[i].biases.allFinite()) {
        throw std::invalid_argument("Mlp: non-finite parameters");
      }
    }
  }

  /// Flat parameter copy (weights row-major, then biases, layer by layer).
  std::vector<double> parameters() const {
    std::vector<double> out;
    out.reserve(param_count());
    for (const auto& l : layers_) {
      for (int r = 0; r < l.weights.rows(); ++r)
        for (int c = 0; c < l.weights.cols(); ++c) out.push_back(l.weights(r, c));
      for (int r = 0; r < l.biases.size(); ++r) out.push_back(l.biases(r));
    }
    return out;
  }

 private:
  std::vector<DenseLayer> layers_;
  std::vector<double> dropout_;
  std::uint64_t generation_ = 0;
};

/// Glorot-uniform weights in +-sqrt(6 / (in + out)), zero biases.
inline void init_glorot(Mlp& net, RngStream& rng) {
  for (auto& l : net.mutable_layers()) {
    const double limit = std::sqrt(6.0 / (l.in_dim() + l.out_dim()));
    for (int r = 0; r < l.weights.rows(); ++r)
      for (int c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = rng.uniform(-limit, limit);
    l.biases.setZero();
  }
}

enum class Mode { train, infer };

/// Activation record of one forward pass. Columns are batch members.
struct Tape {
  const Mlp* net = nullptr;
  std::uint64_t generation = 0;
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // W x + b
  std::vector<Matrix> post;    // act(pre), before dropout
  std::vector<Matrix> masks;   // scaled keep masks; empty when no dropout applied
};

/// Batched forward pass; `input` is in_dim x batch. Dropout masks are drawn
/// from `rng` only in training mode for layers with a non-zero rate.
inline std::pair<Matrix, Tape> forward_batch(const Mlp& net, const Matrix& input, Mode mode, RngStream* rng = nullptr) {
  if (input.rows() != net.input_dim()) {
    throw std::invalid_argument("forward: input has " + std::to_string(input.rows()) + " rows, network expects " +
                                std::to_string(net.input_dim()));
  }
  Tape tape;
  tape.net = &net;
  tape.generation = net.generation();
  const auto& layers = net.layers();
  tape.inputs.reserve(layers.size());
  tape.pre.reserve(layers.size());
  tape.post.reserve(layers.size());
  tape.masks.resize(layers.size());
  Matrix x = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    Matrix z = l.weights * x;
    z.colwise() += l.biases;
    Matrix y = z.unaryExpr([&](double v) { return activate(l.activation, v); });
    tape.inputs.push_back(std::move(x));
    tape.pre.push_back(std::move(z));
    const double rate = net.dropout()[i];
    if (mode == Mode::train && rate > 0.0) {
      if (rng == nullptr) throw std::invalid_argument("forward: training-mode dropout needs an RNG");
      Matrix mask(y.rows(), y.cols());
      const double scale = 1.0 / (1.0 - rate);
      for (Eigen::Index c = 0; c < mask.cols(); ++c)
        for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = rng->uniform() < rate ? 0.0 : scale;
      x = y.cwiseProduct(mask);
      tape.masks[i] = std::move(mask);
    } else {
      x = y;
    }
    tape.post.push_back(std::move(y));
  }
  return {x, std::move(tape)};
}

inline std::pair<std::vector<double>, Tape> forward(const Mlp& net, std::span<const double> input, Mode mode,
                                                    RngStream* rng = nullptr) {
  const Matrix in = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
  auto [out, tape] = forward_batch(net, in, mode, rng);
  return {std::vector<double>(out.data(), out.data() + out.size()), std::move(tape)};
}

/// Inference on a single input; consumes no randomness.
inline std::vector<double> predict(const Mlp& net, std::span<const double> input) {
  return forward(net, input, Mode::infer).first;
}

/// Parameter gradients, summed over the batch, plus d loss / d input.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Matrix input;

  std::vector<double> flat() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      for (int r = 0; r < weights[i].rows(); ++r)
        for (int c = 0; c < weights[i].cols(); ++c) out.push_back(weights[i](r, c));
      for (int r = 0; r < biases[i].size(); ++r) out.push_back(biases[i](r));
    }
    return out;
  }
};

/// Reverse-mode gradients for the pass recorded in `tape`. `upstream` is
/// d loss / d output (out_dim x batch).
inline Gradients backward(const Mlp& net, const Tape& tape, const Matrix& upstream) {
  if (tape.net != &net || tape.generation != net.generation()) {
    throw std::invalid_argument("backward: tape does not belong to the current network state");
  }
  const auto& layers = net.layers();
  if (upstream.rows() != net.output_dim() || upstream.cols() != tape.inputs.front().cols()) {
    throw std::invalid_argument("backward: upstream gradient shape mismatch");
  }
  Gradients g;
  g.weights.resize(layers.size());
  g.biases.resize(layers.size());
  Matrix grad = upstream;  // d loss / d (layer output after dropout)
  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& l = layers[k];
    if (tape.masks[k].size() != 0) grad = grad.cwiseProduct(tape.masks[k]);
    const Matrix& z = tape.pre[k];
    const Matrix& y = tape.post[k];
    Matrix dz(z.rows(), z.cols());
    for (Eigen::Index c = 0; c < z.cols(); ++c)
      for (Eigen::Index r = 0; r < z.rows(); ++r) dz(r, c) = grad(r, c) * activate_grad(l.activation, z(r, c), y(r, c));
    g.weights[k].noalias() = dz * tape.inputs[k].transpose();
    g.biases[k] = dz.rowwise().sum();
    grad.noalias() = l.weights.transpose() * dz;
  }
  g.input = std::move(grad);
  return g;
}

struct LossAndGrad {
  double loss;
  double dloss_dpred;
};

inline constexpr double kBceClip = 1e-7;

/// Binary cross-entropy with the prediction clipped to [1e-7, 1 - 1e-7].
inline LossAndGrad bce_loss(double pred, double target) {
  const double p = std::clamp(pred, kBceClip, 1.0 - kBceClip);
  const double loss = -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
  const double grad = -target / p + (1.0 - target) / (1.0 - p);
  return {loss, grad};
}

/// Adam with bias correction. Moments are shaped like the network.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<Matrix> m_w, v_w;
  std::vector<Vector> m_b, v_b;

  static AdamState for_network(const Mlp& net, double lr) {
    if (!(lr >= 0.0)) throw std::invalid_argument("AdamState: learning rate must be >= 0");
    AdamState s;
    s.lr = lr;
    for (const auto& l : net.layers()) {
      s.m_w.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
      s.v_w.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
      s.m_b.push_back(Vector::Zero(l.biases.size()));
      s.v_b.push_back(Vector::Zero(l.biases.size()));
    }
    return s;
  }
};

inline void adam_step(AdamState& state, Mlp& net, const Gradients& grads) {
  const auto& layers = net.layers();
  if (grads.weights.size() != layers.size() || state.m_w.size() != layers.size()) {
    throw std::invalid_argument("adam_step: layer count mismatch");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (grads.weights[i].rows() != layers[i].weights.rows() || grads.weights[i].cols() != layers[i].weights.cols() ||
        grads.biases[i].size() != layers[i].biases.size() || state.m_w[i].rows() != layers[i].weights.rows() ||
        state.m_w[i].cols() != layers[i].weights.cols()) {
      throw std::invalid_argument("adam_step: shape mismatch at layer " + std::to_string(i));
    }
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  const auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    param.array() -= state.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
  };
  auto& mut = net.mutable_layers();
  for (std::size_t i = 0; i < mut.size(); ++i) {
    update(mut[i].weights, state.m_w[i], state.v_w[i], grads.weights[i]);
    update(mut[i].biases, state.m_b[i], state.v_b[i], grads.biases[i]);
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json to_json(const Mlp& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (int r = 0; r < l.weights.rows(); ++r)
      for (int c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    nlohmann::json jl = {{"in", l.in_dim()},
                         {"out", l.out_dim()},
                         {"activation", to_string(l.activation.kind)},
                         {"weights", w},
                         {"biases", std::vector<double>(l.biases.data(), l.biases.data() + l.biases.size())}};
    if (l.activation.kind == ActivationKind::leaky_relu) jl["alpha"] = l.activation.alpha;
    layers.push_back(std::move(jl));
  }
  nlohmann::json dropout = nlohmann::json::array();
  for (std::size_t i = 0; i < net.dropout().size(); ++i) {
    if (net.dropout()[i] > 0.0) dropout.push_back({{"layer", i}, {"rate", net.dropout()[i]}});
  }
  return {{"format_version", kCheckpointVersion}, {"layers", layers}, {"dropout", dropout}};
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kCheckpointVersion) throw SchemaError("unsupported checkpoint version");
    std::vector<DenseLayer> layers;
    for (const auto& jl : j.at("layers")) {
      const int in = jl.at("in").get<int>(), out = jl.at("out").get<int>();
      Activation act{parse_activation(jl.at("activation").get<std::string>()), jl.value("alpha", 0.0)};
      DenseLayer l(in, out, act);
      const auto w = jl.at("weights").get<std::vector<double>>();
      const auto b = jl.at("biases").get<std::vector<double>>();
      if (w.size() != static_cast<std::size_t>(in) * out || b.size() != static_cast<std::size_t>(out)) {
        throw SchemaError("checkpoint layer parameter count mismatch");
      }
      for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) l.weights(r, c) = w[static_cast<std::size_t>(r) * in + c];
      for (int r = 0; r < out; ++r) l.biases(r) = b[r];
      layers.push_back(std::move(l));
    }
    std::vector<double> dropout(layers.size(), 0.0);
    for (const auto& d : j.at("dropout")) {
      const auto idx = d.at("layer").get<std::size_t>();
      if (idx >= dropout.size()) throw SchemaError("checkpoint dropout index out of range");
      dropout[idx] = d.at("rate").get<double>();
    }
    return Mlp(std::move(layers), std::move(dropout));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("invalid checkpoint: ") + e.what());
  }
}

}  // namespace csiauth::nn
