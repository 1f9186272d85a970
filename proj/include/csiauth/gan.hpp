// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "csiauth/channel.hpp"
#include "csiauth/datasets.hpp"
#include "csiauth/format.hpp"
#include "csiauth/neuralnet.hpp"
#include "csiauth/rng.hpp"

namespace csiauth::gan {

inline constexpr int kCsiInputs = 32;  // 16 complex elements as (re, im)
inline constexpr int kLatentDim = 5;
inline constexpr double kLeakyAlpha = 0.3;
inline constexpr double kDropout = 0.2;

/// 32 -> 64 -> 32 -> 1. LeakyReLU(0.3) with dropout 0.2 after both hidden
/// layers, sigmoid output.
inline nn::Mlp build_discriminator(RngStream& rng) {
  using nn::Activation;
  nn::Mlp net({nn::DenseLayer(kCsiInputs, 64, Activation::leaky_relu(kLeakyAlpha)),
               nn::DenseLayer(64, 32, Activation::leaky_relu(kLeakyAlpha)),
               nn::DenseLayer(32, 1, Activation::sigmoid())},
              {kDropout, kDropout, 0.0});
  nn::init_glorot(net, rng);
  return net;
}

inline nn::Mlp build_discriminator() {
  RngStream rng(0, derive_stream_id("discriminator-init"));
  return build_discriminator(rng);
}

/// 5 -> 16 -> 32 -> 64 -> 32. LeakyReLU(0.3), LeakyReLU(0.3), tanh, then a
/// linear head holding the 16 two-unit outputs side by side.
inline nn::Mlp build_generator(RngStream& rng, int latent_dim = kLatentDim) {
  using nn::Activation;
  nn::Mlp net({nn::DenseLayer(latent_dim, 16, Activation::leaky_relu(kLeakyAlpha)),
               nn::DenseLayer(16, 32, Activation::leaky_relu(kLeakyAlpha)),
               nn::DenseLayer(32, 64, Activation::tanh()), nn::DenseLayer(64, kCsiInputs, Activation::linear())});
  nn::init_glorot(net, rng);
  return net;
}

inline nn::Mlp build_generator() {
  RngStream rng(0, derive_stream_id("generator-init"));
  return build_generator(rng);
}

struct TrainConfig {
  int max_epochs = 50;
  int batch = 64;
  double lr_d = 0.0003;
  double lr_g = 0.0009;
  int latent_dim = kLatentDim;
  std::uint64_t seed = 1;

  void validate() const {
    if (max_epochs < 1 || max_epochs > 50) throw std::invalid_argument("TrainConfig: max_epochs must be in [1, 50]");
    if (batch < 1) throw std::invalid_argument("TrainConfig: batch must be >= 1");
    if (!(lr_d >= 0.0) || !(lr_g >= 0.0)) throw std::invalid_argument("TrainConfig: learning rates must be >= 0");
    if (latent_dim < 1) throw std::invalid_argument("TrainConfig: latent_dim must be >= 1");
  }
};

struct TrainReport {
  std::vector<double> d_loss;
  std::vector<double> g_loss;
  std::vector<double> acc_real;
  std::vector<double> acc_fake;
  int epochs_run = 0;

  bool operator==(const TrainReport&) const = default;
};

inline std::string report_csv(const TrainReport& r) {
  std::string out = "epoch,d_loss,g_loss,acc_real,acc_fake\n";
  for (int e = 0; e < r.epochs_run; ++e) {
    out += std::to_string(e + 1) + "," + format_double(r.d_loss[e]) + "," + format_double(r.g_loss[e]) + "," +
           format_double(r.acc_real[e]) + "," + format_double(r.acc_fake[e]) + "\n";
  }
  return out;
}

/// Stacks flattened CSI as columns.
inline nn::Matrix to_columns(const std::vector<data::Sample>& samples) {
  nn::Matrix x(kCsiInputs, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto flat = samples[i].csi.flatten();
    if (flat.size() != static_cast<std::size_t>(kCsiInputs)) throw std::invalid_argument("GAN: expected 4x4 CSI samples");
    for (int r = 0; r < kCsiInputs; ++r) x(r, static_cast<Eigen::Index>(i)) = flat[r];
  }
  return x;
}

struct StepStats {
  double loss = 0.0;
  double acc_real = 0.0;  // fraction of real inputs scored >= 0.5
  double acc_fake = 0.0;  // fraction of fake inputs scored < 0.5
};

/// Alternating adversarial updates. A discriminator step touches only D;
/// a generator step back-propagates through D but updates only G.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const RngStream& rng)
      : cfg_(cfg),
        init_d_(rng.derive("gan-init-d")),
        init_g_(rng.derive("gan-init-g")),
        latent_(rng.derive("gan-latent")),
        dropout_(rng.derive("gan-dropout")),
        d_(build_discriminator(init_d_)),
        g_(build_generator(init_g_, cfg.latent_dim)),
        adam_d_(nn::AdamState::for_network(d_, cfg.lr_d)),
        adam_g_(nn::AdamState::for_network(g_, cfg.lr_g)) {
    cfg_.validate();
  }

  const nn::Mlp& discriminator() const noexcept { return d_; }
  const nn::Mlp& generator() const noexcept { return g_; }

  nn::Matrix sample_latent(Eigen::Index n) {
    nn::Matrix z(cfg_.latent_dim, n);
    for (Eigen::Index c = 0; c < n; ++c)
      for (Eigen::Index r = 0; r < z.rows(); ++r) z(r, c) = latent_.normal();
    return z;
  }

  nn::Matrix generate(Eigen::Index n) { return nn::forward_batch(g_, sample_latent(n), nn::Mode::infer).first; }

  /// One D update on real columns (label 1) and as many generated ones (label 0).
  StepStats d_step(const nn::Matrix& real) {
    const Eigen::Index b = real.cols();
    nn::Matrix batch(kCsiInputs, 2 * b);
    batch.leftCols(b) = real;
    batch.rightCols(b) = generate(b);
    auto [out, tape] = nn::forward_batch(d_, batch, nn::Mode::train, &dropout_);
    nn::Matrix upstream(1, 2 * b);
    StepStats s;
    const double inv = 1.0 / static_cast<double>(2 * b);
    for (Eigen::Index c = 0; c < 2 * b; ++c) {
      const bool is_real = c < b;
      const auto lg = nn::bce_loss(out(0, c), is_real ? 1.0 : 0.0);
      s.loss += lg.loss * inv;
      upstream(0, c) = lg.dloss_dpred * inv;
      if (is_real && out(0, c) >= 0.5) s.acc_real += 1.0;
      if (!is_real && out(0, c) < 0.5) s.acc_fake += 1.0;
    }
    s.acc_real /= static_cast<double>(b);
    s.acc_fake /= static_cast<double>(b);
    nn::adam_step(adam_d_, d_, nn::backward(d_, tape, upstream));
    return s;
  }

  /// One G update minimizing bce(D(G(z)), 1) with D frozen.
  StepStats g_step(Eigen::Index b) {
    auto [fake, g_tape] = nn::forward_batch(g_, sample_latent(b), nn::Mode::train, &dropout_);
    auto [out, d_tape] = nn::forward_batch(d_, fake, nn::Mode::train, &dropout_);
    nn::Matrix upstream(1, b);
    StepStats s;
    const double inv = 1.0 / static_cast<double>(b);
    for (Eigen::Index c = 0; c < b; ++c) {
      const auto lg = nn::bce_loss(out(0, c), 1.0);
      s.loss += lg.loss * inv;
      upstream(0, c) = lg.dloss_dpred * inv;
      if (out(0, c) < 0.5) s.acc_fake += 1.0;
    }
    s.acc_fake *= inv;
    const nn::Gradients d_grads = nn::backward(d_, d_tape, upstream);
    nn::adam_step(adam_g_, g_, nn::backward(g_, g_tape, d_grads.input));
    return s;
  }

 private:
  TrainConfig cfg_;
  RngStream init_d_, init_g_, latent_, dropout_;
  nn::Mlp d_, g_;
  nn::AdamState adam_d_, adam_g_;
};

struct TrainResult {
  nn::Mlp discriminator;
  TrainReport report;
};

/// Called after every epoch with the 1-based epoch number.
using EpochCallback = std::function<void(int epoch, const nn::Mlp& discriminator, const TrainReport& so_far)>;

/// Adversarial training on legitimate samples. Each epoch visits the data in
/// a fresh seeded order in mini-batches; every batch gets one D step followed
/// by one G step. The generator is discarded and the final-epoch
/// discriminator returned.
inline TrainResult train_gan(const std::vector<data::Sample>& train_data, const TrainConfig& cfg, const RngStream& rng,
                             const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (train_data.empty()) throw std::invalid_argument("train_gan: no training data");
  for (const auto& s : train_data) {
    if (s.label != data::Label::legitimate) throw std::invalid_argument("train_gan: training data must be legitimate");
  }
  const nn::Matrix all = to_columns(train_data);
  Trainer trainer(cfg, rng);
  RngStream order_rng = rng.derive("gan-order");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(all.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  TrainReport report;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.uniform_index(i)]);
    double d_loss = 0.0, g_loss = 0.0, acc_real = 0.0, acc_fake = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      nn::Matrix real(kCsiInputs, static_cast<Eigen::Index>(stop - start));
      for (std::size_t k = start; k < stop; ++k) real.col(static_cast<Eigen::Index>(k - start)) = all.col(order[k]);
      const StepStats ds = trainer.d_step(real);
      const StepStats gs = trainer.g_step(real.cols());
      d_loss += ds.loss;
      g_loss += gs.loss;
      acc_real += ds.acc_real;
      acc_fake += ds.acc_fake;
      ++batches;
    }
    report.d_loss.push_back(d_loss / batches);
    report.g_loss.push_back(g_loss / batches);
    report.acc_real.push_back(acc_real / batches);
    report.acc_fake.push_back(acc_fake / batches);
    report.epochs_run = epoch;
    if (on_epoch) on_epoch(epoch, trainer.discriminator(), report);
  }
  return {trainer.discriminator(), std::move(report)};
}

struct AuthResult {
  bool accept = false;
  double score = 0.0;
};

/// score = D(flatten(csi)) in inference mode; accept iff score >= tau.
inline AuthResult authenticate(const nn::Mlp& d, const CsiMatrix& csi, double tau = 0.5) {
  if (d.input_dim() != kCsiInputs || d.output_dim() != 1) throw std::invalid_argument("authenticate: not a discriminator");
  const auto flat = csi.flatten();
  if (flat.size() != static_cast<std::size_t>(kCsiInputs)) throw std::invalid_argument("authenticate: expected 4x4 CSI");
  // A sigmoid never reaches 0 or 1; keep rounding from pretending it did.
  const double score = std::clamp(nn::predict(d, flat)[0], 0x1.0p-1074, 1.0 - 0x1.0p-53);
  return {score >= tau, score};
}

}  // namespace csiauth::gan
