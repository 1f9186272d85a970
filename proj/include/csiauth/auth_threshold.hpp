// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "csiauth/channel.hpp"

namespace csiauth {

/// 2x2 real covariance of (Re, Im) of one element's measurement error.
using Covariance2 = std::array<std::array<double, 2>, 2>;

/// Average eigenvalue of a symmetric PSD 2x2 matrix, i.e. trace / 2.
inline double lambda_ave(const Covariance2& cov) {
  const double a = cov[0][0], b = cov[0][1], c = cov[1][0], d = cov[1][1];
  if (!(std::isfinite(a) && std::isfinite(b) && std::isfinite(c) && std::isfinite(d))) {
    throw std::invalid_argument("lambda_ave: non-finite covariance");
  }
  const double scale = std::max({std::abs(a), std::abs(b), std::abs(c), std::abs(d), 1.0});
  if (std::abs(b - c) > 1e-12 * scale) throw std::invalid_argument("lambda_ave: covariance is not symmetric");
  // PSD iff both eigenvalues >= 0 iff trace >= 0 and det >= 0.
  const double tol = 1e-12 * scale * scale;
  if (a + d < -tol || a * d - b * c < -tol || a < -tol || d < -tol) {
    throw std::invalid_argument("lambda_ave: covariance is not positive semi-definite");
  }
  return 0.5 * (a + d);
}

/// Covariance of the mean of `samples` measurements under CN(0, sigma2) noise.
inline Covariance2 noise_covariance(const NoiseModel& noise, int samples = 1) {
  if (samples < 1) throw std::invalid_argument("noise_covariance: samples must be >= 1");
  const double v = noise.sigma2 / 2.0 / samples;
  return {{{v, 0.0}, {0.0, v}}};
}

/// Acceptance radius z = multiplier * sqrt(lambda_ave), shared by every element.
class Threshold {
 public:
  Threshold(double multiplier, double lambda_ave) : multiplier_(multiplier), lambda_ave_(lambda_ave) {
    if (!(multiplier >= 0.0)) throw std::invalid_argument("Threshold: multiplier must be >= 0");
    if (!(lambda_ave > 0.0)) throw std::invalid_argument("Threshold: lambda_ave must be > 0");
    z_ = multiplier_ * std::sqrt(lambda_ave_);
  }

  static Threshold for_noise(double multiplier, const NoiseModel& noise, int samples = 1) {
    return Threshold(multiplier, csiauth::lambda_ave(noise_covariance(noise, samples)));
  }

  double multiplier() const noexcept { return multiplier_; }
  double lambda_ave() const noexcept { return lambda_ave_; }
  double z() const noexcept { return z_; }

 private:
  double multiplier_;
  double lambda_ave_;
  double z_;
};

struct AuthDecision {
  bool accept = false;
  std::vector<double> per_element_dist2;            // row-major, N*M entries
  std::vector<std::pair<int, int>> failing_elements;  // (n, m)
};

/// Accept iff every measured element lies inside the disk of radius z around
/// the enrolled element; a single element outside rejects.
inline AuthDecision decide(const CsiMatrix& h_hat, const CsiMatrix& h_ref, const Threshold& threshold) {
  if (!h_hat.same_shape(h_ref)) throw std::invalid_argument("decide: CSI shape mismatch");
  const double z2 = threshold.z() * threshold.z();
  AuthDecision out;
  out.per_element_dist2.resize(h_hat.size());
  for (int n = 0; n < h_hat.n_rx(); ++n) {
    for (int m = 0; m < h_hat.m_tx(); ++m) {
      const std::size_t i = static_cast<std::size_t>(n) * h_hat.m_tx() + m;
      const double d2 = std::norm(h_hat[i] - h_ref[i]);
      out.per_element_dist2[i] = d2;
      if (!(d2 <= z2)) out.failing_elements.emplace_back(n, m);
    }
  }
  out.accept = out.failing_elements.empty();
  return out;
}

/// Fast path of decide() when only the verdict matters.
inline bool accepts(const CsiMatrix& h_hat, const CsiMatrix& h_ref, const Threshold& threshold) {
  if (!h_hat.same_shape(h_ref)) throw std::invalid_argument("accepts: CSI shape mismatch");
  const double z2 = threshold.z() * threshold.z();
  for (std::size_t i = 0; i < h_hat.size(); ++i) {
    if (!(std::norm(h_hat[i] - h_ref[i]) <= z2)) return false;
  }
  return true;
}

/// Monte Carlo fraction of independent CN(0,1) impostor matrices accepted
/// against `h_ref`.
inline double false_accept_rate_sim(const CsiMatrix& h_ref, const Threshold& threshold, long n_trials,
                                    RngStream& rng) {
  if (n_trials < 1) throw std::invalid_argument("false_accept_rate_sim: n_trials must be >= 1");
  long accepted = 0;
  for (long t = 0; t < n_trials; ++t) {
    const CsiMatrix impostor = sample_csi(h_ref.n_rx(), h_ref.m_tx(), rng);
    if (accepts(impostor, h_ref, threshold)) ++accepted;
  }
  return static_cast<double>(accepted) / static_cast<double>(n_trials);
}

}  // namespace csiauth
