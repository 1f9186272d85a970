// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "csiauth/detectors/features.hpp"

namespace csiauth::detect {

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

struct OcsvmModel {
  double nu = 0.05;
  double gamma = 1.0;
  Points support_vectors;      // one per column
  std::vector<double> alphas;  // sums to 1, each in [0, 1/(nu n)]
  double rho = 0.0;
  int train_size = 0;
  double kkt_residual = 0.0;  // maximal violating-pair gap at convergence
  long iterations = 0;

  double upper_bound() const { return 1.0 / (nu * static_cast<double>(train_size)); }
};

struct OcsvmOptions {
  double tolerance = 1e-4;
  long max_iterations = 10'000'000;
};

inline double rbf(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double gamma) {
  return std::exp(-gamma * (a - b).squaredNorm());
}

/// 1 / (dim * variance of every feature value pooled together).
inline double default_gamma(const Points& train) {
  const double n = static_cast<double>(train.size());
  const double mean = train.sum() / n;
  const double var = (train.array() - mean).square().sum() / n;
  return var > 0.0 ? 1.0 / (static_cast<double>(train.rows()) * var) : 1.0;
}

/// Largest KKT violation of the one-class dual
///   min 0.5 a'Ka  s.t.  0 <= a_i <= ub,  sum a = 1
/// where grad = K a. Zero at an exact optimum.
inline double kkt_gap(const std::vector<double>& alpha, const std::vector<double>& grad, double ub) {
  double up = -std::numeric_limits<double>::infinity();   // max -g over entries that may grow
  double low = std::numeric_limits<double>::infinity();   // min -g over entries that may shrink
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] < ub) up = std::max(up, -grad[i]);
    if (alpha[i] > 0.0) low = std::min(low, -grad[i]);
  }
  if (!std::isfinite(up) || !std::isfinite(low)) return 0.0;
  return std::max(0.0, up - low);
}

/// Sequential minimal optimization with maximal-violating-pair selection.
inline OcsvmModel ocsvm_fit(const Points& train, double nu, double gamma, const OcsvmOptions& opt = {}) {
  if (!(nu > 0.0 && nu <= 1.0)) throw std::invalid_argument("ocsvm_fit: nu must be in (0, 1]");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("ocsvm_fit: gamma must be positive");
  if (train.cols() < 1) throw std::invalid_argument("ocsvm_fit: empty training set");
  require_finite(train, "ocsvm_fit");
  const Points pts = canonical_order(train);
  const auto n = static_cast<std::size_t>(pts.cols());
  const double ub = 1.0 / (nu * static_cast<double>(n));

  Eigen::MatrixXd kernel(pts.cols(), pts.cols());
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    kernel(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) kernel(i, j) = kernel(j, i) = rbf(pts.col(i), pts.col(j), gamma);
  }

  // Feasible start: fill entries to the upper bound until the mass is spent.
  std::vector<double> alpha(n, 0.0);
  double left = 1.0;
  for (std::size_t i = 0; i < n && left > 0.0; ++i) {
    alpha[i] = std::min(ub, left);
    left -= alpha[i];
  }
  std::vector<double> grad(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (alpha[i] == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) grad[j] += alpha[i] * kernel(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
  }

  long iter = 0;
  double gap = 0.0;
  for (;; ++iter) {
    std::size_t up_i = n, low_j = n;
    double up = -std::numeric_limits<double>::infinity(), low = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      if (alpha[t] < ub && -grad[t] > up) up = -grad[t], up_i = t;
      if (alpha[t] > 0.0 && -grad[t] < low) low = -grad[t], low_j = t;
    }
    gap = (up_i == n || low_j == n) ? 0.0 : up - low;
    if (gap <= opt.tolerance) break;
    if (iter >= opt.max_iterations) {
      throw ConvergenceError("ocsvm_fit: no convergence after " + std::to_string(iter) + " iterations, KKT gap " +
                                 std::to_string(gap),
                             gap);
    }
    const auto i = static_cast<Eigen::Index>(up_i), j = static_cast<Eigen::Index>(low_j);
    const double curvature = std::max(kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j), 1e-12);
    double step = (grad[low_j] - grad[up_i]) / curvature;
    step = std::min({step, ub - alpha[up_i], alpha[low_j]});
    alpha[up_i] += step;
    alpha[low_j] -= step;
    if (ub - alpha[up_i] < 1e-15 * ub) alpha[up_i] = ub;
    if (alpha[low_j] < 1e-15 * ub) alpha[low_j] = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const auto tt = static_cast<Eigen::Index>(t);
      grad[t] += step * (kernel(tt, i) - kernel(tt, j));
    }
  }

  // Fresh gradient so rho and the decision function agree bit for bit.
  std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (alpha[i] > 0.0) grad[j] += alpha[i] * kernel(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
    }
  }
  double free_sum = 0.0, free_min = std::numeric_limits<double>::infinity(), free_max = -free_min;
  double at_ub_max = -std::numeric_limits<double>::infinity(), at_zero_min = std::numeric_limits<double>::infinity();
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0 && alpha[t] < ub) {
      free_sum += grad[t];
      free_min = std::min(free_min, grad[t]);
      free_max = std::max(free_max, grad[t]);
      ++n_free;
    } else if (alpha[t] >= ub) {
      at_ub_max = std::max(at_ub_max, grad[t]);
    } else {
      at_zero_min = std::min(at_zero_min, grad[t]);
    }
  }
  OcsvmModel m;
  m.nu = nu;
  m.gamma = gamma;
  m.train_size = static_cast<int>(n);
  m.iterations = iter;
  m.kkt_residual = kkt_gap(alpha, grad, ub);
  if (n_free > 0) {
    m.rho = std::clamp(free_sum / static_cast<double>(n_free), free_min, free_max);
  } else if (std::isfinite(at_ub_max) && std::isfinite(at_zero_min)) {
    m.rho = 0.5 * (at_ub_max + at_zero_min);
  } else {
    m.rho = std::isfinite(at_ub_max) ? at_ub_max : at_zero_min;
  }
  if (m.kkt_residual > opt.tolerance * 10.0) {
    throw ConvergenceError("ocsvm_fit: KKT check failed after solve, gap " + std::to_string(m.kkt_residual),
                           m.kkt_residual);
  }
  std::size_t n_sv = 0;
  for (double a : alpha) n_sv += a > 0.0;
  m.support_vectors.resize(pts.rows(), static_cast<Eigen::Index>(n_sv));
  m.alphas.reserve(n_sv);
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) {
      m.support_vectors.col(static_cast<Eigen::Index>(m.alphas.size())) = pts.col(static_cast<Eigen::Index>(t));
      m.alphas.push_back(alpha[t]);
    }
  }
  return m;
}

inline OcsvmModel ocsvm_fit(const Points& train, double nu) { return ocsvm_fit(train, nu, default_gamma(train)); }

/// sum_i alpha_i K(sv_i, x) - rho.
inline double ocsvm_value(const OcsvmModel& m, std::span<const double> x) {
  if (static_cast<Eigen::Index>(x.size()) != m.support_vectors.rows()) throw std::invalid_argument("ocsvm: dimension mismatch");
  const Eigen::VectorXd q = as_vector(x);
  if (!q.allFinite()) throw std::invalid_argument("ocsvm: non-finite input");
  double s = 0.0;
  for (Eigen::Index i = 0; i < m.support_vectors.cols(); ++i) {
    s += m.alphas[static_cast<std::size_t>(i)] * rbf(q, m.support_vectors.col(i), m.gamma);
  }
  return s - m.rho;
}

/// +1 inside the learned region, -1 outside.
inline int ocsvm_decide(const OcsvmModel& m, std::span<const double> x) { return ocsvm_value(m, x) >= 0.0 ? 1 : -1; }

}  // namespace csiauth::detect
