// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "csiauth/detectors/features.hpp"

namespace csiauth::detect {

/// Local outlier factor used in novelty mode: the training set is the
/// reference population, queries are never part of it.
struct LofModel {
  int k = 20;
  double threshold = 1.5;
  Points train;                      // one point per column
  std::vector<double> k_distance;    // per training point
  std::vector<double> lrd;           // local reachability density per training point

  Eigen::Index size() const noexcept { return train.cols(); }
};

namespace detail {

/// Indices of the k nearest columns of `pts` to `x`, nearest first, with
/// `skip` excluded. Ties go to the lower index.
inline std::vector<std::pair<double, Eigen::Index>> nearest(const Points& pts, const Eigen::VectorXd& x, int k,
                                                            Eigen::Index skip = -1) {
  std::vector<std::pair<double, Eigen::Index>> d;
  d.reserve(static_cast<std::size_t>(pts.cols()));
  for (Eigen::Index j = 0; j < pts.cols(); ++j) {
    if (j == skip) continue;
    d.emplace_back((pts.col(j) - x).norm(), j);
  }
  const auto kk = static_cast<std::ptrdiff_t>(k);
  std::partial_sort(d.begin(), d.begin() + kk, d.end());
  d.resize(static_cast<std::size_t>(k));
  return d;
}

// Keeps duplicate-heavy data from producing infinite densities.
inline constexpr double kReachFloor = 1e-10;

inline double density(const LofModel& m, const std::vector<std::pair<double, Eigen::Index>>& nbrs) {
  double reach = 0.0;
  for (const auto& [dist, j] : nbrs) reach += std::max(m.k_distance[static_cast<std::size_t>(j)], dist);
  return 1.0 / (reach / static_cast<double>(nbrs.size()) + kReachFloor);
}

inline double factor(const LofModel& m, const std::vector<std::pair<double, Eigen::Index>>& nbrs, double own_lrd) {
  double sum = 0.0;
  for (const auto& [dist, j] : nbrs) sum += m.lrd[static_cast<std::size_t>(j)];
  return sum / static_cast<double>(nbrs.size()) / own_lrd;
}

}  // namespace detail

inline LofModel lof_fit(const Points& train, int k = 20, double threshold = 1.5) {
  if (k < 1 || k >= train.cols()) throw std::invalid_argument("lof_fit: need 1 <= k < number of training points");
  if (!(threshold > 0.0)) throw std::invalid_argument("lof_fit: threshold must be positive");
  require_finite(train, "lof_fit");
  LofModel m;
  m.k = k;
  m.threshold = threshold;
  m.train = train;
  const auto n = static_cast<std::size_t>(train.cols());
  std::vector<std::vector<std::pair<double, Eigen::Index>>> nbrs(n);
  m.k_distance.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    nbrs[i] = detail::nearest(train, train.col(ii), k, ii);
    m.k_distance[i] = nbrs[i].back().first;
  }
  m.lrd.resize(n);
  for (std::size_t i = 0; i < n; ++i) m.lrd[i] = detail::density(m, nbrs[i]);
  return m;
}

inline double lof_score(const LofModel& m, std::span<const double> x) {
  if (static_cast<Eigen::Index>(x.size()) != m.train.rows()) throw std::invalid_argument("lof_score: dimension mismatch");
  const Eigen::VectorXd q = as_vector(x);
  if (!q.allFinite()) throw std::invalid_argument("lof_score: non-finite input");
  const auto nbrs = detail::nearest(m.train, q, m.k);
  return detail::factor(m, nbrs, detail::density(m, nbrs));
}

/// True when `x` is an inlier.
inline bool lof_decide(const LofModel& m, std::span<const double> x) { return lof_score(m, x) <= m.threshold; }

/// LOF of every training point against the rest of the training set.
inline std::vector<double> lof_train_scores(const LofModel& m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const auto nbrs = detail::nearest(m.train, m.train.col(i), m.k, i);
    out[static_cast<std::size_t>(i)] = detail::factor(m, nbrs, m.lrd[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace csiauth::detect
