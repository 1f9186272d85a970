// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "csiauth/channel.hpp"
#include "csiauth/datasets.hpp"

namespace csiauth::detect {

/// Flattened CSI: row-major elements, real part then imaginary part.
using FeatureVector = std::vector<double>;
/// One point per column.
using Points = Eigen::MatrixXd;

inline FeatureVector features(const CsiMatrix& csi) { return csi.flatten(); }

inline Points to_points(const std::vector<data::Sample>& samples) {
  if (samples.empty()) return Points(0, 0);
  const auto dim = static_cast<Eigen::Index>(samples.front().csi.flatten().size());
  Points out(dim, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto f = samples[i].csi.flatten();
    if (static_cast<Eigen::Index>(f.size()) != dim) throw std::invalid_argument("to_points: mixed CSI shapes");
    out.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(f.data(), dim);
  }
  return out;
}

inline Points to_points(const std::vector<FeatureVector>& rows) {
  if (rows.empty()) return Points(0, 0);
  const auto dim = static_cast<Eigen::Index>(rows.front().size());
  Points out(dim, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != dim) throw std::invalid_argument("to_points: ragged rows");
    out.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(rows[i].data(), dim);
  }
  return out;
}

inline Eigen::VectorXd as_vector(std::span<const double> x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

inline void require_finite(const Points& p, const char* who) {
  if (!p.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite feature value");
}

/// Columns reordered lexicographically so that results cannot depend on the
/// order the caller supplied them in.
inline Points canonical_order(const Points& p) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(p.cols()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      if (p(r, a) != p(r, b)) return p(r, a) < p(r, b);
    }
    return false;
  });
  Points out(p.rows(), p.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = p.col(idx[i]);
  return out;
}

inline std::vector<double> column_major(const Points& p) { return {p.data(), p.data() + p.size()}; }

inline Points points_from(const std::vector<double>& values, Eigen::Index dim) {
  if (dim <= 0 || values.size() % static_cast<std::size_t>(dim) != 0) throw std::invalid_argument("points_from: bad size");
  return Eigen::Map<const Points>(values.data(), dim, static_cast<Eigen::Index>(values.size()) / dim);
}

}  // namespace csiauth::detect
