// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "csiauth/detectors/features.hpp"
#include "csiauth/rng.hpp"

namespace csiauth::detect {

struct IsolationNode {
  int feature = -1;  // -1 marks a leaf
  double split = 0.0;
  int left = -1;
  int right = -1;
  int size = 0;  // training points that reached this node
};

struct IsolationTree {
  std::vector<IsolationNode> nodes;  // nodes[0] is the root

  int height() const {
    int h = 0;
    std::vector<std::pair<int, int>> stack{{0, 0}};
    while (!stack.empty()) {
      const auto [i, depth] = stack.back();
      stack.pop_back();
      h = std::max(h, depth);
      const auto& n = nodes[static_cast<std::size_t>(i)];
      if (n.feature >= 0) {
        stack.emplace_back(n.left, depth + 1);
        stack.emplace_back(n.right, depth + 1);
      }
    }
    return h;
  }
};

struct IForestModel {
  int n_trees = 100;
  int subsample = 256;
  double threshold = 0.5;
  int dim = 0;
  std::vector<IsolationTree> trees;

  int height_limit() const { return static_cast<int>(std::ceil(std::log2(static_cast<double>(subsample)))); }
};

/// Average path length of an unsuccessful binary-search-tree lookup among n
/// points; normalizes path lengths into scores.
inline double average_path_length(double n) {
  if (n <= 1.0) return 0.0;
  if (n == 2.0) return 1.0;
  constexpr double kEulerGamma = 0.57721566490153286;
  const double harmonic = std::log(n - 1.0) + kEulerGamma;
  return 2.0 * harmonic - 2.0 * (n - 1.0) / n;
}

namespace detail {

inline int grow(IsolationTree& tree, const Points& pts, std::vector<Eigen::Index>& idx, std::size_t lo, std::size_t hi,
                int depth, int limit, RngStream& rng) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back({});
  tree.nodes.back().size = static_cast<int>(hi - lo);
  if (depth >= limit || hi - lo <= 1) return id;
  const auto feature = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(pts.rows())));
  double mn = pts(feature, idx[lo]), mx = mn;
  for (std::size_t i = lo + 1; i < hi; ++i) {
    mn = std::min(mn, pts(feature, idx[i]));
    mx = std::max(mx, pts(feature, idx[i]));
  }
  if (!(mx > mn)) return id;  // nothing to separate on this feature
  const double split = rng.uniform(mn, mx);
  const auto mid = static_cast<std::size_t>(
      std::partition(idx.begin() + static_cast<std::ptrdiff_t>(lo), idx.begin() + static_cast<std::ptrdiff_t>(hi),
                     [&](Eigen::Index c) { return pts(feature, c) < split; }) -
      idx.begin());
  const int left = grow(tree, pts, idx, lo, mid, depth + 1, limit, rng);
  const int right = grow(tree, pts, idx, mid, hi, depth + 1, limit, rng);
  auto& node = tree.nodes[static_cast<std::size_t>(id)];
  node.feature = static_cast<int>(feature);
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

inline double path_length(const IsolationTree& tree, const Eigen::VectorXd& x) {
  int i = 0;
  double depth = 0.0;
  while (true) {
    const auto& n = tree.nodes[static_cast<std::size_t>(i)];
    if (n.feature < 0) return depth + average_path_length(n.size);
    i = x(n.feature) < n.split ? n.left : n.right;
    depth += 1.0;
  }
}

}  // namespace detail

inline IForestModel iforest_fit(const Points& train, int n_trees, int subsample, const RngStream& rng,
                                double threshold = 0.5) {
  if (n_trees < 1) throw std::invalid_argument("iforest_fit: n_trees must be >= 1");
  if (subsample < 2 || subsample > train.cols()) throw std::invalid_argument("iforest_fit: need 2 <= subsample <= training size");
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("iforest_fit: threshold must be in (0, 1)");
  require_finite(train, "iforest_fit");
  const Points pts = canonical_order(train);
  IForestModel m;
  m.n_trees = n_trees;
  m.subsample = subsample;
  m.threshold = threshold;
  m.dim = static_cast<int>(pts.rows());
  m.trees.resize(static_cast<std::size_t>(n_trees));
  for (int t = 0; t < n_trees; ++t) {
    RngStream tree_rng = rng.derive("iforest-tree", 0.0, static_cast<std::uint64_t>(t));
    std::vector<Eigen::Index> all(static_cast<std::size_t>(pts.cols()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    // Partial Fisher-Yates: the first `subsample` entries become the sample.
    for (std::size_t i = 0; i < static_cast<std::size_t>(subsample); ++i) {
      std::swap(all[i], all[i + tree_rng.uniform_index(all.size() - i)]);
    }
    all.resize(static_cast<std::size_t>(subsample));
    detail::grow(m.trees[static_cast<std::size_t>(t)], pts, all, 0, all.size(), 0, m.height_limit(), tree_rng);
  }
  return m;
}

/// 2^(-mean path length / c(subsample)); higher means more anomalous.
inline double iforest_score(const IForestModel& m, std::span<const double> x) {
  if (static_cast<int>(x.size()) != m.dim) throw std::invalid_argument("iforest_score: dimension mismatch");
  if (m.trees.empty()) throw std::invalid_argument("iforest_score: empty forest");
  const Eigen::VectorXd q = as_vector(x);
  if (!q.allFinite()) throw std::invalid_argument("iforest_score: non-finite input");
  double total = 0.0;
  for (const auto& t : m.trees) total += detail::path_length(t, q);
  const double mean = total / static_cast<double>(m.trees.size());
  return std::exp2(-mean / average_path_length(m.subsample));
}

/// True when `x` is an inlier.
inline bool iforest_decide(const IForestModel& m, std::span<const double> x) { return iforest_score(m, x) <= m.threshold; }

}  // namespace csiauth::detect
