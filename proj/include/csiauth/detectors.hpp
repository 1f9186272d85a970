// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include <span>
#include <stdexcept>
#include <string>
#include <variant>

#include "csiauth/detectors/features.hpp"
#include "csiauth/detectors/iforest.hpp"
#include "csiauth/detectors/lof.hpp"
#include "csiauth/detectors/ocsvm.hpp"
#include "csiauth/format.hpp"

namespace csiauth::detect {

using AnyDetector = std::variant<LofModel, IForestModel, OcsvmModel>;

inline std::string algorithm_name(const AnyDetector& d) {
  switch (d.index()) {
    case 0: return "lof";
    case 1: return "iforest";
    default: return "ocsvm";
  }
}

/// Uniform inlier test over the three detectors.
inline bool is_inlier(const AnyDetector& d, std::span<const double> x) {
  return std::visit(
      [&](const auto& m) -> bool {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, LofModel>) return lof_decide(m, x);
        else if constexpr (std::is_same_v<M, IForestModel>) return iforest_decide(m, x);
        else return ocsvm_decide(m, x) == 1;
      },
      d);
}

/// Raw anomaly-side score: LOF value, isolation score, or negated SVM margin.
inline double anomaly_score(const AnyDetector& d, std::span<const double> x) {
  return std::visit(
      [&](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, LofModel>) return lof_score(m, x);
        else if constexpr (std::is_same_v<M, IForestModel>) return iforest_score(m, x);
        else return -ocsvm_value(m, x);
      },
      d);
}

inline nlohmann::json to_json(const AnyDetector& d) {
  using nlohmann::json;
  json j;
  j["format_version"] = 1;
  j["algorithm"] = algorithm_name(d);
  if (const auto* m = std::get_if<LofModel>(&d)) {
    j["hyperparameters"] = {{"k", m->k}, {"threshold", m->threshold}};
    j["model"] = {{"dim", m->train.rows()},
                  {"train", column_major(m->train)},
                  {"k_distance", m->k_distance},
                  {"lrd", m->lrd}};
  } else if (const auto* f = std::get_if<IForestModel>(&d)) {
    j["hyperparameters"] = {{"n_trees", f->n_trees}, {"subsample", f->subsample}, {"threshold", f->threshold}};
    json trees = json::array();
    for (const auto& t : f->trees) {
      json nodes = json::array();
      for (const auto& n : t.nodes) nodes.push_back({n.feature, n.split, n.left, n.right, n.size});
      trees.push_back(std::move(nodes));
    }
    j["model"] = {{"dim", f->dim}, {"trees", std::move(trees)}};
  } else {
    const auto& s = std::get<OcsvmModel>(d);
    j["hyperparameters"] = {{"nu", s.nu}, {"gamma", s.gamma}};
    j["model"] = {{"dim", s.support_vectors.rows()},
                  {"support_vectors", column_major(s.support_vectors)},
                  {"alphas", s.alphas},
                  {"rho", s.rho},
                  {"train_size", s.train_size},
                  {"kkt_residual", s.kkt_residual},
                  {"iterations", s.iterations}};
  }
  return j;
}

inline AnyDetector detector_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != 1) throw SchemaError("detector: unsupported format_version");
    const auto algo = j.at("algorithm").get<std::string>();
    const auto& hp = j.at("hyperparameters");
    const auto& mj = j.at("model");
    if (algo == "lof") {
      LofModel m;
      m.k = hp.at("k").get<int>();
      m.threshold = hp.at("threshold").get<double>();
      m.train = points_from(mj.at("train").get<std::vector<double>>(), mj.at("dim").get<Eigen::Index>());
      m.k_distance = mj.at("k_distance").get<std::vector<double>>();
      m.lrd = mj.at("lrd").get<std::vector<double>>();
      const auto n = static_cast<std::size_t>(m.train.cols());
      if (m.k < 1 || static_cast<std::size_t>(m.k) >= n || m.k_distance.size() != n || m.lrd.size() != n) {
        throw SchemaError("detector: inconsistent LOF payload");
      }
      return m;
    }
    if (algo == "iforest") {
      IForestModel m;
      m.n_trees = hp.at("n_trees").get<int>();
      m.subsample = hp.at("subsample").get<int>();
      m.threshold = hp.at("threshold").get<double>();
      m.dim = mj.at("dim").get<int>();
      for (const auto& tj : mj.at("trees")) {
        IsolationTree t;
        for (const auto& nj : tj) {
          t.nodes.push_back({nj.at(0).get<int>(), nj.at(1).get<double>(), nj.at(2).get<int>(), nj.at(3).get<int>(),
                             nj.at(4).get<int>()});
        }
        const auto count = static_cast<int>(t.nodes.size());
        for (const auto& n : t.nodes) {
          if (n.feature >= m.dim || (n.feature >= 0 && (n.left <= 0 || n.left >= count || n.right <= 0 || n.right >= count))) {
            throw SchemaError("detector: malformed isolation tree");
          }
        }
        if (t.nodes.empty()) throw SchemaError("detector: empty isolation tree");
        m.trees.push_back(std::move(t));
      }
      if (static_cast<int>(m.trees.size()) != m.n_trees) throw SchemaError("detector: tree count mismatch");
      return m;
    }
    if (algo == "ocsvm") {
      OcsvmModel m;
      m.nu = hp.at("nu").get<double>();
      m.gamma = hp.at("gamma").get<double>();
      m.support_vectors = points_from(mj.at("support_vectors").get<std::vector<double>>(), mj.at("dim").get<Eigen::Index>());
      m.alphas = mj.at("alphas").get<std::vector<double>>();
      m.rho = mj.at("rho").get<double>();
      m.train_size = mj.at("train_size").get<int>();
      m.kkt_residual = mj.at("kkt_residual").get<double>();
      m.iterations = mj.at("iterations").get<long>();
      if (static_cast<Eigen::Index>(m.alphas.size()) != m.support_vectors.cols()) {
        throw SchemaError("detector: alpha count mismatch");
      }
      return m;
    }
    throw SchemaError("detector: unknown algorithm '" + algo + "'");
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("detector: ") + e.what());
  }
}

}  // namespace csiauth::detect
