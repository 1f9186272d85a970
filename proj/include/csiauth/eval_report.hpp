// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "csiauth/auth_threshold.hpp"
#include "csiauth/channel.hpp"
#include "csiauth/datasets.hpp"
#include "csiauth/detectors.hpp"
#include "csiauth/format.hpp"
#include "csiauth/gan.hpp"

namespace csiauth::eval {

/// Anything that can accept or reject a measured CSI matrix.
struct DecisionModel {
  std::string name;
  std::function<bool(const CsiMatrix&)> accept;
};

inline DecisionModel threshold_model(std::string name, CsiMatrix reference, Threshold thr) {
  return {std::move(name), [ref = std::move(reference), thr](const CsiMatrix& x) { return accepts(x, ref, thr); }};
}

inline DecisionModel gan_model(std::string name, nn::Mlp discriminator, double tau = 0.5) {
  return {std::move(name), [d = std::move(discriminator), tau](const CsiMatrix& x) {
            return gan::authenticate(d, x, tau).accept;
          }};
}

inline DecisionModel detector_model(std::string name, detect::AnyDetector det) {
  return {std::move(name), [d = std::move(det)](const CsiMatrix& x) { return detect::is_inlier(d, x.flatten()); }};
}

inline DecisionModel constant_model(std::string name, bool verdict) {
  return {std::move(name), [verdict](const CsiMatrix&) { return verdict; }};
}

/// Rows are the true class, columns the prediction.
struct ConfusionMatrix {
  int real_real = 0;
  int real_fake = 0;
  int fake_real = 0;
  int fake_fake = 0;
  double snr_db = 0.0;
  std::string method;

  int total() const noexcept { return real_real + real_fake + fake_real + fake_fake; }
  double accuracy() const {
    if (total() == 0) throw std::logic_error("ConfusionMatrix: empty");
    return static_cast<double>(real_real + fake_fake) / static_cast<double>(total());
  }
  bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix tally(const DecisionModel& m, const std::vector<data::Sample>& samples, double snr_db) {
  ConfusionMatrix cm;
  cm.snr_db = snr_db;
  cm.method = m.name;
  for (const auto& s : samples) {
    const bool accepted = m.accept(s.csi);
    if (s.label == data::Label::legitimate) {
      (accepted ? cm.real_real : cm.real_fake) += 1;
    } else {
      (accepted ? cm.fake_real : cm.fake_fake) += 1;
    }
  }
  return cm;
}

inline ConfusionMatrix evaluate(const DecisionModel& m, const data::Dataset& ds, double snr_db) {
  const auto slice = ds.slice(snr_db);
  if (slice.empty()) throw std::invalid_argument("evaluate: dataset has no samples at " + format_double(snr_db) + " dB");
  return tally(m, slice, snr_db);
}

struct AccuracyCurve {
  std::string method;
  std::vector<std::pair<double, double>> points;  // (snr_db, accuracy)
};

/// `model_at(snr)` supplies the decider fitted for that SNR.
inline std::pair<AccuracyCurve, std::vector<ConfusionMatrix>> accuracy_curve(
    const std::string& method, const std::function<DecisionModel(double)>& model_at, const data::Dataset& ds) {
  AccuracyCurve curve{method, {}};
  std::vector<ConfusionMatrix> cms;
  for (double snr : ds.manifest.snr_grid) {
    auto m = model_at(snr);
    m.name = method;
    cms.push_back(evaluate(m, ds, snr));
    curve.points.emplace_back(snr, cms.back().accuracy());
  }
  return {std::move(curve), std::move(cms)};
}

inline AccuracyCurve curve_from(const std::string& method, const std::vector<ConfusionMatrix>& cms) {
  AccuracyCurve c{method, {}};
  for (const auto& cm : cms) {
    if (cm.method == method) c.points.emplace_back(cm.snr_db, cm.accuracy());
  }
  std::sort(c.points.begin(), c.points.end());
  return c;
}

/// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need two equal-length series");
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) mx += rx[i], my += ry[i];
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 1.0;  // a flat series cannot be out of order
  return sxy / std::sqrt(sxx * syy);
}

inline std::string snr_tag(double snr_db) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", snr_db);
  return buf;
}

inline nlohmann::json to_json(const ConfusionMatrix& cm) {
  return {{"method", cm.method},
          {"snr_db", cm.snr_db},
          {"real_real", cm.real_real},
          {"real_fake", cm.real_fake},
          {"fake_real", cm.fake_real},
          {"fake_fake", cm.fake_fake},
          {"accuracy", cm.accuracy()}};
}

inline ConfusionMatrix confusion_from_json(const nlohmann::json& j) {
  try {
    ConfusionMatrix cm;
    cm.method = j.at("method").get<std::string>();
    cm.snr_db = j.at("snr_db").get<double>();
    cm.real_real = j.at("real_real").get<int>();
    cm.real_fake = j.at("real_fake").get<int>();
    cm.fake_real = j.at("fake_real").get<int>();
    cm.fake_fake = j.at("fake_fake").get<int>();
    return cm;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("confusion matrix: ") + e.what());
  }
}

inline std::string accuracy_csv(const std::vector<AccuracyCurve>& curves) {
  std::string out = "method,snr_db,accuracy\n";
  for (const auto& c : curves) {
    for (const auto& [snr, acc] : c.points) out += c.method + "," + snr_tag(snr) + "," + format_double(acc) + "\n";
  }
  return out;
}

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                            "#8c564b", "#e377c2", "#7f7f7f", "#17becf", "#bcbd22"};

}  // namespace detail

/// Line chart with fixed axes: 0 to 30 dB across, 0 to 1 up.
inline std::string accuracy_svg(const std::string& title, const std::vector<AccuracyCurve>& curves) {
  constexpr double W = 640, H = 420, left = 60, right = 170, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  const auto px = [&](double snr) { return format_fixed(left + pw * std::clamp(snr, 0.0, 30.0) / 30.0, 2); };
  const auto py = [&](double acc) { return format_fixed(top + ph * (1.0 - std::clamp(acc, 0.0, 1.0)), 2); };
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" viewBox=\"0 0 640 420\" "
       "font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"420\" fill=\"white\"/>\n";
  s += "<text x=\"" + format_fixed(left + pw / 2, 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" +
       detail::xml_escape(title) + "</text>\n";
  for (int i = 0; i <= 6; ++i) {
    const double snr = 5.0 * i;
    s += "<line x1=\"" + px(snr) + "\" y1=\"" + py(0) + "\" x2=\"" + px(snr) + "\" y2=\"" + py(1) +
         "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + px(snr) + "\" y=\"" + format_fixed(top + ph + 18, 2) + "\" text-anchor=\"middle\">" +
         format_fixed(snr, 0) + "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double acc = 0.2 * i;
    s += "<line x1=\"" + px(0) + "\" y1=\"" + py(acc) + "\" x2=\"" + px(30) + "\" y2=\"" + py(acc) +
         "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + format_fixed(left - 8, 2) + "\" y=\"" + py(acc) + "\" text-anchor=\"end\" dy=\"4\">" +
         format_fixed(acc, 1) + "</text>\n";
  }
  s += "<rect x=\"" + format_fixed(left, 2) + "\" y=\"" + format_fixed(top, 2) + "\" width=\"" + format_fixed(pw, 2) +
       "\" height=\"" + format_fixed(ph, 2) + "\" fill=\"none\" stroke=\"black\"/>\n";
  s += "<text x=\"" + format_fixed(left + pw / 2, 2) + "\" y=\"" + format_fixed(H - 12, 2) +
       "\" text-anchor=\"middle\">SNR (dB)</text>\n";
  s += "<text x=\"16\" y=\"" + format_fixed(top + ph / 2, 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       format_fixed(top + ph / 2, 2) + ")\">Accuracy</text>\n";
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const std::string color = detail::kPalette[c % std::size(detail::kPalette)];
    std::string pts;
    for (const auto& [snr, acc] : curves[c].points) pts += (pts.empty() ? "" : " ") + px(snr) + "," + py(acc);
    s += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    const std::string ly = format_fixed(top + 10 + 18.0 * static_cast<double>(c), 2);
    s += "<line x1=\"" + format_fixed(W - right + 12, 2) + "\" y1=\"" + ly + "\" x2=\"" + format_fixed(W - right + 36, 2) +
         "\" y2=\"" + ly + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + format_fixed(W - right + 42, 2) + "\" y=\"" + ly + "\" dy=\"4\">" +
         detail::xml_escape(curves[c].method) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

/// Writes {out_dir}/reports/{dataset}/accuracy.csv, accuracy.svg and one
/// confusion_{method}_{snr}.json per matrix. Returns the paths written.
inline std::vector<std::filesystem::path> emit_report(const std::string& dataset,
                                                      const std::vector<AccuracyCurve>& curves,
                                                      const std::vector<ConfusionMatrix>& matrices,
                                                      const std::filesystem::path& out_dir) {
  if (curves.empty() || matrices.empty()) throw std::invalid_argument("emit_report: nothing to report");
  const auto dir = out_dir / "reports" / dataset;
  std::vector<std::filesystem::path> written;
  const auto put = [&](const std::filesystem::path& p, const std::string& text) {
    write_text_file(p, text);
    written.push_back(p);
  };
  put(dir / "accuracy.csv", accuracy_csv(curves));
  for (const auto& cm : matrices) {
    put(dir / ("confusion_" + cm.method + "_" + snr_tag(cm.snr_db) + ".json"), to_json(cm).dump(2) + "\n");
  }
  put(dir / "accuracy.svg", accuracy_svg(dataset + ": accuracy vs SNR", curves));
  return written;
}

}  // namespace csiauth::eval
