// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "csiauth/channel.hpp"
#include "csiauth/format.hpp"
#include "csiauth/rng.hpp"

namespace csiauth::data {

inline constexpr int kSamplesPerSnr = 1000;
inline constexpr int kTrainPerSnr = 700;
inline constexpr int kAttackers = 5;
inline constexpr int kSamplesPerAttacker = 80;
inline constexpr const char* kEnrolledSource = "legit";

enum class Label { legitimate, illegitimate };

inline std::string to_string(Label l) { return l == Label::legitimate ? "legitimate" : "illegitimate"; }

inline Label parse_label(std::string_view s) {
  if (s == "legitimate") return Label::legitimate;
  if (s == "illegitimate") return Label::illegitimate;
  throw SchemaError("unknown label '" + std::string(s) + "'");
}

enum class DatasetKind { master, train, test, test_accidental, test_nefarious };

inline std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::master: return "master";
    case DatasetKind::train: return "train";
    case DatasetKind::test: return "test";
    case DatasetKind::test_accidental: return "test_accidental";
    case DatasetKind::test_nefarious: return "test_nefarious";
  }
  return "?";
}

inline DatasetKind parse_kind(std::string_view s) {
  for (auto k : {DatasetKind::master, DatasetKind::train, DatasetKind::test, DatasetKind::test_accidental,
                 DatasetKind::test_nefarious}) {
    if (to_string(k) == s) return k;
  }
  throw SchemaError("unknown dataset kind '" + std::string(s) + "'");
}

struct Sample {
  CsiMatrix csi;
  double snr_db = 0.0;
  Label label = Label::legitimate;
  std::string source_id;

  bool operator==(const Sample&) const = default;
};

/// Five distinct, non-zero complex offsets, one per nefarious user.
class NefariousOffsets {
 public:
  explicit NefariousOffsets(std::vector<ComplexValue> offsets) : offsets_(std::move(offsets)) {
    if (offsets_.size() != static_cast<std::size_t>(kAttackers)) {
      throw std::invalid_argument("NefariousOffsets: expected 5 offsets, got " + std::to_string(offsets_.size()));
    }
    for (std::size_t i = 0; i < offsets_.size(); ++i) {
      if (!is_finite(offsets_[i])) throw std::invalid_argument("NefariousOffsets: non-finite offset");
      if (offsets_[i] == ComplexValue{}) {
        throw std::invalid_argument("NefariousOffsets: a zero offset duplicates the legitimate transmitter");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (offsets_[i] == offsets_[j]) throw std::invalid_argument("NefariousOffsets: offsets must be distinct");
      }
    }
  }

  /// Magnitudes 0.1 .. 0.5 at phases 0, 72, 144, 216, 288 degrees.
  static NefariousOffsets defaults() {
    std::vector<ComplexValue> v;
    for (int i = 0; i < kAttackers; ++i) {
      v.push_back(std::polar(0.1 * (i + 1), 2.0 * std::numbers::pi * i / kAttackers));
    }
    return NefariousOffsets(std::move(v));
  }

  const std::vector<ComplexValue>& values() const noexcept { return offsets_; }

 private:
  std::vector<ComplexValue> offsets_;
};

using CountMap = std::map<std::pair<double, Label>, int>;

struct DatasetManifest {
  std::uint64_t seed = 0;
  DatasetKind kind = DatasetKind::master;
  CsiMatrix h_true;
  std::vector<double> snr_grid;
  CountMap counts;
  std::vector<ComplexValue> offsets;    // nefarious datasets only
  std::vector<CsiMatrix> impostors;     // accidental datasets only

  bool operator==(const DatasetManifest&) const = default;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<Sample> samples;

  /// Samples at one SNR, in file order.
  std::vector<Sample> slice(double snr_db) const {
    std::vector<Sample> out;
    for (const auto& s : samples) {
      if (s.snr_db == snr_db) out.push_back(s);
    }
    return out;
  }

  bool operator==(const Dataset&) const = default;
};

inline std::vector<double> default_snr_grid() {
  std::vector<double> g;
  for (int s = 0; s <= 30; s += 2) g.push_back(s);
  return g;
}

/// Parses "a:b:step" into {a, a+step, ..., <= b}.
inline std::vector<double> parse_snr_grid(std::string_view spec) {
  const auto parts = split(spec, ':');
  if (parts.size() != 3) throw std::invalid_argument("SNR grid must look like a:b:step, got '" + std::string(spec) + "'");
  double a, b, step;
  try {
    a = parse_double(parts[0]);
    b = parse_double(parts[1]);
    step = parse_double(parts[2]);
  } catch (const SchemaError& e) {
    throw std::invalid_argument(std::string("SNR grid: ") + e.what());
  }
  if (!(step > 0.0) || b < a) throw std::invalid_argument("SNR grid: need step > 0 and b >= a");
  std::vector<double> g;
  for (int i = 0;; ++i) {
    const double v = a + i * step;
    if (v > b + 1e-9 * step) break;
    g.push_back(v);
  }
  return g;
}

inline CountMap tally(const std::vector<Sample>& samples) {
  CountMap c;
  for (const auto& s : samples) ++c[{s.snr_db, s.label}];
  return c;
}

/// One enrolled channel H drawn once; at every SNR, `per_snr` noisy copies H + e.
inline Dataset build_master(const RngStream& root, const std::vector<double>& snr_grid = default_snr_grid(),
                            int per_snr = kSamplesPerSnr, int n_rx = 4, int m_tx = 4) {
  if (snr_grid.empty()) throw std::invalid_argument("build_master: empty SNR grid");
  if (per_snr < 1) throw std::invalid_argument("build_master: per_snr must be >= 1");
  Dataset ds;
  auto h_stream = root.derive("h_true");
  ds.manifest.seed = root.seed();
  ds.manifest.kind = DatasetKind::master;
  ds.manifest.h_true = sample_csi(n_rx, m_tx, h_stream);
  ds.manifest.snr_grid = snr_grid;
  ds.samples.reserve(snr_grid.size() * per_snr);
  for (double snr : snr_grid) {
    auto noise_stream = root.derive("master", snr, 0);
    const auto noise = NoiseModel::from_snr_db(snr);
    for (int i = 0; i < per_snr; ++i) {
      ds.samples.push_back({add_measurement_error(ds.manifest.h_true, noise, noise_stream), snr,
                            Label::legitimate, kEnrolledSource});
    }
  }
  ds.manifest.counts = tally(ds.samples);
  return ds;
}

enum class SplitMode { by_index, seeded_shuffle };

/// Per-SNR 70/30 split. By default the first 70% of each SNR slice (file
/// order) goes to training.
inline std::pair<Dataset, Dataset> split_train_test(const Dataset& master, SplitMode mode = SplitMode::by_index,
                                                    double train_fraction = 0.7) {
  if (master.manifest.kind != DatasetKind::master) throw std::invalid_argument("split_train_test: not a master dataset");
  if (master.samples.empty()) throw std::invalid_argument("split_train_test: empty master");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split_train_test: train fraction must be in (0, 1)");
  }
  if (tally(master.samples) != master.manifest.counts) {
    throw std::invalid_argument("split_train_test: master counts disagree with its manifest");
  }
  Dataset train, test;
  train.manifest = master.manifest;
  test.manifest = master.manifest;
  train.manifest.kind = DatasetKind::train;
  test.manifest.kind = DatasetKind::test;
  std::optional<std::size_t> per_snr;
  for (double snr : master.manifest.snr_grid) {
    auto slice = master.slice(snr);
    if (slice.empty()) throw std::invalid_argument("split_train_test: master lacks SNR " + format_double(snr));
    if (per_snr && *per_snr != slice.size()) throw std::invalid_argument("split_train_test: uneven SNR slices");
    per_snr = slice.size();
    for (const auto& s : slice) {
      if (s.label != Label::legitimate) throw std::invalid_argument("split_train_test: master holds illegitimate samples");
    }
    if (mode == SplitMode::seeded_shuffle) {
      auto rng = RngStream(master.manifest.seed).derive("split", snr, 0);
      for (std::size_t i = slice.size(); i > 1; --i) std::swap(slice[i - 1], slice[rng.uniform_index(i)]);
    }
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * slice.size()));
    for (std::size_t i = 0; i < slice.size(); ++i) (i < n_train ? train : test).samples.push_back(slice[i]);
  }
  train.manifest.counts = tally(train.samples);
  test.manifest.counts = tally(test.samples);
  return {std::move(train), std::move(test)};
}

namespace detail {

inline void require_legit_test(const Dataset& test, const char* who) {
  if (test.manifest.kind != DatasetKind::test) throw std::invalid_argument(std::string(who) + ": expected a test dataset");
  for (double snr : test.manifest.snr_grid) {
    if (test.manifest.counts.count({snr, Label::legitimate}) == 0) {
      throw std::invalid_argument(std::string(who) + ": test dataset lacks SNR " + format_double(snr));
    }
  }
}

/// Appends `per_attacker` noisy copies of each reference at every SNR.
inline void add_attackers(Dataset& ds, const std::vector<CsiMatrix>& refs, const std::string& prefix,
                          const std::string& stream_label, const RngStream& root, int per_attacker) {
  for (double snr : ds.manifest.snr_grid) {
    const auto noise = NoiseModel::from_snr_db(snr);
    for (std::size_t a = 0; a < refs.size(); ++a) {
      auto stream = root.derive(stream_label, snr, static_cast<std::int64_t>(a + 1));
      const std::string id = prefix + std::to_string(a + 1);
      for (int i = 0; i < per_attacker; ++i) {
        ds.samples.push_back({add_measurement_error(refs[a], noise, stream), snr, Label::illegitimate, id});
      }
    }
  }
  // Keep each SNR slice contiguous: legitimate rows first, then attackers.
  std::stable_sort(ds.samples.begin(), ds.samples.end(),
                   [](const Sample& x, const Sample& y) { return x.snr_db < y.snr_db; });
  ds.manifest.counts = tally(ds.samples);
}

}  // namespace detail

/// Five unrelated transmitters with fresh CN(0,1) channels join the
/// legitimate test samples.
inline Dataset build_accidental(const Dataset& test_legit, const RngStream& root,
                                int per_attacker = kSamplesPerAttacker) {
  detail::require_legit_test(test_legit, "build_accidental");
  Dataset ds = test_legit;
  ds.manifest.kind = DatasetKind::test_accidental;
  const auto& h = ds.manifest.h_true;
  for (int i = 0; i < kAttackers; ++i) {
    auto stream = root.derive("impostor", 0.0, i + 1);
    ds.manifest.impostors.push_back(sample_csi(h.n_rx(), h.m_tx(), stream));
  }
  detail::add_attackers(ds, ds.manifest.impostors, "imp", "accidental", root, per_attacker);
  return ds;
}

/// Five spoofers whose effective channel is H_true plus one complex offset
/// applied to every element.
inline Dataset build_nefarious(const Dataset& test_legit, const NefariousOffsets& offsets, const RngStream& root,
                               int per_attacker = kSamplesPerAttacker) {
  detail::require_legit_test(test_legit, "build_nefarious");
  Dataset ds = test_legit;
  ds.manifest.kind = DatasetKind::test_nefarious;
  ds.manifest.offsets = offsets.values();
  std::vector<CsiMatrix> refs;
  for (const auto& off : offsets.values()) {
    CsiMatrix spoof = ds.manifest.h_true;
    for (std::size_t i = 0; i < spoof.size(); ++i) spoof[i] += off;
    refs.push_back(std::move(spoof));
  }
  detail::add_attackers(ds, refs, "nef", "nefarious", root, per_attacker);
  return ds;
}

// ---------------------------------------------------------------------------
// Persistence: CSV rows plus a JSON manifest sidecar.

inline std::filesystem::path manifest_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".manifest.json");
  return p;
}

inline std::string csv_header(int n_rx, int m_tx) {
  std::string h = "snr_db,label,source_id";
  for (int n = 0; n < n_rx; ++n) {
    for (int m = 0; m < m_tx; ++m) {
      const auto idx = std::to_string(n) + "_" + std::to_string(m);
      h += ",re_" + idx + ",im_" + idx;
    }
  }
  return h;
}

namespace detail {

inline nlohmann::json csi_to_json(const CsiMatrix& h) {
  return {{"n_rx", h.n_rx()}, {"m_tx", h.m_tx()}, {"values", h.flatten()}};
}

inline CsiMatrix csi_from_json(const nlohmann::json& j) {
  const auto values = j.at("values").get<std::vector<double>>();
  return CsiMatrix::from_flat(j.at("n_rx").get<int>(), j.at("m_tx").get<int>(), values);
}

}  // namespace detail

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& [key, n] : m.counts) {
    counts.push_back({{"snr_db", key.first}, {"label", to_string(key.second)}, {"count", n}});
  }
  nlohmann::json j = {
      {"format_version", 1},
      {"seed", m.seed},
      {"kind", to_string(m.kind)},
      {"snr_grid", m.snr_grid},
      {"counts", counts},
      {"h_true", detail::csi_to_json(m.h_true)},
  };
  if (!m.offsets.empty()) {
    nlohmann::json offs = nlohmann::json::array();
    for (const auto& o : m.offsets) offs.push_back({o.real(), o.imag()});
    j["offsets"] = offs;
  }
  if (!m.impostors.empty()) {
    nlohmann::json imps = nlohmann::json::array();
    for (const auto& h : m.impostors) imps.push_back(detail::csi_to_json(h));
    j["impostors"] = imps;
  }
  return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != 1) throw SchemaError("unsupported manifest format_version");
    DatasetManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.kind = parse_kind(j.at("kind").get<std::string>());
    m.snr_grid = j.at("snr_grid").get<std::vector<double>>();
    for (const auto& c : j.at("counts")) {
      m.counts[{c.at("snr_db").get<double>(), parse_label(c.at("label").get<std::string>())}] =
          c.at("count").get<int>();
    }
    m.h_true = detail::csi_from_json(j.at("h_true"));
    if (j.contains("offsets")) {
      for (const auto& o : j.at("offsets")) m.offsets.emplace_back(o.at(0).get<double>(), o.at(1).get<double>());
    }
    if (j.contains("impostors")) {
      for (const auto& h : j.at("impostors")) m.impostors.push_back(detail::csi_from_json(h));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed manifest: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("malformed manifest: ") + e.what());
  }
}

inline std::string dataset_csv(const Dataset& ds) {
  const auto& h = ds.manifest.h_true;
  std::string out = csv_header(h.n_rx(), h.m_tx());
  out += '\n';
  for (const auto& s : ds.samples) {
    out += format_double(s.snr_db);
    out += ',';
    out += to_string(s.label);
    out += ',';
    out += s.source_id;
    for (double v : s.csi.flatten()) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

/// Writes `<path>` (CSV) and its `<stem>.manifest.json` sidecar.
inline void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  if (tally(ds.samples) != ds.manifest.counts) throw std::invalid_argument("write_dataset: counts disagree with manifest");
  write_text_file(path, dataset_csv(ds));
  write_text_file(manifest_path(path), manifest_to_json(ds.manifest).dump(2) + "\n");
}

/// Reads a dataset and its manifest, checking the header, every row, the
/// per-(SNR, label) counts and, when given, the recorded seed.
inline Dataset read_dataset(const std::filesystem::path& path, std::optional<std::uint64_t> expected_seed = {}) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("dataset not found: " + path.string());
  const auto mpath = manifest_path(path);
  if (!std::filesystem::exists(mpath)) throw std::runtime_error("manifest not found: " + mpath.string());
  Dataset ds;
  try {
    ds.manifest = manifest_from_json(nlohmann::json::parse(read_text_file(mpath)));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(mpath.string() + ": " + e.what());
  }
  if (expected_seed && *expected_seed != ds.manifest.seed) {
    throw SchemaError(path.string() + ": recorded seed " + std::to_string(ds.manifest.seed) + " != expected " +
                      std::to_string(*expected_seed));
  }
  const int n_rx = ds.manifest.h_true.n_rx(), m_tx = ds.manifest.h_true.m_tx();
  const std::size_t n_fields = 3 + 2 * static_cast<std::size_t>(n_rx) * m_tx;
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != csv_header(n_rx, m_tx)) {
    throw SchemaError(path.string() + ": header does not match " + std::to_string(n_rx) + "x" + std::to_string(m_tx) +
                      " CSI layout");
  }
  std::vector<double> values(n_fields - 3);
  for (std::size_t row = 2; std::getline(in, line); ++row) {
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    try {
      if (fields.size() != n_fields) throw SchemaError("expected " + std::to_string(n_fields) + " fields");
      Sample s;
      s.snr_db = parse_double(fields[0]);
      s.label = parse_label(fields[1]);
      s.source_id = std::string(fields[2]);
      for (std::size_t i = 3; i < n_fields; ++i) values[i - 3] = parse_double(fields[i]);
      s.csi = CsiMatrix::from_flat(n_rx, m_tx, values);
      ds.samples.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw SchemaError(path.string() + " line " + std::to_string(row) + ": " + e.what());
    }
  }
  if (tally(ds.samples) != ds.manifest.counts) {
    throw SchemaError(path.string() + ": sample counts disagree with manifest");
  }
  return ds;
}

}  // namespace csiauth::data
