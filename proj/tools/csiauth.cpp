// SPDX-License-Identifier: Apache-2.0
// csiauth: dataset generation, GAN training, detector fitting, evaluation
// and analytic sweeps for CSI-based transmitter authentication.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "csiauth/analytic.hpp"
#include "csiauth/auth_threshold.hpp"
#include "csiauth/datasets.hpp"
#include "csiauth/detectors.hpp"
#include "csiauth/eval_report.hpp"
#include "csiauth/format.hpp"
#include "csiauth/gan.hpp"
#include "csiauth/parallel.hpp"

namespace fs = std::filesystem;
using namespace csiauth;
using nlohmann::json;

namespace {

struct RunConfig {
  std::uint64_t seed = 1;
  fs::path out = "csiauth-out";
  int jobs = 1;
  bool pooled = false;
  std::vector<double> snr_grid = data::default_snr_grid();
  std::vector<double> z_mult = {1, 3, 5, 6};
  bool z_mult_explicit = false;
  gan::TrainConfig gan;
  double tau = 0.5;
  bool tau_explicit = false;
  bool epoch_checkpoints = true;
  int lof_k = 20;
  double lof_threshold = 1.5;
  int if_trees = 100;
  int if_subsample = 256;
  double if_threshold = 0.5;
  double oc_nu = 0.05;
  std::optional<double> oc_gamma;  // default: 1 / (32 * feature variance)
  std::vector<ComplexValue> offsets = data::NefariousOffsets::defaults().values();
  int sweep_trials = 2000;
  double ref_snr_db = 10.0;
};

/// Values from a JSON config file override the defaults already in `cfg`.
void apply_config_file(RunConfig& cfg, const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw std::runtime_error("config " + path.string() + ": " + e.what());
  }
  const auto get = [&](const json& obj, const char* key, auto& dst) {
    if (obj.contains(key)) dst = obj.at(key).get<std::decay_t<decltype(dst)>>();
  };
  try {
    get(j, "seed", cfg.seed);
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
    get(j, "jobs", cfg.jobs);
    get(j, "pooled", cfg.pooled);
    if (j.contains("snr_grid")) {
      const auto& g = j.at("snr_grid");
      cfg.snr_grid = g.is_string() ? data::parse_snr_grid(g.get<std::string>()) : g.get<std::vector<double>>();
    }
    if (j.contains("z_mult")) {
      cfg.z_mult = j.at("z_mult").get<std::vector<double>>();
      cfg.z_mult_explicit = true;
    }
    if (j.contains("tau")) {
      cfg.tau = j.at("tau").get<double>();
      cfg.tau_explicit = true;
    }
    get(j, "epoch_checkpoints", cfg.epoch_checkpoints);
    if (j.contains("gan")) {
      const auto& g = j.at("gan");
      get(g, "max_epochs", cfg.gan.max_epochs);
      get(g, "batch", cfg.gan.batch);
      get(g, "lr_d", cfg.gan.lr_d);
      get(g, "lr_g", cfg.gan.lr_g);
      get(g, "latent_dim", cfg.gan.latent_dim);
    }
    if (j.contains("lof")) {
      get(j.at("lof"), "k", cfg.lof_k);
      get(j.at("lof"), "threshold", cfg.lof_threshold);
    }
    if (j.contains("iforest")) {
      get(j.at("iforest"), "n_trees", cfg.if_trees);
      get(j.at("iforest"), "subsample", cfg.if_subsample);
      get(j.at("iforest"), "threshold", cfg.if_threshold);
    }
    if (j.contains("ocsvm")) {
      get(j.at("ocsvm"), "nu", cfg.oc_nu);
      if (j.at("ocsvm").contains("gamma")) cfg.oc_gamma = j.at("ocsvm").at("gamma").get<double>();
    }
    if (j.contains("nefarious_offsets")) {
      cfg.offsets.clear();
      for (const auto& o : j.at("nefarious_offsets")) cfg.offsets.emplace_back(o.at(0).get<double>(), o.at(1).get<double>());
    }
    if (j.contains("analytic")) {
      get(j.at("analytic"), "trials", cfg.sweep_trials);
      get(j.at("analytic"), "ref_snr_db", cfg.ref_snr_db);
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("config " + path.string() + ": " + e.what());
  }
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  for (auto part : split(text, ',')) {
    if (!part.empty()) out.push_back(parse_double(part));
  }
  if (out.empty()) throw std::invalid_argument("empty list '" + text + "'");
  return out;
}

fs::path data_dir(const RunConfig& c) { return c.out / "data"; }
fs::path dataset_file(const RunConfig& c, const std::string& name) { return data_dir(c) / (name + ".csv"); }
fs::path gan_dir(const RunConfig& c) { return c.out / "models" / "gan"; }
fs::path gan_slot(const RunConfig& c, std::optional<double> snr) {
  return gan_dir(c) / (snr ? "snr_" + eval::snr_tag(*snr) : std::string("pooled"));
}
fs::path detector_file(const RunConfig& c, const std::string& algo, double snr) {
  return c.out / "models" / algo / ("snr_" + eval::snr_tag(snr) + ".json");
}

data::Dataset load_dataset(const RunConfig& c, const std::string& name) {
  const auto path = dataset_file(c, name);
  if (!fs::exists(path)) {
    throw std::runtime_error("missing dataset " + path.string() + " (run `csiauth gen` with the same --out first)");
  }
  return data::read_dataset(path, c.seed);
}

std::vector<data::Sample> train_slice(const data::Dataset& train, double snr) {
  auto s = train.slice(snr);
  if (s.empty()) throw std::runtime_error("training data has no samples at " + eval::snr_tag(snr) + " dB");
  return s;
}

int cmd_gen(const RunConfig& c) {
  const RngStream root(c.seed);
  const auto master = data::build_master(root, c.snr_grid);
  const auto [train, test] = data::split_train_test(master);
  const auto accidental = data::build_accidental(test, root);
  const auto nefarious = data::build_nefarious(test, data::NefariousOffsets(c.offsets), root);
  const std::vector<std::pair<std::string, const data::Dataset*>> outputs = {
      {"master", &master}, {"train", &train}, {"test", &test}, {"accidental", &accidental}, {"nefarious", &nefarious}};
  for (const auto& [name, ds] : outputs) {
    const auto path = dataset_file(c, name);
    data::write_dataset(path, *ds);
    const auto back = data::read_dataset(path, c.seed);  // validates counts against the manifest
    if (back.samples.size() != ds->samples.size()) throw std::runtime_error("verification failed for " + path.string());
    std::cout << path.string() << ": " << ds->samples.size() << " samples\n";
  }
  return 0;
}

void write_gan(const RunConfig& c, std::optional<double> snr, const std::vector<data::Sample>& samples,
               const RngStream& rng) {
  const auto slot = gan_slot(c, snr);
  gan::EpochCallback on_epoch;
  if (c.epoch_checkpoints) {
    on_epoch = [&](int epoch, const nn::Mlp& d, const gan::TrainReport&) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%02d.json", epoch);
      write_text_file(slot / "epochs" / name, nn::to_json(d).dump() + "\n");
    };
  }
  const auto result = gan::train_gan(samples, c.gan, rng, on_epoch);
  json ckpt = nn::to_json(result.discriminator);
  ckpt["tau"] = c.tau;
  ckpt["epochs_run"] = result.report.epochs_run;
  write_text_file(slot / "discriminator.json", ckpt.dump() + "\n");
  write_text_file(slot / "train_report.csv", gan::report_csv(result.report));
}

int cmd_train(const RunConfig& c) {
  const auto train = load_dataset(c, "train");
  const RngStream root(c.seed);
  if (c.pooled) {
    write_gan(c, std::nullopt, train.samples, root.derive("gan-pooled"));
    std::cout << gan_slot(c, std::nullopt).string() << ": pooled discriminator over " << train.samples.size()
              << " samples\n";
    return 0;
  }
  const auto& grid = train.manifest.snr_grid;
  parallel_for(grid.size(), c.jobs, [&](std::size_t i) {
    write_gan(c, grid[i], train_slice(train, grid[i]), root.derive("gan", grid[i], 0));
  });
  for (double snr : grid) std::cout << (gan_slot(c, snr) / "discriminator.json").string() << "\n";
  return 0;
}

detect::AnyDetector fit_one(const RunConfig& c, const std::string& algo, const std::vector<data::Sample>& samples,
                            double snr) {
  const auto pts = detect::to_points(samples);
  if (algo == "lof") return detect::lof_fit(pts, c.lof_k, c.lof_threshold);
  if (algo == "iforest") {
    return detect::iforest_fit(pts, c.if_trees, c.if_subsample, RngStream(c.seed).derive("iforest", snr, 0),
                               c.if_threshold);
  }
  return detect::ocsvm_fit(pts, c.oc_nu, c.oc_gamma ? *c.oc_gamma : detect::default_gamma(pts));
}

int cmd_fit(const RunConfig& c, const std::string& algo) {
  const auto train = load_dataset(c, "train");
  const auto& grid = train.manifest.snr_grid;
  parallel_for(grid.size(), c.jobs, [&](std::size_t i) {
    const auto model = fit_one(c, algo, train_slice(train, grid[i]), grid[i]);
    write_text_file(detector_file(c, algo, grid[i]), detect::to_json(model).dump() + "\n");
  });
  std::cout << algo << ": " << grid.size() << " models under " << (c.out / "models" / algo).string() << "\n";
  return 0;
}

eval::DecisionModel load_gan_model(const RunConfig& c, double snr) {
  const auto path = gan_slot(c, c.pooled ? std::nullopt : std::optional<double>(snr)) / "discriminator.json";
  if (!fs::exists(path)) {
    throw std::runtime_error("missing GAN checkpoint " + path.string() + "; run `csiauth train" +
                             std::string(c.pooled ? " --pooled" : "") + "` first");
  }
  const json j = json::parse(read_text_file(path));
  return eval::gan_model("gan", nn::mlp_from_json(j), c.tau_explicit ? c.tau : j.value("tau", c.tau));
}

eval::DecisionModel load_detector_model(const RunConfig& c, const std::string& algo, double snr) {
  const auto path = detector_file(c, algo, snr);
  if (!fs::exists(path)) {
    throw std::runtime_error("missing detector " + path.string() + "; run `csiauth fit-detector --algo " + algo +
                             "` first");
  }
  return eval::detector_model(algo, detect::detector_from_json(json::parse(read_text_file(path))));
}

std::string z_name(double mult) { return "hypothesis-z" + eval::snr_tag(mult); }

int cmd_eval(const RunConfig& c) {
  const auto accidental = load_dataset(c, "accidental");
  const auto nefarious = load_dataset(c, "nefarious");
  const auto& grid = accidental.manifest.snr_grid;
  std::vector<std::string> methods = {"gan", "lof", "iforest", "ocsvm"};
  for (double z : c.z_mult) methods.push_back(z_name(z));

  // Load everything up front so a missing model fails before any work.
  std::map<std::pair<std::string, double>, eval::DecisionModel> models;
  for (double snr : grid) {
    models[{"gan", snr}] = load_gan_model(c, snr);
    for (const std::string algo : {"lof", "iforest", "ocsvm"}) models[{algo, snr}] = load_detector_model(c, algo, snr);
    for (double z : c.z_mult) {
      models[{z_name(z), snr}] = eval::threshold_model(z_name(z), accidental.manifest.h_true,
                                                       Threshold::for_noise(z, NoiseModel::from_snr_db(snr)));
    }
  }
  for (const auto* ds : {&accidental, &nefarious}) {
    const std::string name = ds == &accidental ? "accidental" : "nefarious";
    std::vector<eval::ConfusionMatrix> cms(methods.size() * grid.size());
    parallel_for(cms.size(), c.jobs, [&](std::size_t i) {
      const auto& method = methods[i / grid.size()];
      const double snr = grid[i % grid.size()];
      cms[i] = eval::evaluate(models.at({method, snr}), *ds, snr);
    });
    std::vector<eval::AccuracyCurve> curves;
    for (const auto& m : methods) curves.push_back(eval::curve_from(m, cms));
    eval::emit_report(name, curves, cms, c.out);
    std::cout << (c.out / "reports" / name / "accuracy.csv").string() << "\n";
  }
  return 0;
}

/// Rebuilds accuracy.csv and accuracy.svg from the confusion matrices on disk.
int cmd_report(const RunConfig& c) {
  bool any = false;
  for (const std::string name : {"accidental", "nefarious"}) {
    const auto dir = c.out / "reports" / name;
    if (!fs::exists(dir)) continue;
    std::vector<eval::ConfusionMatrix> cms;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto f = e.path().filename().string();
      if (f.rfind("confusion_", 0) == 0 && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) cms.push_back(eval::confusion_from_json(json::parse(read_text_file(f))));
    if (cms.empty()) continue;
    std::vector<std::string> methods;
    for (const auto& cm : cms) {
      if (std::find(methods.begin(), methods.end(), cm.method) == methods.end()) methods.push_back(cm.method);
    }
    // Keep the evaluation order: learned methods first, then the threshold tests.
    const auto rank = [](const std::string& m) {
      static const std::vector<std::string> order = {"gan", "lof", "iforest", "ocsvm"};
      const auto it = std::find(order.begin(), order.end(), m);
      return it == order.end() ? order.size() : static_cast<std::size_t>(it - order.begin());
    };
    std::stable_sort(methods.begin(), methods.end(), [&](const std::string& a, const std::string& b) {
      if (rank(a) != rank(b)) return rank(a) < rank(b);
      return a.rfind("hypothesis-z", 0) == 0 && b.rfind("hypothesis-z", 0) == 0
                 ? parse_double(a.substr(12)) < parse_double(b.substr(12))
                 : a < b;
    });
    std::vector<eval::AccuracyCurve> curves;
    for (const auto& m : methods) curves.push_back(eval::curve_from(m, cms));
    eval::emit_report(name, curves, cms, c.out);
    any = true;
    std::cout << name << "\n  method           ";
    for (const auto& [snr, acc] : curves.front().points) std::cout << " " << std::string(5 - std::min<std::size_t>(5, eval::snr_tag(snr).size()), ' ') << eval::snr_tag(snr);
    std::cout << "\n";
    for (const auto& cv : curves) {
      std::string label = cv.method;
      label.resize(17, ' ');
      std::cout << "  " << label;
      std::vector<double> x, y;
      for (const auto& [snr, acc] : cv.points) {
        std::cout << " " << format_fixed(acc, 3);
        x.push_back(snr);
        y.push_back(acc);
      }
      if (x.size() >= 2) {
        const double rho = eval::spearman(x, y);
        std::cout << "  spearman " << format_fixed(rho, 2) << (rho < 0.8 ? " (below 0.8)" : "");
      }
      std::cout << "\n";
    }
  }
  if (!any) throw std::runtime_error("no confusion matrices under " + (c.out / "reports").string() + "; run `csiauth eval` first");
  return 0;
}

int cmd_analytic(const RunConfig& c) {
  const std::vector<std::pair<int, int>> configs = {{1, 1}, {2, 2}, {4, 4}, {8, 8}};
  const std::vector<double> mults = c.z_mult_explicit ? c.z_mult : std::vector<double>{1, 2, 3, 4, 5, 6};
  analytic::SweepOptions opts;
  opts.lambda_ave = lambda_ave(noise_covariance(NoiseModel::from_snr_db(c.ref_snr_db)));
  const auto cells = analytic::sweep_fig3(configs, mults, c.sweep_trials, RngStream(c.seed), opts);
  std::ostringstream os;
  analytic::write_sweep_csv(os, cells);
  const auto path = c.out / "analytic" / "fig3.csv";
  write_text_file(path, os.str());
  std::cout << path.string() << "\n" << os.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"csiauth: physical-layer authentication from MIMO channel state information"};
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig cfg;
  std::uint64_t seed = 1;
  std::string out, config_path, snr_grid, z_mult;
  int jobs = 1;
  bool pooled = false;
  auto* o_seed = app.add_option("--seed", seed, "Master seed (u64) for every random stream");
  auto* o_out = app.add_option("--out", out, "Output directory (default: $CSIAUTH_OUT or ./csiauth-out)");
  app.add_option("--config", config_path, "JSON run configuration; command-line flags take precedence")
      ->check(CLI::ExistingFile);
  auto* o_jobs = app.add_option("--jobs", jobs, "Worker threads for per-SNR stages")->check(CLI::PositiveNumber);
  auto* o_pooled = app.add_flag("--pooled", pooled, "Train or evaluate one GAN pooled over all SNR levels");
  auto* o_grid = app.add_option("--snr-grid", snr_grid, "SNR grid as a:b:step in dB (default 0:30:2)");
  auto* o_z = app.add_option("--z-mult", z_mult, "Comma-separated threshold multipliers (default 1,3,5,6)");

  auto* gen = app.add_subcommand("gen", "Generate master, train, test, accidental and nefarious datasets");
  auto* train = app.add_subcommand("train", "Train GAN discriminators (per SNR, or pooled with --pooled)");
  std::optional<int> epochs;
  std::optional<double> tau;
  bool no_epoch_ckpt = false;
  train->add_option("--epochs", epochs, "Training epochs, at most 50");
  train->add_option("--tau", tau, "Acceptance threshold stored with the checkpoint (default 0.5)");
  train->add_flag("--no-epoch-checkpoints", no_epoch_ckpt, "Skip the per-epoch discriminator checkpoints");
  auto* fit = app.add_subcommand("fit-detector", "Fit one-class detectors per SNR on the training data");
  std::string algo;
  fit->add_option("--algo", algo, "Detector algorithm")->required()->check(CLI::IsMember({"lof", "iforest", "ocsvm"}));
  auto* evalc = app.add_subcommand("eval", "Evaluate every method on both test datasets and write reports");
  auto* analytic_cmd = app.add_subcommand("analytic", "Accidental-authentication probability sweep over MIMO sizes");
  std::optional<int> trials;
  std::optional<double> ref_snr;
  analytic_cmd->add_option("--trials", trials, "Reference matrices averaged per cell (default 2000)");
  analytic_cmd->add_option("--ref-snr", ref_snr, "SNR in dB whose noise sets the threshold scale (default 10)");
  auto* report = app.add_subcommand("report", "Rebuild accuracy tables and charts from stored confusion matrices");

  CLI11_PARSE(app, argc, argv);

  try {
    if (const char* env = std::getenv("CSIAUTH_OUT"); env != nullptr && *env != '\0') cfg.out = env;
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    if (o_seed->count()) cfg.seed = seed;
    if (o_out->count()) cfg.out = out;
    if (o_jobs->count()) cfg.jobs = jobs;
    if (o_pooled->count()) cfg.pooled = pooled;
    if (o_grid->count()) cfg.snr_grid = data::parse_snr_grid(snr_grid);
    if (o_z->count()) {
      cfg.z_mult = parse_list(z_mult);
      cfg.z_mult_explicit = true;
    }
    if (epochs) cfg.gan.max_epochs = *epochs;
    if (tau) {
      cfg.tau = *tau;
      cfg.tau_explicit = true;
    }
    if (no_epoch_ckpt) cfg.epoch_checkpoints = false;
    if (trials) cfg.sweep_trials = *trials;
    if (ref_snr) cfg.ref_snr_db = *ref_snr;
    cfg.gan.seed = cfg.seed;
    cfg.gan.validate();

    if (gen->parsed()) return cmd_gen(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (fit->parsed()) return cmd_fit(cfg, algo);
    if (evalc->parsed()) return cmd_eval(cfg);
    if (analytic_cmd->parsed()) return cmd_analytic(cfg);
    if (report->parsed()) return cmd_report(cfg);
  } catch (const std::exception& e) {
    std::cerr << "csiauth: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
