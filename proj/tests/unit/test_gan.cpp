// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>

#include "csiauth/gan.hpp"

using namespace csiauth;
using namespace csiauth::gan;
using data::Label;
using data::Sample;

namespace {

std::vector<Sample> legit_slice(double snr, int n, std::uint64_t seed) {
  RngStream root(seed);
  auto master = data::build_master(root, {snr}, n);
  return master.samples;
}

}  // namespace

TEST_CASE("architectures", "[gan]") {
  const auto d = build_discriminator();
  const auto g = build_generator();
  CHECK(d.param_count() == 4225);
  CHECK(g.param_count() == 4832);
  CHECK(d.input_dim() == 32);
  CHECK(d.output_dim() == 1);
  CHECK(g.input_dim() == 5);
  CHECK(g.output_dim() == 32);
  CHECK(d.layers().back().activation.kind == nn::ActivationKind::sigmoid);
  CHECK(d.dropout() == std::vector<double>{0.2, 0.2, 0.0});
  CHECK(d.layers()[0].activation == nn::Activation::leaky_relu(0.3));
  CHECK(g.layers()[2].activation.kind == nn::ActivationKind::tanh);
  CHECK(g.layers()[3].activation.kind == nn::ActivationKind::linear);
}

TEST_CASE("discriminator output is a probability", "[gan]") {
  const auto d = build_discriminator();
  RngStream rng(8);
  for (int i = 0; i < 200; ++i) {
    const auto h = sample_csi(4, 4, rng);
    const double raw = nn::predict(d, h.flatten())[0];
    CHECK(raw > 0.0);
    CHECK(raw < 1.0);
  }
  // Large inputs saturate the sigmoid; the reported score stays open-interval.
  CsiMatrix big(4, 4);
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = {1e6 * (i % 2 ? 1 : -1), 1e6};
  const auto r = authenticate(d, big);
  CHECK(r.score > 0.0);
  CHECK(r.score < 1.0);
}

TEST_CASE("adversarial steps update only their own network", "[gan]") {
  TrainConfig cfg;
  Trainer t(cfg, RngStream(4));
  const auto real = to_columns(legit_slice(20, 64, 4));
  const auto g0 = t.generator().parameters();
  const auto d0 = t.discriminator().parameters();
  const auto ds = t.d_step(real);
  CHECK(t.generator().parameters() == g0);
  CHECK(t.discriminator().parameters() != d0);
  CHECK(ds.acc_real >= 0.0);
  CHECK(ds.acc_real <= 1.0);
  const auto d1 = t.discriminator().parameters();
  const auto gs = t.g_step(64);
  CHECK(t.discriminator().parameters() == d1);
  CHECK(t.generator().parameters() != g0);
  CHECK(std::isfinite(gs.loss));
}

TEST_CASE("training", "[gan]") {
  const auto data = legit_slice(20, 200, 5);
  TrainConfig cfg;
  cfg.max_epochs = 3;
  std::vector<int> seen;
  const auto a = train_gan(data, cfg, RngStream(9), [&](int e, const nn::Mlp& d, const TrainReport& r) {
    seen.push_back(e);
    CHECK(d.param_count() == 4225);
    CHECK(r.epochs_run == e);
  });
  CHECK(seen == std::vector<int>{1, 2, 3});
  CHECK(a.report.epochs_run == 3);
  CHECK(a.report.d_loss.size() == 3);
  for (double v : a.report.d_loss) CHECK(std::isfinite(v));

  SECTION("deterministic for a fixed stream") {
    const auto b = train_gan(data, cfg, RngStream(9));
    CHECK(b.discriminator.parameters() == a.discriminator.parameters());
    CHECK(b.report == a.report);
    const auto c = train_gan(data, cfg, RngStream(10));
    CHECK(c.discriminator.parameters() != a.discriminator.parameters());
  }
  SECTION("report csv") {
    const auto csv = report_csv(a.report);
    CHECK(csv.rfind("epoch,d_loss,g_loss,acc_real,acc_fake\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  }
  SECTION("invalid input") {
    CHECK_THROWS_AS(train_gan({}, cfg, RngStream(1)), std::invalid_argument);
    auto bad = data;
    bad[3].label = Label::illegitimate;
    CHECK_THROWS_AS(train_gan(bad, cfg, RngStream(1)), std::invalid_argument);
    TrainConfig too_long = cfg;
    too_long.max_epochs = 51;
    CHECK_THROWS_AS(train_gan(data, too_long, RngStream(1)), std::invalid_argument);
    too_long.max_epochs = 0;
    CHECK_THROWS_AS(train_gan(data, too_long, RngStream(1)), std::invalid_argument);
  }
}

TEST_CASE("authenticate", "[gan]") {
  const auto d = build_discriminator();
  RngStream rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto h = sample_csi(4, 4, rng);
    CHECK(authenticate(d, h, 0.0).accept);
    CHECK_FALSE(authenticate(d, h, 1.0).accept);
    const auto r = authenticate(d, h);
    CHECK(r.accept == (r.score >= 0.5));
  }
  CHECK_THROWS_AS(authenticate(d, sample_csi(2, 2, rng)), std::invalid_argument);
  CHECK_THROWS_AS(authenticate(build_generator(), sample_csi(4, 4, rng)), std::invalid_argument);
}

TEST_CASE("column layout matches flatten", "[gan]") {
  const auto data = legit_slice(5, 3, 6);
  const auto x = to_columns(data);
  CHECK(x.rows() == 32);
  CHECK(x.cols() == 3);
  for (int c = 0; c < 3; ++c) {
    const auto flat = data[c].csi.flatten();
    for (int r = 0; r < 32; ++r) CHECK(x(r, c) == flat[r]);
    CHECK(x(0, c) == data[c].csi[0].real());
    CHECK(x(1, c) == data[c].csi[0].imag());
  }
}
