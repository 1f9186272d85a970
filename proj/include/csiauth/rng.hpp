// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace csiauth {

/// FNV-1a over the label bytes, mixed with the SNR (in milli-dB) and an index.
/// Used to derive sub-stream identifiers so generation order never matters.
inline std::uint64_t derive_stream_id(std::string_view label, double snr_db = 0.0,
                                      std::int64_t index = 0) noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t byte) {
    h ^= byte;
    h *= 1099511628211ULL;
  };
  for (unsigned char c : label) mix(c);
  mix(0xff);
  const auto snr_key = static_cast<std::int64_t>(std::llround(snr_db * 1000.0));
  for (int i = 0; i < 8; ++i) mix((static_cast<std::uint64_t>(snr_key) >> (8 * i)) & 0xff);
  for (int i = 0; i < 8; ++i) mix((static_cast<std::uint64_t>(index) >> (8 * i)) & 0xff);
  return h;
}

/// A seeded pseudo-random stream. Equal (seed, stream_id) pairs produce equal
/// sequences. Gaussian variates use the Marsaglia polar method over a
/// 53-bit uniform taken from a 64-bit Mersenne Twister.
class RngStream {
 public:
  RngStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0) : seed_(seed), stream_id_(stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Independent stream sharing this stream's seed.
  RngStream derive(std::string_view label, double snr_db = 0.0, std::int64_t index = 0) const {
    return RngStream(seed_, derive_stream_id(label, snr_db, index) ^ stream_id_);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal variate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace csiauth
