// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "csiauth/rng.hpp"

namespace csiauth {

using ComplexValue = std::complex<double>;

inline bool is_finite(ComplexValue c) noexcept {
  return std::isfinite(c.real()) && std::isfinite(c.imag());
}

/// N x M matrix of complex channel gains (N receive, M transmit antennas),
/// stored row-major. Every element is finite.
class CsiMatrix {
 public:
  CsiMatrix() = default;

  CsiMatrix(int n_rx, int m_tx) : n_rx_(n_rx), m_tx_(m_tx) {
    if (n_rx < 1 || m_tx < 1) {
      throw std::invalid_argument("CsiMatrix: dimensions must be positive, got " +
                                  std::to_string(n_rx) + "x" + std::to_string(m_tx));
    }
    elements_.assign(static_cast<std::size_t>(n_rx) * m_tx, ComplexValue{});
  }

  CsiMatrix(int n_rx, int m_tx, std::vector<ComplexValue> elements) : CsiMatrix(n_rx, m_tx) {
    if (elements.size() != elements_.size()) {
      throw std::invalid_argument("CsiMatrix: expected " + std::to_string(elements_.size()) +
                                  " elements, got " + std::to_string(elements.size()));
    }
    for (const auto& e : elements) {
      if (!is_finite(e)) throw std::invalid_argument("CsiMatrix: non-finite element");
    }
    elements_ = std::move(elements);
  }

  /// Inverse of flatten(): values are (re, im) pairs in row-major element order.
  static CsiMatrix from_flat(int n_rx, int m_tx, std::span<const double> values) {
    if (values.size() != 2 * static_cast<std::size_t>(n_rx) * m_tx) {
      throw std::invalid_argument("CsiMatrix::from_flat: expected " +
                                  std::to_string(2 * n_rx * m_tx) + " reals, got " +
                                  std::to_string(values.size()));
    }
    std::vector<ComplexValue> elems(values.size() / 2);
    for (std::size_t i = 0; i < elems.size(); ++i) elems[i] = {values[2 * i], values[2 * i + 1]};
    return CsiMatrix(n_rx, m_tx, std::move(elems));
  }

  int n_rx() const noexcept { return n_rx_; }
  int m_tx() const noexcept { return m_tx_; }
  std::size_t size() const noexcept { return elements_.size(); }

  ComplexValue& at(int n, int m) { return elements_.at(index(n, m)); }
  const ComplexValue& at(int n, int m) const { return elements_.at(index(n, m)); }
  ComplexValue& operator[](std::size_t i) { return elements_[i]; }
  const ComplexValue& operator[](std::size_t i) const { return elements_[i]; }

  std::span<const ComplexValue> elements() const noexcept { return elements_; }

  bool same_shape(const CsiMatrix& other) const noexcept {
    return n_rx_ == other.n_rx_ && m_tx_ == other.m_tx_;
  }

  /// Row-major, real part then imaginary part per element.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(2 * elements_.size());
    for (const auto& e : elements_) {
      out.push_back(e.real());
      out.push_back(e.imag());
    }
    return out;
  }

  bool operator==(const CsiMatrix&) const = default;

 private:
  std::size_t index(int n, int m) const {
    if (n < 0 || n >= n_rx_ || m < 0 || m >= m_tx_) throw std::out_of_range("CsiMatrix index");
    return static_cast<std::size_t>(n) * m_tx_ + m;
  }

  int n_rx_ = 0;
  int m_tx_ = 0;
  std::vector<ComplexValue> elements_;
};

/// Receiver measurement noise. Channel elements carry unit power, so the
/// per-element complex noise variance is 10^(-snr/10). An infinite SNR gives
/// a noiseless receiver.
struct NoiseModel {
  double snr_db = 0.0;
  double sigma2 = 1.0;

  static NoiseModel from_snr_db(double snr_db) {
    if (std::isnan(snr_db)) throw std::invalid_argument("NoiseModel: SNR is NaN");
    return NoiseModel{snr_db, std::pow(10.0, -snr_db / 10.0)};
  }
};

/// i.i.d. CN(0,1) elements: real and imaginary parts each N(0, 1/2).
inline CsiMatrix sample_csi(int n_rx, int m_tx, RngStream& rng) {
  CsiMatrix h(n_rx, m_tx);
  const double sd = std::sqrt(0.5);
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double re = rng.normal(0.0, sd);
    const double im = rng.normal(0.0, sd);
    h[i] = {re, im};
  }
  return h;
}

/// Returns H + e with e i.i.d. CN(0, sigma2).
inline CsiMatrix add_measurement_error(const CsiMatrix& h, const NoiseModel& noise, RngStream& rng) {
  CsiMatrix out = h;
  if (noise.sigma2 == 0.0) return out;
  if (!(noise.sigma2 > 0.0) || !std::isfinite(noise.sigma2)) {
    throw std::invalid_argument("add_measurement_error: noise variance must be finite and >= 0");
  }
  const double sd = std::sqrt(noise.sigma2 / 2.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double re = rng.normal(0.0, sd);
    const double im = rng.normal(0.0, sd);
    out[i] += ComplexValue{re, im};
  }
  return out;
}

/// Element-wise sample mean of repeated measurements.
inline CsiMatrix estimate_csi(std::span<const CsiMatrix> samples) {
  if (samples.empty()) throw std::invalid_argument("estimate_csi: no samples");
  CsiMatrix mean(samples.front().n_rx(), samples.front().m_tx());
  for (const auto& s : samples) {
    if (!s.same_shape(mean)) throw std::invalid_argument("estimate_csi: shape mismatch");
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += s[i];
  }
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] *= inv;
  return mean;
}

}  // namespace csiauth
