// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "csiauth/auth_threshold.hpp"
#include "csiauth/channel.hpp"
#include "csiauth/rng.hpp"

namespace csiauth::analytic {

/// Acceptance disk around one enrolled element (a + jb).
struct DiskRegion {
  double center_re = 0.0;
  double center_im = 0.0;
  double radius = 0.0;
};

/// Impostor element u + jv with u, v independent N(0, sigma2 / 2).
struct GaussianSpec {
  double sigma2 = 1.0;  // total complex variance

  double component_sd() const { return std::sqrt(sigma2 / 2.0); }
};

/// How the normalizing sigma in the product-of-Q form is read.
enum class SigmaReading {
  component_sd,  // divide by sqrt(sigma2 / 2): matches the integral exactly
  total_sd,      // divide by sqrt(sigma2) as printed
};

/// Upper-tail probability of the standard normal.
inline double q_function(double x) {
  if (std::isnan(x)) throw std::invalid_argument("q_function: NaN input");
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

namespace detail {

template <class F>
double simpson_step(const F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                    int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance `tol`.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol = 1e-10, int max_depth = 40) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

namespace detail {

/// Integrates g(theta) over the slice of [-pi/2, pi/2] where u = a + z sin(theta)
/// keeps non-negligible Gaussian mass, split at the u = 0 crossing.
template <class G>
double integrate_over_disk_angle(const G& g, double a, double z, double s, double tol) {
  constexpr double kTail = 12.0;  // P(|u| > 12 sd) < 1e-32
  const auto clamp_sin = [](double x) { return std::asin(std::clamp(x, -1.0, 1.0)); };
  const double lo = clamp_sin((-kTail * s - a) / z);
  const double hi = clamp_sin((kTail * s - a) / z);
  if (!(hi > lo)) return 0.0;
  std::vector<double> cuts{lo, hi};
  const double peak = clamp_sin(-a / z);
  if (peak > lo && peak < hi) cuts.push_back(peak);
  constexpr int kPieces = 8;
  for (int i = 1; i < kPieces; ++i) cuts.push_back(lo + (hi - lo) * i / kPieces);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    total += adaptive_simpson(g, cuts[i], cuts[i + 1], tol / static_cast<double>(cuts.size()));
  }
  return total;
}

inline void check_region(const DiskRegion& region, const GaussianSpec& g) {
  if (!(region.radius >= 0.0)) throw std::invalid_argument("disk probability: radius must be >= 0");
  if (!(g.sigma2 > 0.0)) throw std::invalid_argument("disk probability: sigma2 must be > 0");
}

}  // namespace detail

/// P(u + jv in disk) by one-dimensional quadrature over u of the exact
/// conditional probability of v. The substitution u = a + z sin(theta)
/// removes the square-root endpoint singularity.
inline double disk_probability_exact(const DiskRegion& region, const GaussianSpec& g) {
  detail::check_region(region, g);
  const double z = region.radius;
  if (z == 0.0) return 0.0;
  if (std::isinf(z)) return 1.0;
  const double a = region.center_re, b = region.center_im;
  const double s = g.component_sd();
  const double inv_norm = 1.0 / (s * std::sqrt(2.0 * std::numbers::pi));
  const auto integrand = [&](double theta) {
    const double u = a + z * std::sin(theta);
    const double w = z * std::cos(theta);
    const double density = inv_norm * std::exp(-0.5 * (u / s) * (u / s));
    // P(b - w <= v <= b + w), evaluated on the tail nearer zero for accuracy.
    const double lo = (b - w) / s, hi = (b + w) / s;
    const double inner = lo >= 0.0 ? q_function(lo) - q_function(hi) : (q_function(-hi) - q_function(-lo));
    return density * inner * w;  // du = z cos(theta) dtheta = w dtheta
  };
  const double p = detail::integrate_over_disk_angle(integrand, a, z, s, 1e-10);
  return std::clamp(p, 0.0, 1.0);
}

/// Limits of the product-of-Q form at a fixed u. A, B bound u; C, D bound v.
struct QLimits {
  double A, B, C, D;
};

inline double sigma_for(const GaussianSpec& g, SigmaReading reading) {
  return reading == SigmaReading::component_sd ? g.component_sd() : std::sqrt(g.sigma2);
}

inline QLimits q_limits(const DiskRegion& r, const GaussianSpec& g, double u,
                        SigmaReading reading = SigmaReading::component_sd) {
  const double sigma = sigma_for(g, reading);
  const double du = u - r.center_re;
  const double w = std::sqrt(std::max(0.0, r.radius * r.radius - du * du));
  return {(r.center_re - r.radius) / sigma, (r.center_re + r.radius) / sigma,
          (r.center_im - w) / sigma, (r.center_im + w) / sigma};
}

/// The printed product (Q(A) - Q(B)) * (Q(C) - Q(D)) at a single fixed u.
/// This is P(X) * P(Y | u) and only documents the shorthand; the probability
/// of the disk needs the u-integral below.
inline double paper_product_at(const DiskRegion& r, const GaussianSpec& g, double u,
                               SigmaReading reading = SigmaReading::component_sd) {
  const QLimits q = q_limits(r, g, u, reading);
  return (q_function(q.A) - q_function(q.B)) * (q_function(q.C) - q_function(q.D));
}

/// Product-of-Q route: P(X) * E[P(Y | u) | X], where P(X) = Q(A) - Q(B) and the
/// conditional expectation integrates Q(C) - Q(D) against the density of u
/// truncated to [a - z, a + z]. Integration runs in the standardized variable
/// t = u / sigma with plain composite Simpson, independent of the exact route.
inline double disk_probability_paper(const DiskRegion& region, const GaussianSpec& g,
                                     SigmaReading reading = SigmaReading::component_sd,
                                     int panels = 4000) {
  detail::check_region(region, g);
  if (region.radius == 0.0) return 0.0;
  if (std::isinf(region.radius)) return 1.0;
  const double sigma = sigma_for(g, reading);
  const QLimits outer = q_limits(region, g, region.center_re, reading);
  const double p_x = q_function(outer.A) - q_function(outer.B);
  if (p_x <= 0.0) return 0.0;
  // Clip the standardized range to where the normal density matters.
  const double t_lo = std::max(outer.A, -12.0), t_hi = std::min(outer.B, 12.0);
  if (!(t_hi > t_lo)) return 0.0;
  // Substitute t = t_mid + half * sin(phi) so the endpoint sqrt behaviour is smooth.
  const double t_mid = 0.5 * (outer.A + outer.B), half = 0.5 * (outer.B - outer.A);
  const double phi_lo = std::asin(std::clamp((t_lo - t_mid) / half, -1.0, 1.0));
  const double phi_hi = std::asin(std::clamp((t_hi - t_mid) / half, -1.0, 1.0));
  const int n = panels % 2 == 0 ? panels : panels + 1;
  const double h = (phi_hi - phi_lo) / n;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double phi = phi_lo + i * h;
    const double t = t_mid + half * std::sin(phi);
    const QLimits q = q_limits(region, g, t * sigma, reading);
    const double weight = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    const double phi_t = inv_sqrt_2pi * std::exp(-0.5 * t * t);
    sum += weight * phi_t * (q_function(q.C) - q_function(q.D)) * half * std::cos(phi);
  }
  // sum * h / 3 integrates phi(t) P(Y | t) over X; dividing by P(X) gives P(Y | X).
  const double p_y_given_x = sum * h / 3.0 / p_x;
  return std::clamp(p_y_given_x * p_x, 0.0, 1.0);
}

/// Probability that an independent CN(0, sigma2) impostor matrix passes the
/// disk test at every element.
inline double auth_probability(const CsiMatrix& centers, double radius, const GaussianSpec& g) {
  if (!(radius >= 0.0)) throw std::invalid_argument("auth_probability: radius must be >= 0");
  double p = 1.0;
  for (const auto& c : centers.elements()) {
    p *= disk_probability_exact({c.real(), c.imag(), radius}, g);
    if (p == 0.0) break;
  }
  return p;
}

struct SweepCell {
  int n_rx = 0;
  int m_tx = 0;
  double multiplier = 0.0;
  double probability = 0.0;  // mean over random reference matrices
  double std_error = 0.0;    // standard error of that mean
};

struct SweepOptions {
  /// lambda_ave that scales the radius: z = multiplier * sqrt(lambda_ave).
  double lambda_ave = 0.05;
  /// Impostor and reference element variance (components N(0, 0.5)).
  double sigma2 = 1.0;
};

/// Mean accidental-authentication probability per (configuration, multiplier),
/// averaged over `trials` reference matrices with CN(0, 1) elements.
inline std::vector<SweepCell> sweep_fig3(const std::vector<std::pair<int, int>>& configs,
                                         const std::vector<double>& multipliers, int trials,
                                         const RngStream& rng, const SweepOptions& opts = {}) {
  if (configs.empty() || multipliers.empty()) throw std::invalid_argument("sweep_fig3: empty grid");
  if (trials < 1) throw std::invalid_argument("sweep_fig3: trials must be >= 1");
  std::vector<SweepCell> out;
  const GaussianSpec g{opts.sigma2};
  for (const auto& [n, m] : configs) {
    // The same references serve every multiplier so cells are comparable.
    RngStream refs = rng.derive("fig3-reference", 0.0, static_cast<std::int64_t>(n) * 1000 + m);
    std::vector<CsiMatrix> references;
    references.reserve(trials);
    for (int t = 0; t < trials; ++t) references.push_back(sample_csi(n, m, refs));
    for (double mult : multipliers) {
      const double radius = Threshold(mult, opts.lambda_ave).z();
      double sum = 0.0, sum2 = 0.0;
      for (const auto& h : references) {
        const double p = auth_probability(h, radius, g);
        sum += p;
        sum2 += p * p;
      }
      const double mean = sum / trials;
      const double var = trials > 1 ? std::max(0.0, (sum2 - trials * mean * mean) / (trials - 1)) : 0.0;
      out.push_back({n, m, mult, mean, std::sqrt(var / trials)});
    }
  }
  return out;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepCell>& cells) {
  os << "n_rx,m_tx,multiplier,probability\n";
  char buf[64];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof buf, "%.17g", c.multiplier);
    os << c.n_rx << ',' << c.m_tx << ',' << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", c.probability);
    os << buf << '\n';
  }
}

}  // namespace csiauth::analytic
