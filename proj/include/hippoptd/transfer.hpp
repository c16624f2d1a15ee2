/*
 * Copyright 2026 The hippoptd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "hippoptd/hippo.hpp"
#include "hippoptd/lti.hpp"
#include "hippoptd/types.hpp"

namespace hippoptd {

struct TransferSample {
  double sigma = 0.0;
  cplx value;
};

/// Transfer-function spikes of the diagonal initialization. Centers are the
/// frequencies where the winding angle a(s) crosses an odd multiple of pi.
struct SpikeReport {
  int n = 0;
  std::vector<double> spike_centers;
  std::optional<double> last_spike;
  std::vector<double> peak_gaps;
};

// ---------------------------------------------------------------------------
// Dense and diagonal transfer evaluation

/// G(s) = C (sI - A)^{-1} B + D at an arbitrary complex s.
inline CMatrix transfer_matrix(const LtiSystem& sys, cplx s) {
  validate(sys);
  const auto n = sys.states();
  CMatrix shifted = -sys.a;
  shifted.diagonal().array() += s;
  Eigen::PartialPivLU<CMatrix> lu(shifted);
  const CMatrix x = lu.solve(sys.b);
  const double resid = (shifted * x - sys.b).norm();
  const double bnorm = sys.b.norm();
  if (!std::isfinite(resid) || resid > 1e-8 * std::max(bnorm, 1e-300) ||
      n == 0) {
    throw NumericError("transfer_eval",
                       "resolvent solve is numerically singular");
  }
  return sys.c * x + sys.d;
}

inline CMatrix transfer_matrix(const DiagonalLti& sys, cplx s) {
  validate(sys);
  const CVector denom = (s - sys.lambda.array()).matrix();
  if ((denom.array().abs() == 0.0).any()) {
    throw NumericError("transfer_eval", "frequency sits on a pole");
  }
  const CVector inv = denom.cwiseInverse();
  return sys.c * inv.asDiagonal() * sys.b + sys.d;
}

/// SISO transfer value at s = i*sigma.
template <class System>
TransferSample transfer_eval(const System& sys, double sigma) {
  detail::require(sys.inputs() == 1 && sys.outputs() == 1,
                  "transfer_eval: system must be single-input single-output");
  return {sigma, transfer_matrix(sys, cplx(0.0, sigma))(0, 0)};
}

// ---------------------------------------------------------------------------
// Closed-form DPLR - diagonal gap

namespace detail {

/// s * W(s) with W(s) = (-1)^{n-1} prod_{j<n}(j - s) / prod_{j<=n}(j + s),
/// accumulated as log-magnitude and phase. s must be nonzero.
inline cplx winding_term(int n, cplx s) {
  double log_mag = std::log(std::abs(s));
  double phase = std::arg(s) + std::numbers::pi * (n - 1);
  for (int j = 1; j <= n; ++j) {
    const cplx den = static_cast<double>(j) + s;
    log_mag -= std::log(std::abs(den));
    phase -= std::arg(den);
    if (j < n) {
      const cplx num = static_cast<double>(j) - s;
      log_mag += std::log(std::abs(num));
      phase += std::arg(num);
    }
  }
  phase = std::remainder(phase, 2.0 * std::numbers::pi);
  return std::polar(std::exp(log_mag), phase);
}

}  // namespace detail

/// G_DPLR(s) - G_Diag(s) for C = e_ell^T V_H, in closed form. Valid on the
/// imaginary axis only.
inline cplx transfer_diff_closed(int n, int ell, cplx s) {
  detail::require(n >= 1, "transfer_diff_closed: n must be positive");
  detail::require(ell >= 1 && ell <= n,
                  "transfer_diff_closed: ell outside [1, n]");
  if (std::abs(s.real()) > 1e-12) {
    throw std::invalid_argument(
        "transfer_diff_closed: s must lie on the imaginary axis");
  }
  s = cplx(0.0, s.imag());
  if (s == cplx(0.0, 0.0)) return {0.0, 0.0};
  const cplx sw = detail::winding_term(n, s);
  return sw * resolvent_row(ell, s) / (1.0 + sw);
}

/// The S4/S4D system pair with C = e_ell^T V_H, used for dense gap checks.
struct GapPair {
  LtiSystem dplr;
  DiagonalLti diag;
};

inline GapPair make_gap_pair(int n, int ell) {
  return {init_dplr_system(n, OutputSpec::basis(ell)),
          init_diag_system(n, OutputSpec::basis(ell))};
}

// Near s = 0 the two transfer values agree to ~1e-9 of their size, so the
// solves run in long double before subtracting.
inline cplx transfer_diff_dense(const GapPair& pair, double sigma) {
  using ld = long double;
  using LC = std::complex<ld>;
  using LM = Eigen::Matrix<LC, Eigen::Dynamic, Eigen::Dynamic>;
  const LC s(0.0L, sigma);
  LM shifted = -pair.dplr.a.cast<LC>();
  shifted.diagonal().array() += s;
  const LM x = shifted.partialPivLu().solve(LM(pair.dplr.b.cast<LC>()));
  const LC g_dplr = (pair.dplr.c.cast<LC>() * x)(0, 0) + LC(pair.dplr.d(0, 0));
  LC g_diag = LC(pair.diag.d(0, 0));
  for (Eigen::Index k = 0; k < pair.diag.states(); ++k)
    g_diag += LC(pair.diag.c(0, k)) * LC(pair.diag.b(k, 0)) / (s - LC(pair.diag.lambda(k)));
  const LC diff = g_dplr - g_diag;
  const cplx out(static_cast<double>(diff.real()), static_cast<double>(diff.imag()));
  if (!std::isfinite(out.real()) || !std::isfinite(out.imag()))
    throw NumericError("transfer_diff_dense", "non-finite transfer difference");
  return out;
}

// ---------------------------------------------------------------------------
// Spikes

/// a(s) = arctan(n/s) + 2 sum_{j<n} arctan(j/s): the phase of s*W(s) at
/// frequency s on the positive imaginary axis. Strictly decreasing in s.
inline double angle(int n, double s) {
  detail::require(n >= 1, "angle: n must be positive");
  detail::require(s > 0.0, "angle: s must be positive");
  double acc = 0.0;
  for (int j = n - 1; j >= 1; --j) acc += std::atan(j / s);
  return std::atan(n / s) + 2.0 * acc;
}

namespace detail {

/// Root of angle(n, s) = target on [lo, hi], assuming angle(lo) >= target
/// >= angle(hi).
inline double bisect_angle(int n, double target, double lo, double hi) {
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (angle(n, mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline SpikeReport fill_peaks(SpikeReport rep) {
  rep.peak_gaps.reserve(rep.spike_centers.size());
  for (double c : rep.spike_centers) {
    rep.peak_gaps.push_back(
        std::abs(transfer_diff_closed(rep.n, 1, cplx(0.0, c))));
  }
  if (!rep.spike_centers.empty()) rep.last_spike = rep.spike_centers.back();
  return rep;
}

}  // namespace detail

inline SpikeReport find_spikes(int n, double s_min, double s_max) {
  detail::require(n >= 1, "find_spikes: n must be positive");
  detail::require(s_min > 0.0 && s_min < s_max,
                  "find_spikes: need 0 < s_min < s_max");
  constexpr double pi = std::numbers::pi;
  const double a_lo = angle(n, s_min);
  const double a_hi = angle(n, s_max);
  SpikeReport rep;
  rep.n = n;
  // a(s) = (2k + 1) pi, with k from the largest crossing down to 0.
  const long k_first = static_cast<long>(std::floor((a_lo / pi - 1.0) / 2.0));
  const long k_last = std::max(0L, static_cast<long>(std::ceil((a_hi / pi - 1.0) / 2.0)));
  double lo = s_min;
  for (long k = k_first; k >= k_last; --k) {
    const double target = (2.0 * k + 1.0) * pi;
    if (target > a_lo || target < a_hi) continue;
    const double root = detail::bisect_angle(n, target, lo, s_max);
    rep.spike_centers.push_back(root);
    lo = root;
  }
  return detail::fill_peaks(std::move(rep));
}

/// Largest spike center: the single root of a(s) = pi.
inline double last_spike(int n) {
  detail::require(n >= 1, "last_spike: n must be positive");
  constexpr double pi = std::numbers::pi;
  if (angle(n, 1e-300) <= pi) {
    throw NumericError("last_spike", "angle never reaches pi for this n");
  }
  double hi = std::max(1.0, static_cast<double>(n) * n / pi);
  while (angle(n, hi) > pi) hi *= 2.0;
  double lo = hi;
  while (angle(n, lo) <= pi) lo *= 0.5;
  return detail::bisect_angle(n, pi, lo, hi);
}

// ---------------------------------------------------------------------------
// Perturbation bound and sweeps

/// First-order uniform bound (2 ln n + 4) eps on |G_Pert - G_DPLR| under unit
/// normalization of the input and output vectors.
inline double perturbation_bound(int n, double eps) {
  detail::require(n >= 1, "perturbation_bound: n must be positive");
  detail::require(eps > 0.0 && eps < 1.0,
                  "perturbation_bound: eps must lie in (0, 1)");
  return (2.0 * std::log(static_cast<double>(n)) + 4.0) * eps;
}

/// ||(sI - A)^{-1}||_F^2.
inline double resolvent_frobenius_sq(const RMatrix& a, cplx s) {
  CMatrix shifted = -a.cast<cplx>();
  shifted.diagonal().array() += s;
  const CMatrix inv = shifted.partialPivLu().inverse();
  return inv.squaredNorm();
}

/// `count` log-spaced points from lo to hi inclusive.
inline std::vector<double> log_grid_points(double lo, double hi, int count) {
  detail::require(lo > 0.0 && hi > lo, "log_grid: need 0 < lo < hi");
  detail::require(count >= 2, "log_grid: need at least two points");
  std::vector<double> g(count);
  const double l0 = std::log(lo), l1 = std::log(hi);
  for (int i = 0; i < count; ++i) {
    g[i] = std::exp(l0 + (l1 - l0) * i / (count - 1));
  }
  g.front() = lo;
  g.back() = hi;
  return g;
}

/// `points_per_decade` log-spaced frequencies covering [lo, hi].
inline std::vector<double> log_grid(double lo, double hi,
                                    int points_per_decade = 64) {
  detail::require(lo > 0.0 && hi > lo, "log_grid: need 0 < lo < hi");
  detail::require(points_per_decade >= 1, "log_grid: density must be positive");
  const double decades = std::log10(hi / lo);
  const int count = std::max(2, static_cast<int>(std::ceil(decades * points_per_decade)) + 1);
  return log_grid_points(lo, hi, count);
}

namespace detail {

inline double gap_norm(const CMatrix& diff) {
  if (diff.size() == 1) return std::abs(diff(0, 0));
  return spectral_norm(diff);
}

}  // namespace detail

/// |G_A(i sigma) - G_B(i sigma)| per grid point; operator 2-norm for MIMO.
template <class SysA, class SysB>
std::vector<std::pair<double, double>> sensitivity_profile(
    const SysA& a, const SysB& b, const std::vector<double>& grid) {
  detail::require(a.inputs() == b.inputs() && a.outputs() == b.outputs(),
                  "sensitivity_profile: systems must share input/output sizes");
  std::vector<std::pair<double, double>> out;
  out.reserve(grid.size());
  for (double sigma : grid) {
    const cplx s(0.0, sigma);
    out.emplace_back(sigma,
                     detail::gap_norm(transfer_matrix(a, s) - transfer_matrix(b, s)));
  }
  return out;
}

}  // namespace hippoptd
