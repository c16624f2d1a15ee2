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
#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hippoptd/eig.hpp"
#include "hippoptd/fit.hpp"
#include "hippoptd/hippo.hpp"
#include "hippoptd/lti.hpp"
#include "hippoptd/transfer.hpp"
#include "hippoptd/types.hpp"

namespace hippoptd {

enum class PerturbationStructure { kComplexDense, kRealDense, kRealSymmetric };

struct PtdOptions {
  int max_iters = 2000;
  double step = 0.0;  // 0 selects 1e-2 * ||a|| / sqrt(n)
  double tol = 1e-6;
  std::uint64_t seed = 0;
  PerturbationStructure structure = PerturbationStructure::kComplexDense;
  double kappa_power = 2.0;
};

struct PtdResult {
  CMatrix e;
  CMatrix v;  // unit 2-norm columns
  CVector lambda;
  double kappa_v = 0.0;
  double e_norm = 0.0;
  double gamma = 0.0;
  std::vector<double> trace;  // objective per accepted or rejected iterate
  std::uint64_t seed = 0;
  int iterations = 0;
  bool stagnated = false;
};

/// Value and gradient of kappa(V(a + e)) + gamma * ||e||_2.
struct ObjectiveEval {
  double value = 0.0;
  double kappa = 0.0;
  double e_norm = 0.0;
  CMatrix gradient;  // w.r.t. the real inner product Re tr(X^H Y)
  EigResult eig;
};

namespace detail {

inline CMatrix project(const CMatrix& g, PerturbationStructure s) {
  switch (s) {
    case PerturbationStructure::kComplexDense:
      return g;
    case PerturbationStructure::kRealDense:
      return g.real().cast<cplx>();
    case PerturbationStructure::kRealSymmetric: {
      const RMatrix r = g.real();
      return (0.5 * (r + r.transpose())).cast<cplx>();
    }
  }
  return g;
}

}  // namespace detail

/// Gradient of kappa(U) where U is the unit-column eigenvector matrix of m.
/// Differentiates through the eigendecomposition at simple eigenvalues:
/// dV = V (F o (V^{-1} dM V)), F_jk = 1 / (lambda_k - lambda_j), followed by
/// the column-normalization derivative and the top/bottom singular pairs.
inline CMatrix kappa_gradient(const EigResult& eig) {
  const CMatrix& u = eig.v;
  const auto n = u.rows();
  Eigen::JacobiSVD<CMatrix> svd(u, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv(0), smin = sv(n - 1);
  CMatrix g = svd.matrixU().col(0) * svd.matrixV().col(0).adjoint() / smin -
              (smax / (smin * smin)) * svd.matrixU().col(n - 1) *
                  svd.matrixV().col(n - 1).adjoint();
  // Normalization map is self-adjoint: x -> x - u Re(u^H x), per column.
  for (Eigen::Index k = 0; k < n; ++k) {
    const double re = (u.col(k).adjoint() * g.col(k)).value().real();
    g.col(k) -= re * u.col(k);
  }
  CMatrix h = u.adjoint() * g;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < n; ++k) {
      h(j, k) = j == k ? cplx(0.0) : h(j, k) / std::conj(eig.lambda(k) - eig.lambda(j));
    }
  }
  Eigen::PartialPivLU<CMatrix> lu(u);
  // grad = U^{-H} H U^H
  return lu.adjoint().solve(h * u.adjoint());
}

inline ObjectiveEval evaluate_objective(const CMatrix& a, const CMatrix& e,
                                        double gamma, double kappa_power,
                                        bool with_gradient = true) {
  ObjectiveEval out;
  out.eig = kappa_eig_upper(a + e);
  out.kappa = out.eig.kappa;
  Eigen::JacobiSVD<CMatrix> esvd(e, with_gradient ? (Eigen::ComputeThinU | Eigen::ComputeThinV) : 0);
  out.e_norm = esvd.singularValues()(0);
  out.value = std::pow(out.kappa, kappa_power) + gamma * out.e_norm;
  if (with_gradient) {
    out.gradient = (kappa_power * std::pow(out.kappa, kappa_power - 1.0)) *
                   kappa_gradient(out.eig);
    if (out.e_norm > 0.0) {
      out.gradient += gamma * esvd.matrixU().col(0) * esvd.matrixV().col(0).adjoint();
    }
  }
  return out;
}

namespace detail {

inline CMatrix initial_perturbation(const CMatrix& a, const PtdOptions& opts) {
  const auto n = static_cast<int>(a.rows());
  CMatrix e0 = project(ginibre(n, opts.seed), opts.structure);
  const double target = 1e-2 * spectral_norm(a);
  const double nrm = spectral_norm(e0);
  return e0 * (target / nrm);
}

}  // namespace detail

/// Gradient descent on kappa(V) + gamma ||E|| from a seeded E_0 with
/// ||E_0|| = 1e-2 ||a||. Steps have fixed Frobenius length along the
/// normalized (projected) gradient; a step that increases the objective or
/// lands on a defective matrix is rejected and the length halved.
inline PtdResult optimize_perturbation(const CMatrix& a, double gamma,
                                       const PtdOptions& opts = {}) {
  detail::require(a.rows() == a.cols() && a.rows() >= 1,
                  "optimize_perturbation: matrix must be square");
  detail::require(gamma > 0.0, "optimize_perturbation: gamma must be positive");
  detail::require(opts.max_iters >= 0, "optimize_perturbation: negative iteration budget");
  const auto n = a.rows();
  const double anorm = detail::spectral_norm(a);
  double step = opts.step > 0.0 ? opts.step : 1e-2 * anorm / std::sqrt(static_cast<double>(n));
  const double min_step = 1e-14 * std::max(anorm, 1.0);
  constexpr double kGrowth = 1.25;

  CMatrix e = detail::initial_perturbation(a, opts);
  ObjectiveEval cur = evaluate_objective(a, e, gamma, opts.kappa_power);
  PtdResult res;
  res.gamma = gamma;
  res.seed = opts.seed;
  res.trace.push_back(cur.value);

  // Relative improvement of the objective over a sliding window decides
  // convergence; single steps can be tiny while the step length recovers.
  constexpr int kWindow = 25;
  int it = 0;
  for (; it < opts.max_iters; ++it) {
    const CMatrix dir = detail::project(cur.gradient, opts.structure);
    const double gnorm = dir.norm();
    if (!(gnorm > 0.0)) break;
    bool accepted = false;
    while (!accepted && step >= min_step) {
      const CMatrix trial = e - (step / gnorm) * dir;
      try {
        ObjectiveEval next = evaluate_objective(a, trial, gamma, opts.kappa_power);
        if (next.value < cur.value) {
          e = trial;
          cur = std::move(next);
          accepted = true;
          step *= kGrowth;
        } else {
          step *= 0.5;
        }
      } catch (const NumericError&) {
        step *= 0.5;
      }
    }
    res.trace.push_back(cur.value);
    if (!accepted) {
      res.stagnated = true;
      break;
    }
    const auto len = res.trace.size();
    if (len > kWindow) {
      const double old_val = res.trace[len - 1 - kWindow];
      if ((old_val - cur.value) <= opts.tol * kWindow * std::abs(old_val)) break;
    }
  }
  res.iterations = it;
  res.e = e;
  res.v = cur.eig.v;
  res.lambda = cur.eig.lambda;
  res.kappa_v = cur.kappa;
  res.e_norm = cur.e_norm;
  return res;
}

/// Where the perturbation of A_H comes from.
struct GammaSource {
  double gamma = 0.0;
  PtdOptions opts{};
};
struct ExplicitSource {
  CMatrix e;
};
struct GinibreSource {
  double eps = 0.0;
};
using PerturbationSource = std::variant<GammaSource, ExplicitSource, GinibreSource>;

/// Diagonal initialization from A_H + E = V diag(lambda) V^{-1}.
struct PtdInit {
  int n = 0;
  CVector lambda;
  CMatrix b_pert;  // V^{-1} B_H
  CMatrix v;
  CMatrix e;
  std::uint64_t seed = 0;
  std::optional<double> gamma;
  double e_norm = 0.0;
  double kappa_v = 0.0;

  /// ||V diag(lambda) V^{-1} - E - A_H||_2.
  double backward_error() const {
    const RMatrix a = build_hippo(n).a;
    const CMatrix recon = v * lambda.asDiagonal() * v.partialPivLu().inverse();
    return detail::spectral_norm(CMatrix(recon - e - a.cast<cplx>()));
  }
};

inline PtdInit ptd_initialize(int n, const PerturbationSource& source,
                              std::uint64_t seed = 0) {
  detail::require(n >= 1, "ptd_initialize: n must be positive");
  const auto pair = build_hippo(n);
  const CMatrix a = pair.a.cast<cplx>();
  PtdInit out;
  out.n = n;
  out.seed = seed;
  EigResult eig;
  if (const auto* g = std::get_if<GammaSource>(&source)) {
    detail::require(g->gamma > 0.0, "ptd_initialize: gamma must be positive");
    PtdOptions opts = g->opts;
    opts.seed = seed;
    const PtdResult r = optimize_perturbation(a, g->gamma, opts);
    out.e = r.e;
    out.gamma = g->gamma;
    eig = EigResult{r.kappa_v, r.v, r.lambda, {}};
  } else {
    if (const auto* x = std::get_if<ExplicitSource>(&source)) {
      detail::require(x->e.rows() == n && x->e.cols() == n,
                      "ptd_initialize: perturbation must be n x n");
      out.e = x->e;
    } else {
      const double eps = std::get<GinibreSource>(source).eps;
      detail::require(eps >= 0.0, "ptd_initialize: eps must be non-negative");
      out.e = eps * ginibre(n, seed);
    }
    eig = kappa_eig_upper(a + out.e);
  }
  out.v = eig.v;
  out.lambda = eig.lambda;
  out.kappa_v = eig.kappa;
  out.e_norm = out.e.isZero(0.0) ? 0.0 : detail::spectral_norm(out.e);
  Eigen::PartialPivLU<CMatrix> lu(out.v);
  out.b_pert = lu.solve(pair.b.cast<cplx>());
  return out;
}

/// Diagonal system (lambda, V^{-1} B_H, C, 0). A mode-basis output row is
/// e_l^T V so the system shares the HiPPO output e_l^T.
inline DiagonalLti ptd_system(const PtdInit& init, const OutputSpec& c_spec) {
  DiagonalLti sys;
  sys.lambda = init.lambda;
  sys.b = init.b_pert;
  sys.c = detail::make_output_row(c_spec, init.v, init.seed);
  sys.d = CMatrix::Zero(1, 1);
  return sys;
}

/// sup over the grid of |G_pert - G_hippo| with b = B_H / ||B_H|| and
/// c = e_1^T, both taken in HiPPO coordinates so every normalization the
/// first-order bound needs holds exactly.
inline double measure_perturbation_gap(const PtdInit& init,
                                       const std::vector<double>& grid) {
  const auto pair = build_hippo(init.n);
  const CMatrix a = pair.a.cast<cplx>();
  const CVector b = pair.b.col(0).cast<cplx>() / pair.b.norm();
  const Eigen::PartialPivLU<CMatrix> vlu(init.v);
  const CVector vb = vlu.solve(b);
  const CVector cv = init.v.row(0).transpose();
  double sup = 0.0;
  for (double sigma : grid) {
    const cplx s(0.0, sigma);
    CMatrix shifted = -a;
    shifted.diagonal().array() += s;
    const cplx g_ref = shifted.partialPivLu().solve(b)(0);
    cplx g_pert(0.0);
    for (Eigen::Index k = 0; k < init.n; ++k) g_pert += cv(k) * vb(k) / (s - init.lambda(k));
    sup = std::max(sup, std::abs(g_pert - g_ref));
  }
  return sup;
}

/// E = eps * G / ||G|| for a seeded Ginibre G.
inline CMatrix unit_ginibre(int n, double eps, std::uint64_t seed) {
  CMatrix g = ginibre(n, seed);
  return g * (eps / detail::spectral_norm(g));
}

struct KappaStats {
  double mean_kappa_sq = 0.0;    // over trials landing in the disk
  double median_kappa_sq = 0.0;
  double p_omega = 0.0;          // fraction of trials with spectrum in the disk
  double bound = 0.0;            // ||a||^2 R^2 n^3 / (eps^2 p_omega)
  int trials = 0;
  int failures = 0;              // defective draws, counted outside the disk
};

/// Monte Carlo over a + eps G with trial t seeded by seed + t.
inline KappaStats ginibre_kappa_stats(const CMatrix& a, double eps, double radius,
                                      int trials, std::uint64_t seed) {
  detail::require(trials >= 1, "ginibre_kappa_stats: trials must be positive");
  detail::require(eps > 0.0 && radius > 0.0,
                  "ginibre_kappa_stats: eps and radius must be positive");
  const int n = static_cast<int>(a.rows());
  KappaStats st;
  st.trials = trials;
  std::vector<double> inside;
  for (int t = 0; t < trials; ++t) {
    const CMatrix m = a + eps * ginibre(n, seed + static_cast<std::uint64_t>(t));
    try {
      const EigResult r = kappa_eig_upper(m);
      if (r.lambda.cwiseAbs().maxCoeff() < radius) inside.push_back(r.kappa * r.kappa);
    } catch (const NumericError&) {
      ++st.failures;
    }
  }
  if (inside.empty()) {
    throw NumericError("ginibre_kappa_stats",
                       "no trial kept its spectrum inside the disk; bound undefined");
  }
  st.p_omega = static_cast<double>(inside.size()) / trials;
  double sum = 0.0;
  for (double k : inside) sum += k;
  st.mean_kappa_sq = sum / static_cast<double>(inside.size());
  std::sort(inside.begin(), inside.end());
  const auto mid = inside.size() / 2;
  st.median_kappa_sq = inside.size() % 2 ? inside[mid] : 0.5 * (inside[mid - 1] + inside[mid]);
  const double an = detail::spectral_norm(a);
  st.bound = an * an * radius * radius * std::pow(n, 3) / (eps * eps * st.p_omega);
  return st;
}

struct SweepRow {
  int n = 0;
  double gamma = 0.0;
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double e_norm = std::numeric_limits<double>::quiet_NaN();
  double a_norm = 0.0;
  std::uint64_t seed = 0;
  std::optional<std::string> error;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  /// Pooled slope of log kappa against log(||E|| / ||A_H||) over good rows.
  std::optional<double> exponent;
};

/// One optimizer run per (n, gamma) cell, row-major over n then gamma; cell i
/// uses seed opts.seed + i. Failed cells keep NaN values and an error message.
inline SweepTable sweep_gamma(const std::vector<int>& n_list,
                              const std::vector<double>& gamma_list,
                              const PtdOptions& opts = {}) {
  detail::require(!n_list.empty() && !gamma_list.empty(),
                  "sweep_gamma: lists must be nonempty");
  SweepTable out;
  std::vector<double> rel, kap;
  std::uint64_t idx = 0;
  for (int n : n_list) {
    detail::require(n >= 1, "sweep_gamma: n must be positive");
    const CMatrix a = build_hippo(n).a.cast<cplx>();
    const double an = detail::spectral_norm(a);
    for (double gamma : gamma_list) {
      SweepRow row;
      row.n = n;
      row.gamma = gamma;
      row.a_norm = an;
      row.seed = opts.seed + idx++;
      try {
        detail::require(gamma > 0.0, "sweep_gamma: gamma must be positive");
        PtdOptions o = opts;
        o.seed = row.seed;
        const PtdResult r = optimize_perturbation(a, gamma, o);
        row.kappa = r.kappa_v;
        row.e_norm = r.e_norm;
        if (row.e_norm > 0.0) {
          rel.push_back(row.e_norm / an);
          kap.push_back(row.kappa);
        }
      } catch (const std::exception& ex) {
        row.error = ex.what();
      }
      out.rows.push_back(std::move(row));
    }
  }
  out.exponent = loglog_slope(rel, kap);
  return out;
}

}  // namespace hippoptd
