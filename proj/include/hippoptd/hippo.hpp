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
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "hippoptd/lti.hpp"
#include "hippoptd/types.hpp"

namespace hippoptd {

/// HiPPO-LegS state/input pair. `a` is lower triangular with diagonal
/// -1, -2, ..., -n; every column of `b` equals sqrt((2j-1)/2).
struct HippoPair {
  int n = 0;
  int m = 0;
  RMatrix a;
  RMatrix b;
};

/// A_H = normal_part - rank1_vec * rank1_vec^T, normal_part = -I/2 + S with
/// S real skew-symmetric.
struct DplrDecomposition {
  int n = 0;
  RMatrix normal_part;
  RVector rank1_vec;
};

/// Unitary eigendecomposition normal_part = v * diag(lambda) * v^*.
struct UnitaryEig {
  CMatrix v;
  CVector lambda;
};

inline HippoPair build_hippo(int n, int m = 1) {
  detail::require(n >= 1, "build_hippo: n must be positive");
  detail::require(m >= 1, "build_hippo: m must be positive");
  HippoPair p{n, m, RMatrix::Zero(n, n), RMatrix(n, m)};
  for (int j = 1; j <= n; ++j) {
    for (int k = 1; k < j; ++k) {
      p.a(j - 1, k - 1) = -std::sqrt(2.0 * j - 1) * std::sqrt(2.0 * k - 1);
    }
    p.a(j - 1, j - 1) = -static_cast<double>(j);
    p.b.row(j - 1).setConstant(std::sqrt((2.0 * j - 1) / 2.0));
  }
  return p;
}

inline DplrDecomposition dplr_decompose(const HippoPair& pair) {
  detail::require(pair.m == 1 && pair.b.cols() == 1,
                  "dplr_decompose: rank-1 split needs a single-input pair");
  const int n = pair.n;
  DplrDecomposition dec{n, RMatrix(n, n), pair.b.col(0)};
  for (int j = 1; j <= n; ++j) {
    for (int k = 1; k <= n; ++k) {
      if (j == k) {
        dec.normal_part(j - 1, k - 1) = -0.5;
      } else {
        const double mag = 0.5 * std::sqrt(2.0 * j - 1) * std::sqrt(2.0 * k - 1);
        dec.normal_part(j - 1, k - 1) = j > k ? -mag : mag;
      }
    }
  }
  return dec;
}

/// Diagonalizes the normal part through a Hermitian eigensolve of iS, so the
/// eigenvector matrix is unitary by construction. Eigenvalues are ordered by
/// ascending imaginary part; each eigenvector is phase-normalized so its
/// largest-magnitude entry (first one on ties) is real and positive.
inline UnitaryEig diagonalize_normal(const DplrDecomposition& dec) {
  const int n = dec.n;
  const RMatrix skew = dec.normal_part + 0.5 * RMatrix::Identity(n, n);
  const CMatrix herm = cplx(0.0, 1.0) * skew.cast<cplx>();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(herm);
  if (es.info() != Eigen::Success) {
    throw NumericError("diagonalize_normal",
                       "Hermitian eigensolver did not converge");
  }
  // normal_part = -I/2 + S = -I/2 - i*H  =>  lambda = -1/2 - i*mu
  CMatrix v = es.eigenvectors();
  for (int k = 0; k < n; ++k) {
    Eigen::Index imax = 0;
    v.col(k).cwiseAbs().maxCoeff(&imax);
    const cplx z = v(imax, k);
    v.col(k) *= std::conj(z) / std::abs(z);
  }
  CVector lam(n);
  for (int k = 0; k < n; ++k) lam(k) = cplx(-0.5, -es.eigenvalues()(k));

  const double tie = 1e-12 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    const double dx = lam(x).imag(), dy = lam(y).imag();
    if (std::abs(dx - dy) > tie) return dx < dy;
    return std::arg(v(0, x)) < std::arg(v(0, y));
  });
  UnitaryEig out{CMatrix(n, n), CVector(n)};
  for (int k = 0; k < n; ++k) {
    out.v.col(k) = v.col(order[k]);
    out.lambda(k) = lam(order[k]);
  }
  return out;
}

/// How the output row C of an initialized system is chosen.
struct OutputSpec {
  enum class Kind {
    kModeBasis,   // C = e_l^T V_H
    kCoordinate,  // C = e_l^T in the system's own coordinates
    kRandom,      // seeded Gaussian entries scaled by 1/sqrt(n)
  };
  Kind kind = Kind::kModeBasis;
  int ell = 1;

  static OutputSpec basis(int ell) { return {Kind::kModeBasis, ell}; }
  static OutputSpec coordinate(int ell) { return {Kind::kCoordinate, ell}; }
  static OutputSpec random() { return {Kind::kRandom, 0}; }
};

namespace detail {

inline CMatrix make_output_row(const OutputSpec& spec, const CMatrix& v,
                               std::uint64_t seed) {
  const auto n = v.rows();
  switch (spec.kind) {
    case OutputSpec::Kind::kModeBasis:
      require(spec.ell >= 1 && spec.ell <= n, "output index outside [1, n]");
      return v.row(spec.ell - 1);
    case OutputSpec::Kind::kCoordinate: {
      require(spec.ell >= 1 && spec.ell <= n, "output index outside [1, n]");
      CMatrix c = CMatrix::Zero(1, n);
      c(0, spec.ell - 1) = 1.0;
      return c;
    }
    case OutputSpec::Kind::kRandom: {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> gauss(0.0, 1.0);
      CMatrix c(1, n);
      const double scale = 1.0 / std::sqrt(static_cast<double>(n));
      for (Eigen::Index k = 0; k < n; ++k) c(0, k) = gauss(rng) * scale;
      return c;
    }
  }
  return {};
}

struct HippoBundle {
  HippoPair pair;
  DplrDecomposition dec;
  UnitaryEig eig;
};

inline HippoBundle hippo_bundle(int n) {
  auto pair = build_hippo(n, 1);
  auto dec = dplr_decompose(pair);
  auto eig = diagonalize_normal(dec);
  return {std::move(pair), std::move(dec), std::move(eig)};
}

}  // namespace detail

/// S4-style system (Lambda - V^* B B^T V, V^* B, C, 0). Conjugate through V_H
/// to (A_H, B_H, C V_H^*, 0), so it shares the HiPPO transfer function.
inline LtiSystem init_dplr_system(int n, const OutputSpec& c_spec,
                                  std::uint64_t seed = 0) {
  const auto h = detail::hippo_bundle(n);
  const CMatrix vb = h.eig.v.adjoint() * h.pair.b.cast<cplx>();
  LtiSystem sys;
  sys.a = CMatrix(h.eig.lambda.asDiagonal()) - vb * vb.adjoint();
  sys.b = vb;
  sys.c = detail::make_output_row(c_spec, h.eig.v, seed);
  sys.d = CMatrix::Zero(1, 1);
  return sys;
}

/// S4D-style system (Lambda, V^* B / 2, C, 0).
inline DiagonalLti init_diag_system(int n, const OutputSpec& c_spec,
                                    std::uint64_t seed = 0) {
  const auto h = detail::hippo_bundle(n);
  DiagonalLti sys;
  sys.lambda = h.eig.lambda;
  sys.b = 0.5 * (h.eig.v.adjoint() * h.pair.b.cast<cplx>());
  sys.c = detail::make_output_row(c_spec, h.eig.v, seed);
  sys.d = CMatrix::Zero(1, 1);
  return sys;
}

/// e_p^T (sI - A_H)^{-1} B_H in closed form; independent of n >= p.
/// Evaluated as a running product of the ratios (s - j) / (s + j + 1), which
/// stay bounded for any p.
inline cplx resolvent_row(int p, cplx s) {
  detail::require(p >= 1, "resolvent_row: p must be positive");
  for (int j = 1; j <= p; ++j) {
    if (std::abs(s + static_cast<double>(j)) < 1e-14 * j) {
      throw std::invalid_argument("resolvent_row: s is a pole of the resolvent");
    }
  }
  cplx acc = std::sqrt((2.0 * p - 1) / 2.0) / (s + static_cast<double>(p));
  for (int j = 0; j <= p - 2; ++j) {
    acc *= (s - static_cast<double>(j)) / (s + static_cast<double>(j + 1));
  }
  return acc;
}

}  // namespace hippoptd
