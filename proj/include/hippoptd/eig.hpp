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
#include <limits>
#include <random>

#include "hippoptd/types.hpp"

namespace hippoptd {

/// Complex Ginibre matrix: real and imaginary parts i.i.d. N(0, 1/(2n)), so
/// each entry has variance 1/n and the spectral norm tends to 2.
inline CMatrix ginibre(int n, std::uint64_t seed) {
  detail::require(n >= 1, "ginibre: n must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 / n));
  CMatrix g(n, n);
  // Column-major fill order is part of the determinism contract.
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      g(j, k) = cplx(re, im);
    }
  }
  return g;
}

/// Eigendecomposition a = v diag(lambda) v^{-1} with unit 2-norm columns,
/// and kappa = cond_2(v). kappa upper-bounds the eigenvector condition number
/// (an infimum over all diagonalizations).
struct EigResult {
  double kappa = 0.0;
  CMatrix v;
  CVector lambda;
  Eigen::VectorXd singular_values;  // of v, descending
};

inline double condition_number(const CMatrix& v) {
  Eigen::JacobiSVD<CMatrix> svd(v);
  const auto& sv = svd.singularValues();
  return sv(0) / sv(sv.size() - 1);
}

inline EigResult kappa_eig_upper(const CMatrix& a) {
  detail::require(a.rows() == a.cols() && a.rows() >= 1,
                  "kappa_eig_upper: matrix must be square and nonempty");
  const auto n = a.rows();
  Eigen::ComplexEigenSolver<CMatrix> es(a, true);
  if (es.info() != Eigen::Success) {
    throw NumericError("kappa_eig_upper", "eigensolver did not converge");
  }
  EigResult r;
  r.lambda = es.eigenvalues();
  const double scale = std::max(1.0, r.lambda.cwiseAbs().maxCoeff());
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = j + 1; k < n; ++k) {
      if (std::abs(r.lambda(j) - r.lambda(k)) <= 1e-12 * scale) {
        throw NumericError("kappa_eig_upper",
                           "eigenvalues collide; matrix is defective to working precision");
      }
    }
  }
  r.v = es.eigenvectors();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double nrm = r.v.col(k).norm();
    if (!(nrm > 0.0) || !std::isfinite(nrm)) {
      throw NumericError("kappa_eig_upper", "degenerate eigenvector");
    }
    r.v.col(k) /= nrm;
  }
  Eigen::JacobiSVD<CMatrix> svd(r.v);
  r.singular_values = svd.singularValues();
  const double smin = r.singular_values(n - 1);
  // Past 1/(n u) the computed eigenvectors carry no usable information.
  const double floor = static_cast<double>(n) * std::numeric_limits<double>::epsilon();
  if (!(smin > floor * r.singular_values(0))) {
    throw NumericError("kappa_eig_upper", "eigenvector matrix is numerically singular");
  }
  r.kappa = r.singular_values(0) / smin;
  return r;
}

}  // namespace hippoptd
