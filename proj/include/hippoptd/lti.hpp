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

#include <algorithm>

#include "hippoptd/types.hpp"

namespace hippoptd {

/// Continuous-time LTI system x' = Ax + Bu, y = Cx + Du with dense A.
struct LtiSystem {
  CMatrix a;
  CMatrix b;
  CMatrix c;
  CMatrix d;

  Eigen::Index states() const { return a.rows(); }
  Eigen::Index inputs() const { return b.cols(); }
  Eigen::Index outputs() const { return c.rows(); }

  /// max Re(lambda(A)) < 0.
  bool is_stable() const {
    Eigen::ComplexEigenSolver<CMatrix> es(a, false);
    if (es.info() != Eigen::Success) return false;
    return es.eigenvalues().real().maxCoeff() < 0.0;
  }
};

/// Same as LtiSystem but A = diag(lambda).
struct DiagonalLti {
  CVector lambda;
  CMatrix b;
  CMatrix c;
  CMatrix d;

  Eigen::Index states() const { return lambda.size(); }
  Eigen::Index inputs() const { return b.cols(); }
  Eigen::Index outputs() const { return c.rows(); }

  bool is_stable() const {
    return lambda.size() > 0 && lambda.real().maxCoeff() < 0.0;
  }

  LtiSystem to_dense() const {
    return {CMatrix(lambda.asDiagonal()), b, c, d};
  }
};

namespace detail {

inline void check_shapes(const CMatrix& a, const CMatrix& b, const CMatrix& c,
                         const CMatrix& d) {
  require(a.rows() == a.cols(), "state matrix must be square");
  require(b.rows() == a.rows(), "B rows must match state dimension");
  require(c.cols() == a.rows(), "C cols must match state dimension");
  require(d.rows() == c.rows() && d.cols() == b.cols(),
          "D must be outputs x inputs");
}

}  // namespace detail

inline void validate(const LtiSystem& sys) {
  detail::check_shapes(sys.a, sys.b, sys.c, sys.d);
}

inline void validate(const DiagonalLti& sys) {
  detail::require(sys.b.rows() == sys.lambda.size(),
                  "B rows must match state dimension");
  detail::require(sys.c.cols() == sys.lambda.size(),
                  "C cols must match state dimension");
  detail::require(sys.d.rows() == sys.c.rows() && sys.d.cols() == sys.b.cols(),
                  "D must be outputs x inputs");
}

}  // namespace hippoptd
