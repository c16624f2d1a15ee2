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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "hippoptd/fit.hpp"
#include "hippoptd/hippo.hpp"
#include "hippoptd/lti.hpp"
#include "hippoptd/types.hpp"

namespace hippoptd {

enum class Discretization { kBilinear, kZoh };

inline std::string_view to_string(Discretization m) {
  return m == Discretization::kBilinear ? "bilinear" : "zoh";
}

/// x_t = a_bar x_{t-1} + b_bar u_{t-1},  y_t = c_bar x_t + d_bar u_t.
struct DiscreteLti {
  CMatrix a_bar;
  CMatrix b_bar;
  CMatrix c_bar;
  CMatrix d_bar;
  double dt = 0.0;
  Discretization method = Discretization::kBilinear;
};

/// Discretized diagonal system; a_bar holds the diagonal of the state map.
struct DiscreteDiagLti {
  CVector a_bar;
  CMatrix b_bar;
  CMatrix c_bar;
  CMatrix d_bar;
  double dt = 0.0;
  Discretization method = Discretization::kBilinear;

  DiscreteLti to_dense() const {
    return {CMatrix(a_bar.asDiagonal()), b_bar, c_bar, d_bar, dt, method};
  }
};

namespace detail {

/// exp(z) - 1 without cancellation for small |z|.
inline cplx expm1(cplx z) {
  const double x = z.real(), y = z.imag();
  const double sh = std::sin(0.5 * y);
  return {std::expm1(x) * std::cos(y) - 2.0 * sh * sh, std::exp(x) * std::sin(y)};
}

}  // namespace detail

inline DiscreteLti discretize(const LtiSystem& sys, double dt,
                              Discretization method = Discretization::kBilinear) {
  validate(sys);
  detail::require(dt > 0.0, "discretize: step must be positive");
  const auto n = sys.states();
  const CMatrix eye = CMatrix::Identity(n, n);
  DiscreteLti out{CMatrix(), CMatrix(), sys.c, sys.d, dt, method};
  if (method == Discretization::kBilinear) {
    const CMatrix m = eye - (0.5 * dt) * sys.a;
    Eigen::PartialPivLU<CMatrix> lu(m);
    if (!(lu.rcond() > 1e-14)) {
      throw NumericError("discretize", "I - (dt/2) A is singular for this step");
    }
    out.a_bar = lu.solve(eye + (0.5 * dt) * sys.a);
    out.b_bar = dt * lu.solve(sys.b);
  } else {
    Eigen::PartialPivLU<CMatrix> lu(sys.a);
    if (!(lu.rcond() > 1e-14)) {
      throw NumericError("discretize", "zero-order hold needs an invertible A");
    }
    out.a_bar = (dt * sys.a).exp();
    out.b_bar = lu.solve((out.a_bar - eye) * sys.b);
  }
  return out;
}

inline DiscreteDiagLti discretize(const DiagonalLti& sys, double dt,
                                  Discretization method = Discretization::kBilinear) {
  validate(sys);
  detail::require(dt > 0.0, "discretize: step must be positive");
  const auto n = sys.states();
  DiscreteDiagLti out{CVector(n), CMatrix(sys.b.rows(), sys.b.cols()), sys.c,
                      sys.d, dt, method};
  for (Eigen::Index k = 0; k < n; ++k) {
    const cplx lam = sys.lambda(k);
    cplx gain;
    if (method == Discretization::kBilinear) {
      const cplx m = 1.0 - 0.5 * dt * lam;
      if (std::abs(m) < 1e-14) {
        throw NumericError("discretize", "I - (dt/2) A is singular for this step");
      }
      out.a_bar(k) = (1.0 + 0.5 * dt * lam) / m;
      gain = dt / m;
    } else {
      if (std::abs(lam) == 0.0) {
        throw NumericError("discretize", "zero-order hold needs an invertible A");
      }
      out.a_bar(k) = std::exp(dt * lam);
      gain = detail::expm1(dt * lam) / lam;
    }
    out.b_bar.row(k) = gain * sys.b.row(k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Signals and simulation

struct SignalSpec {
  enum class Kind { kCosine, kExpDecay, kUnitImpulse };
  Kind kind = Kind::kExpDecay;
  double freq = 0.0;

  static SignalSpec cosine(double s) { return {Kind::kCosine, s}; }
  static SignalSpec exp_decay() { return {Kind::kExpDecay, 0.0}; }
  static SignalSpec unit_impulse() { return {Kind::kUnitImpulse, 0.0}; }
};

/// Samples u(0), u(dt), ..., u(n_steps dt). The impulse is the discrete
/// sequence (1, 0, 0, ...) and is not scaled by 1/dt.
inline std::vector<double> sample_signal(const SignalSpec& sig, int n_steps,
                                         double dt) {
  detail::require(n_steps >= 1, "sample_signal: need at least one step");
  std::vector<double> u(static_cast<std::size_t>(n_steps) + 1, 0.0);
  for (int t = 0; t <= n_steps; ++t) {
    const double time = t * dt;
    switch (sig.kind) {
      case SignalSpec::Kind::kCosine:
        u[t] = std::cos(sig.freq * time);
        break;
      case SignalSpec::Kind::kExpDecay:
        u[t] = std::exp(-time);
        break;
      case SignalSpec::Kind::kUnitImpulse:
        u[t] = t == 0 ? 1.0 : 0.0;
        break;
    }
  }
  return u;
}

struct SimulationRun {
  std::vector<double> inputs;
  std::vector<cplx> outputs;
  double dt = 0.0;
  Discretization method = Discretization::kBilinear;
};

namespace detail {

inline void require_siso(const CMatrix& b, const CMatrix& c) {
  require(b.cols() == 1 && c.rows() == 1,
          "simulate: only single-input single-output systems are supported");
}

}  // namespace detail

/// Runs the recurrence from x_0 = 0 over a given input sequence.
inline SimulationRun simulate_sequence(const DiscreteLti& sys,
                                       const std::vector<double>& u) {
  detail::require_siso(sys.b_bar, sys.c_bar);
  const auto n = sys.a_bar.rows();
  SimulationRun run{u, std::vector<cplx>(u.size()), sys.dt, sys.method};
  CVector x = CVector::Zero(n);
  CVector next(n);
  const CVector b = sys.b_bar.col(0);
  const Eigen::RowVectorXcd c = sys.c_bar.row(0);
  const cplx d = sys.d_bar(0, 0);
  for (std::size_t t = 0; t < u.size(); ++t) {
    if (t > 0) {
      next.noalias() = sys.a_bar * x;
      next += u[t - 1] * b;
      x.swap(next);
    }
    run.outputs[t] = (c * x).value() + d * u[t];
  }
  return run;
}

inline SimulationRun simulate_sequence(const DiscreteDiagLti& sys,
                                       const std::vector<double>& u) {
  detail::require_siso(sys.b_bar, sys.c_bar);
  const auto n = sys.a_bar.size();
  SimulationRun run{u, std::vector<cplx>(u.size()), sys.dt, sys.method};
  CVector x = CVector::Zero(n);
  const CVector b = sys.b_bar.col(0);
  const CVector c = sys.c_bar.row(0).transpose();
  const cplx d = sys.d_bar(0, 0);
  for (std::size_t t = 0; t < u.size(); ++t) {
    if (t > 0) {
      x = sys.a_bar.cwiseProduct(x) + u[t - 1] * b;
    }
    run.outputs[t] = (c.array() * x.array()).sum() + d * u[t];
  }
  return run;
}

/// Samples the signal, discretizes the system and iterates the recurrence.
template <class System>
SimulationRun simulate(const SignalSpec& sig, const System& sys, int n_steps,
                       double dt = 1e-3,
                       Discretization method = Discretization::kBilinear) {
  const auto u = sample_signal(sig, n_steps, dt);
  return simulate_sequence(discretize(sys, dt, method), u);
}

inline double max_abs_output(const SimulationRun& run) {
  double m = 0.0;
  for (const cplx& y : run.outputs) m = std::max(m, std::abs(y));
  return m;
}

/// sqrt(dt * sum |y_A - y_B|^2) under identical simulation settings.
template <class SysA, class SysB>
double output_l2_diff(const SysA& a, const SysB& b, const SignalSpec& sig,
                      int n_steps, double dt = 1e-3,
                      Discretization method = Discretization::kBilinear) {
  detail::require(a.inputs() == b.inputs() && a.outputs() == b.outputs(),
                  "output_l2_diff: systems must share input/output sizes");
  const auto ya = simulate(sig, a, n_steps, dt, method);
  const auto yb = simulate(sig, b, n_steps, dt, method);
  double acc = 0.0;
  for (std::size_t t = 0; t < ya.outputs.size(); ++t) {
    acc += std::norm(ya.outputs[t] - yb.outputs[t]);
  }
  return std::sqrt(dt * acc);
}

struct ConvergenceRow {
  int n = 0;
  double error = 0.0;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  std::optional<double> slope;  // log-log least squares; absent for < 2 rows
};

/// DPLR vs diagonal output gap across state sizes, with the log-log slope.
inline ConvergenceTable convergence_study(const SignalSpec& sig,
                                          const std::vector<int>& n_list,
                                          int n_steps, double dt,
                                          Discretization method,
                                          const OutputSpec& c_spec) {
  detail::require(!n_list.empty(), "convergence_study: empty size list");
  for (std::size_t i = 1; i < n_list.size(); ++i) {
    detail::require(n_list[i] > n_list[i - 1],
                    "convergence_study: sizes must be ascending");
  }
  ConvergenceTable table;
  std::vector<double> xs, ys;
  for (int n : n_list) {
    const auto dplr = init_dplr_system(n, c_spec);
    const auto diag = init_diag_system(n, c_spec);
    const double err = output_l2_diff(dplr, diag, sig, n_steps, dt, method);
    table.rows.push_back({n, err});
    xs.push_back(n);
    ys.push_back(err);
  }
  table.slope = loglog_slope(xs, ys);
  return table;
}

inline ConvergenceTable convergence_study(const SignalSpec& sig,
                                          const std::vector<int>& n_list,
                                          int n_steps = 10000, double dt = 1e-3,
                                          Discretization method = Discretization::kBilinear,
                                          int ell = 1) {
  return convergence_study(sig, n_list, n_steps, dt, method, OutputSpec::basis(ell));
}

}  // namespace hippoptd
