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

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "hippoptd/fit.hpp"
#include "hippoptd/transfer.hpp"
#include "oracles.hpp"

using namespace hippoptd;
using std::numbers::pi;

TEST(TransferEval, ScalarSystem) {
  const LtiSystem s{CMatrix::Constant(1, 1, -1.0), CMatrix::Constant(1, 1, 1.0),
                    CMatrix::Constant(1, 1, 1.0), CMatrix::Zero(1, 1)};
  EXPECT_NEAR(std::abs(transfer_eval(s, 0.0).value - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(transfer_eval(s, 1.0).value - 1.0 / cplx(1.0, 1.0)), 0.0, 1e-15);
  const DiagonalLti d{CVector::Constant(1, -1.0), s.b, s.c, s.d};
  EXPECT_NEAR(std::abs(transfer_eval(d, 1.0).value - 1.0 / cplx(1.0, 1.0)), 0.0, 1e-15);
  EXPECT_EQ(transfer_eval(d, 2.5).sigma, 2.5);
}

TEST(TransferEval, ReportsSingularSolve) {
  const LtiSystem s{CMatrix::Zero(1, 1), CMatrix::Constant(1, 1, 1.0),
                    CMatrix::Constant(1, 1, 1.0), CMatrix::Zero(1, 1)};
  EXPECT_THROW(transfer_eval(s, 0.0), NumericError);
}

TEST(TransferEval, DplrEqualsItsConjugate) {
  const int n = 16;
  const auto s = init_dplr_system(n, OutputSpec::basis(2));
  const auto h = detail::hippo_bundle(n);
  // Conjugate back through V_H: (V A V^*, V B, C V^*, D).
  const LtiSystem conj{h.eig.v * s.a * h.eig.v.adjoint(), h.eig.v * s.b,
                       s.c * h.eig.v.adjoint(), s.d};
  EXPECT_LE(std::abs(transfer_eval(s, 3.3).value - transfer_eval(conj, 3.3).value), 1e-10);
}

TEST(TransferEval, ConjugateSymmetryForRealData) {
  const auto p = build_hippo(9);
  const LtiSystem s{p.a.cast<cplx>(), p.b.cast<cplx>(), p.b.transpose().cast<cplx>(),
                    CMatrix::Zero(1, 1)};
  for (double sigma : {0.3, 4.0, 71.0}) {
    EXPECT_LE(std::abs(transfer_eval(s, -sigma).value - std::conj(transfer_eval(s, sigma).value)),
              1e-13);
  }
  const auto pair = make_gap_pair(12, 1);
  for (double sigma : {0.5, 30.0, 400.0}) {
    EXPECT_NEAR(std::abs(transfer_diff_dense(pair, -sigma)),
                std::abs(transfer_diff_dense(pair, sigma)), 1e-12);
  }
}

TEST(TransferDiffClosed, Examples) {
  EXPECT_EQ(transfer_diff_closed(10, 1, 0.0), cplx(0.0));
  EXPECT_EQ(transfer_diff_closed(3, 2, 0.0), cplx(0.0));
  const cplx s(0.0, 1.0);
  const cplx ref = oracle::dense_gap(10, 1, s);
  EXPECT_LE(std::abs(transfer_diff_closed(10, 1, s) - ref), 1e-10 * std::abs(ref));
  EXPECT_THROW(transfer_diff_closed(10, 1, cplx(1e-6, 1.0)), std::invalid_argument);
  EXPECT_THROW(transfer_diff_closed(10, 11, s), std::invalid_argument);
}

TEST(TransferDiffClosed, MatchesDenseOracle) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> logu(-2.0, 4.0);
  for (int n : {1, 2, 7, 16, 33, 64}) {
    for (int ell : {1, 2, 3, n}) {
      if (ell > n) continue;
      for (int t = 0; t < 100; ++t) {
        const cplx s(0.0, std::pow(10.0, logu(rng)) * (t % 2 ? 1.0 : -1.0));
        const cplx ref = oracle::dense_gap(n, ell, s);
        EXPECT_LE(std::abs(transfer_diff_closed(n, ell, s) - ref), 1e-8 * std::abs(ref))
            << "n=" << n << " ell=" << ell << " s=" << s;
      }
    }
  }
}

TEST(TransferDiffClosed, MatchesLibraryDenseSystems) {
  const auto pair = make_gap_pair(20, 2);
  for (double sigma : {0.05, 2.0, 130.0, 2500.0}) {
    const cplx a = transfer_diff_closed(20, 2, cplx(0.0, sigma));
    const cplx b = transfer_diff_dense(pair, sigma);
    EXPECT_LE(std::abs(a - b), 1e-9 * std::abs(b)) << sigma;
  }
}

TEST(TransferDiffClosed, HugeNStaysFinite) {
  for (int n : {1000, 10000}) {
    const cplx g = transfer_diff_closed(n, 1, cplx(0.0, last_spike(n)));
    EXPECT_TRUE(std::isfinite(g.real()) && std::isfinite(g.imag()));
    EXPECT_GT(std::abs(g), 0.1);
  }
}

TEST(Angle, Examples) {
  EXPECT_NEAR(angle(1, 1.0), pi / 4, 1e-15);
  for (int n : {1, 10, 300}) EXPECT_LT(angle(n, 1e9 * n * n), 1e-6);
  EXPECT_NEAR(angle(32, 322.5), pi, 0.15);
  EXPECT_THROW(angle(3, 0.0), std::invalid_argument);
}

TEST(Angle, StrictlyDecreasing) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> logu(-3.0, 6.0);
  for (int t = 0; t < 500; ++t) {
    const int n = 1 + static_cast<int>(rng() % 200);
    double s1 = std::pow(10.0, logu(rng)), s2 = std::pow(10.0, logu(rng));
    if (s1 == s2) continue;
    if (s1 > s2) std::swap(s1, s2);
    EXPECT_GT(angle(n, s1), angle(n, s2)) << n << " " << s1 << " " << s2;
  }
}

TEST(Spikes, LastSpikeRanges) {
  const auto r32 = find_spikes(32, 1.0, 1e4);
  ASSERT_TRUE(r32.last_spike);
  EXPECT_GE(*r32.last_spike, 300.0);
  EXPECT_LE(*r32.last_spike, 345.0);
  EXPECT_NEAR(*r32.last_spike, last_spike(32), 1e-9 * *r32.last_spike);
  const auto r16 = find_spikes(16, 1.0, 1e4);
  ASSERT_TRUE(r16.last_spike);
  EXPECT_GE(*r16.last_spike, 70.0);
  EXPECT_LE(*r16.last_spike, 95.0);
}

TEST(Spikes, ReportInvariants) {
  for (int n : {5, 32, 100}) {
    const auto r = find_spikes(n, 0.5, 10.0 * n * n);
    ASSERT_FALSE(r.spike_centers.empty());
    ASSERT_EQ(r.peak_gaps.size(), r.spike_centers.size());
    EXPECT_EQ(*r.last_spike, r.spike_centers.back());
    for (std::size_t k = 0; k < r.spike_centers.size(); ++k) {
      const double a = angle(n, r.spike_centers[k]);
      EXPECT_NEAR(std::remainder(a - pi, 2 * pi), 0.0, 1e-8) << n << " " << k;
      if (k) EXPECT_GT(r.spike_centers[k], r.spike_centers[k - 1]);
      EXPECT_NEAR(r.peak_gaps[k],
                  std::abs(transfer_diff_closed(n, 1, cplx(0.0, r.spike_centers[k]))), 1e-12);
    }
  }
}

TEST(Spikes, EmptyRangeAndErrors) {
  const auto r = find_spikes(32, 400.0, 1e4);
  EXPECT_TRUE(r.spike_centers.empty());
  EXPECT_FALSE(r.last_spike);
  EXPECT_THROW(find_spikes(32, 10.0, 5.0), std::invalid_argument);
  EXPECT_THROW(find_spikes(32, 0.0, 5.0), std::invalid_argument);
}

TEST(Spikes, QuadraticScaling) {
  std::vector<double> ns, ss;
  for (int n : {16, 32, 64, 128, 256}) {
    ns.push_back(n);
    ss.push_back(last_spike(n));
  }
  const auto slope = loglog_slope(ns, ss);
  ASSERT_TRUE(slope);
  EXPECT_NEAR(*slope, 2.0, 0.1);
}

TEST(Spikes, PersistentPeak) {
  double lo = 1e300, hi = 0.0;
  for (int n : {10, 100, 1000, 10000}) {
    const double g = std::abs(transfer_diff_closed(n, 1, cplx(0.0, last_spike(n))));
    lo = std::min(lo, g);
    hi = std::max(hi, g);
  }
  EXPECT_GT(lo, 0.1);
  EXPECT_LT(hi / lo, 10.0);
}

TEST(PerturbationBound, Arithmetic) {
  EXPECT_NEAR(perturbation_bound(8, 0.01), 0.08159, 5e-6);
  EXPECT_DOUBLE_EQ(perturbation_bound(1, 0.1), 0.4);
  EXPECT_THROW(perturbation_bound(8, 1.0), std::invalid_argument);
  EXPECT_THROW(perturbation_bound(8, 0.0), std::invalid_argument);
}

TEST(ResolventFrobenius, BoundedByLogarithm) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> logu(-3.0, 5.0);
  for (int n : {8, 64, 256}) {
    const RMatrix a = oracle::legs_a(n);
    const double cap = 2.0 * std::log(static_cast<double>(n)) + 4.0;
    for (int t = 0; t < 100; ++t) {
      const double sigma = std::pow(10.0, logu(rng)) * (t % 2 ? 1.0 : -1.0);
      EXPECT_LE(resolvent_frobenius_sq(a, cplx(0.0, sigma)), cap) << n << " " << sigma;
    }
  }
}

TEST(LogGrid, Endpoints) {
  const auto g = log_grid_points(1e-2, 1e4, 10000);
  EXPECT_EQ(g.size(), 10000u);
  EXPECT_EQ(g.front(), 1e-2);
  EXPECT_EQ(g.back(), 1e4);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_GT(g[i], g[i - 1]);
  EXPECT_EQ(log_grid(1.0, 100.0, 10).size(), 21u);
  EXPECT_THROW(log_grid_points(0.0, 1.0, 5), std::invalid_argument);
}

TEST(SensitivityProfile, IdenticalSystemsAndSpikeLocation) {
  const auto sys = init_diag_system(6, OutputSpec::basis(1));
  const auto grid = log_grid(0.1, 100.0, 8);
  for (const auto& [sigma, gap] : sensitivity_profile(sys, sys, grid)) EXPECT_EQ(gap, 0.0);

  const auto pair = make_gap_pair(32, 1);
  const auto prof = sensitivity_profile(pair.dplr, pair.diag, log_grid(1.0, 1e4, 2000));
  auto best = std::max_element(prof.begin(), prof.end(),
                               [](auto& x, auto& y) { return x.second < y.second; });
  const double spike = last_spike(32);
  EXPECT_LE(std::abs(best->first - spike), 0.02 * spike);
}

TEST(SensitivityProfile, ShapeMismatchRejected) {
  const auto a = init_diag_system(4, OutputSpec::basis(1));
  DiagonalLti b = a;
  b.b = CMatrix::Ones(4, 2);
  b.d = CMatrix::Zero(1, 2);
  EXPECT_THROW(sensitivity_profile(a, b, {1.0}), std::invalid_argument);
}
