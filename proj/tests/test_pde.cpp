// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "driftopt/claim.hpp"
#include "driftopt/errors.hpp"
#include "driftopt/filter.hpp"
#include "driftopt/pde.hpp"
#include "support.hpp"

namespace driftopt {
namespace {

using testing::benchmark_model;
using testing::scalar_model;

Vec point(double a, double y) { return (Vec(2) << a, y).finished(); }

struct Bench {
  MarketModel model = benchmark_model();
  RiccatiSolution riccati = solve_riccati(model, uniform_grid(1.0, 1000));

  GridSpec grid(std::size_t nx, std::size_t nt) const {
    return auto_grid(model, riccati, nx, nx, nt, 7);
  }
};

const Bench& bench() {
  static const Bench b;
  return b;
}

TEST(Coefficients, HandExample) {
  // sigma 1, alpha = b = delta = 0 and beta 0.5 keep gamma at 0.5.
  const MarketModel m = scalar_model(1.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.5);
  const RiccatiSolution r = solve_riccati(m, 1e-3);
  const PDECoefficients c = coefficients(m, r);
  const Vec f = c.f(point(2.0, 0.3), 0.4);
  const Mat g = c.g(point(2.0, 0.3), 0.4);
  EXPECT_NEAR(f(0), -1.0, 1e-12);
  EXPECT_NEAR(f(1), -2.0, 1e-12);
  EXPECT_NEAR(g(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(g(1, 0), 2.0, 1e-12);
  const Mat d = c.diffusion(point(2.0, 0.3), 0.4);
  EXPECT_NEAR(d(0, 1), 1.0, 1e-12);
  EXPECT_NEAR(d(1, 1), 4.0, 1e-12);
}

TEST(Coefficients, ZeroEstimateAndNoFeedback) {
  const Bench& b = bench();
  const PDECoefficients c = coefficients(b.model, b.riccati);
  const Vec f = c.f(point(0.0, 1.0), 0.3);
  const Mat g = c.g(point(0.0, 1.0), 0.3);
  EXPECT_EQ(f(1), 0.0);
  EXPECT_EQ(g(1, 0), 0.0);
  EXPECT_NEAR(g(0, 0), b.riccati.gamma(0.3)(0, 0) * 25.0, 1e-12);
  EXPECT_THROW(c.f(point(0.0, 0.0), 1.5), DomainError);
}

TEST(SolvePdeFd, ConstantTerminal) {
  const Bench& b = bench();
  const PDESolution s = solve_pde_fd(b.model, b.riccati, constant_terminal(2.5), b.grid(41, 100));
  for (const auto& snap : s.snapshots)
    for (double v : snap) EXPECT_NEAR(v, 2.5, 1e-9);
}

TEST(SolvePdeFd, ExponentialTerminalIsInvariant) {
  const Bench& b = bench();
  const PDESolution s = solve_pde_fd(b.model, b.riccati, log_density_terminal(), b.grid(101, 250));
  double worst = 0.0;
  for (std::size_t k = 0; k < s.snapshots.size(); ++k)
    for (std::size_t i = 1; i + 1 < s.x1.size(); ++i)
      for (std::size_t j = 1; j + 1 < s.x2.size(); ++j)
        worst = std::max(worst, std::abs(s.node(k, i, j) / std::exp(s.x2[j]) - 1.0));
  EXPECT_LT(worst, 1e-3);
}

TEST(SolvePdeFd, TerminalReproducedExactly) {
  const Bench& b = bench();
  const TerminalCondition tc = claim_terminal(UtilitySpec::power(0.5, 1.0), 1.1);
  const PDESolution s = solve_pde_fd(b.model, b.riccati, tc, b.grid(41, 50));
  ASSERT_DOUBLE_EQ(s.snapshot_times.back(), 1.0);
  for (std::size_t i = 0; i < s.x1.size(); ++i)
    for (std::size_t j = 0; j < s.x2.size(); ++j)
      EXPECT_EQ(s.node(s.snapshots.size() - 1, i, j), tc(point(s.x1[i], s.x2[j])));
}

TEST(SolvePdeFd, Linearity) {
  const Bench& b = bench();
  const GridSpec g = b.grid(61, 100);
  const TerminalCondition p1 = claim_terminal(UtilitySpec::power(0.5, 1.0), 1.1);
  const TerminalCondition p2 = claim_terminal(UtilitySpec::power(0.5, 1.0), 0.8);
  const PDESolution v1 = solve_pde_fd(b.model, b.riccati, p1, g);
  const PDESolution v2 = solve_pde_fd(b.model, b.riccati, p2, g);
  const PDESolution v = solve_pde_fd(b.model, b.riccati, combine(2.0, p1, -3.0, p2), g);
  double worst = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < v.snapshots.size(); ++k)
    for (std::size_t n = 0; n < v.snapshots[k].size(); ++n) {
      const double lin = 2.0 * v1.snapshots[k][n] - 3.0 * v2.snapshots[k][n];
      worst = std::max(worst, std::abs(v.snapshots[k][n] - lin));
      scale = std::max(scale, std::abs(lin));
    }
  EXPECT_LT(worst, 1e-10 * scale);
}

// Smallest V2 - V1 over interior nodes and over boundary-face nodes.
std::pair<double, double> comparison_gap(const PDESolution& v1, const PDESolution& v2) {
  const std::size_t N1 = v1.x1.size(), N2 = v1.x2.size();
  double interior = 0.0, face = 0.0;
  for (std::size_t k = 0; k < v1.snapshots.size(); ++k)
    for (std::size_t n = 0; n < v1.snapshots[k].size(); ++n) {
      const double d = v2.snapshots[k][n] - v1.snapshots[k][n];
      const std::size_t i = n / N2, j = n % N2;
      if (i > 0 && j > 0 && i + 1 < N1 && j + 1 < N2)
        interior = std::min(interior, d);
      else
        face = std::min(face, d);
    }
  return {interior, face};
}

TEST(SolvePdeFd, ComparisonPrinciple) {
  const Bench& b = bench();
  TerminalCondition lower = log_density_terminal();
  TerminalCondition upper = log_density_terminal();
  upper.phi = [](const Vec& x) {
    return std::exp(x(1)) + 0.5 * (1.0 + std::tanh(4.0 * x(1) + 10.0 * x(0)));
  };
  double previous_face = -INFINITY;
  for (std::size_t nx : {61, 121}) {
    const GridSpec g = b.grid(nx, 10 * (nx - 1) / 3);
    const auto [interior, face] = comparison_gap(solve_pde_fd(b.model, b.riccati, lower, g),
                                                 solve_pde_fd(b.model, b.riccati, upper, g));
    EXPECT_GE(interior, -1e-10) << nx;
    // Extrapolated faces undershoot by a grid-dependent amount.
    EXPECT_GT(face, previous_face) << nx;
    previous_face = face;
  }

  upper.phi = [](const Vec& x) {
    return std::exp(x(1)) + 0.5 * (1.0 + std::tanh(0.4 * x(1) + x(0)));
  };
  const GridSpec g = b.grid(61, 200);
  const auto [interior, face] = comparison_gap(solve_pde_fd(b.model, b.riccati, lower, g),
                                               solve_pde_fd(b.model, b.riccati, upper, g));
  EXPECT_GE(interior, -1e-10);
  EXPECT_GE(face, -1e-10);
}

TEST(SolvePdeFd, RejectsHigherDimensions) {
  CoefficientNode c;
  c.sigma = Mat::Identity(2, 2) * 0.2;
  c.alpha = Mat::Identity(2, 2);
  c.beta = Mat::Identity(2, 2) * 0.1;
  c.b = Mat::Zero(2, 2);
  c.delta = Vec::Zero(2);
  const MarketModel m = MarketModel::constant(1.0, c, Vec::Zero(2), Mat::Identity(2, 2) * 0.01,
                                              Vec::Ones(2));
  const RiccatiSolution r = solve_riccati(m, 1e-2);
  EXPECT_THROW(solve_pde_fd(m, r, constant_terminal(1.0), GridSpec{}), SolverError);
}

// Closed form for power claims when b = 0:
//   V = lambda^-l exp(l y + A(t) a^2 + B(t) a + C(t))
// with A, B, C solving backward Riccati-type equations from zero at T.
struct PowerOracle {
  std::vector<double> A, B, C;
  double h;
};

PowerOracle power_oracle(double sigma, double alpha, double beta, double delta, double g0, double l,
                         int K) {
  const double Q = 1.0 / (sigma * sigma), h = 1.0 / K, hh = h / 2;
  std::vector<double> g(2 * std::size_t(K) + 1);
  g[0] = g0;
  auto rg = [&](double x) { return -x * x * Q - 2 * alpha * x + beta * beta; };
  for (int i = 0; i < 2 * K; ++i) {
    const double x = g[i], k1 = rg(x), k2 = rg(x + hh / 2 * k1), k3 = rg(x + hh / 2 * k2),
                 k4 = rg(x + hh * k3);
    g[i + 1] = x + hh / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  PowerOracle o{std::vector<double>(K + 1), std::vector<double>(K + 1), std::vector<double>(K + 1), h};
  auto rhs = [&](double gm, const double* v, double* d) {
    const double k = alpha + (1 - l) * gm * Q, D = gm * gm * Q;
    d[0] = 2 * k * v[0] - 2 * D * v[0] * v[0] - l * (l - 1) * Q / 2;
    d[1] = k * v[1] - 2 * alpha * delta * v[0] - 2 * D * v[0] * v[1];
    d[2] = -alpha * delta * v[1] - D * (v[0] + 0.5 * v[1] * v[1]);
  };
  double v[3] = {0, 0, 0};
  for (int i = K; i > 0; --i) {
    double k1[3], k2[3], k3[3], k4[3], t[3];
    rhs(g[2 * i], v, k1);
    for (int j = 0; j < 3; ++j) t[j] = v[j] - h / 2 * k1[j];
    rhs(g[2 * i - 1], t, k2);
    for (int j = 0; j < 3; ++j) t[j] = v[j] - h / 2 * k2[j];
    rhs(g[2 * i - 1], t, k3);
    for (int j = 0; j < 3; ++j) t[j] = v[j] - h * k3[j];
    rhs(g[2 * i - 2], t, k4);
    for (int j = 0; j < 3; ++j) v[j] -= h / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
    o.A[i - 1] = v[0];
    o.B[i - 1] = v[1];
    o.C[i - 1] = v[2];
  }
  return o;
}

TEST(PowerOracle, FrozenBenchmarkCoefficients) {
  const PowerOracle o = power_oracle(0.2, 1.0, 0.1, 0.05, 0.04, 2.0, 2000);
  EXPECT_NEAR(o.A[0], 20.1884697355, 1e-8);
  EXPECT_NEAR(o.B[0], 0.950732448946, 1e-9);
  EXPECT_NEAR(o.C[0], 0.138238453489, 1e-9);
}

TEST(SolvePdeFd, PowerClaimMatchesClosedForm) {
  const Bench& b = bench();
  const double lambda = 1.1, l = 2.0;
  const PowerOracle o = power_oracle(0.2, 1.0, 0.1, 0.05, 0.04, l, 1000);
  const TerminalCondition tc = claim_terminal(UtilitySpec::power(0.5, 1.0), lambda);
  auto worst_error = [&](const PDESolution& s) {
    double worst = 0.0;
    for (double t : {0.0, 0.5, 0.9})
      for (double a : {-0.1, 0.0, 0.05, 0.15})
        for (double y : {-0.5, 0.0, 0.5, 1.0}) {
          const std::size_t i = std::size_t(std::lround(t / o.h));
          const double exact =
              std::pow(lambda, -l) * std::exp(l * y + o.A[i] * a * a + o.B[i] * a + o.C[i]);
          worst = std::max(worst, std::abs(s.value(point(a, y), t) / exact - 1.0));
        }
    return worst;
  };
  const double coarse = worst_error(solve_pde_fd(b.model, b.riccati, tc, b.grid(101, 250)));
  const double fine = worst_error(solve_pde_fd(b.model, b.riccati, tc, b.grid(151, 500)));
  EXPECT_LT(fine, coarse);
  EXPECT_LT(fine, 1e-2);
}

GridSpec with_scheme(GridSpec g, FDScheme s) {
  g.scheme = s;
  return g;
}

const TerminalCondition& goal_terminal() {
  static const TerminalCondition tc = claim_terminal(UtilitySpec::goal_reaching(1.2, 1.0), 1.0);
  return tc;
}

TEST(AlignedScheme, ChosenForDiscontinuousClaims) {
  const Bench& b = bench();
  const GridSpec g = b.grid(41, 50);
  ASSERT_TRUE(g.aligned_available());
  EXPECT_EQ(solve_pde_fd(b.model, b.riccati, goal_terminal(), g).grid.scheme, FDScheme::Aligned);
  EXPECT_EQ(solve_pde_fd(b.model, b.riccati, log_density_terminal(), g).grid.scheme,
            FDScheme::Centred);
  EXPECT_EQ(solve_pde_fd(b.model, b.riccati, goal_terminal(), with_scheme(g, FDScheme::Centred))
                .grid.scheme,
            FDScheme::Centred);
}

TEST(AlignedScheme, GoalClaimStaysWithinLevels) {
  const Bench& b = bench();
  const PDESolution s = solve_pde_fd(b.model, b.riccati, goal_terminal(), b.grid(101, 500));
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& snap : s.snapshots)
    for (double v : snap) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  // Bounds hold up to the linear solver tolerance.
  EXPECT_GE(lo, -1e-9);
  EXPECT_LE(hi, 1.2 + 1e-9);
}

TEST(AlignedScheme, ComparisonPrincipleOnAllNodes) {
  const Bench& b = bench();
  TerminalCondition lower = log_density_terminal();
  TerminalCondition upper = log_density_terminal();
  upper.phi = [](const Vec& x) {
    return std::exp(x(1)) + 0.5 * (1.0 + std::tanh(4.0 * x(1) + 10.0 * x(0)));
  };
  const GridSpec g = with_scheme(b.grid(61, 200), FDScheme::Aligned);
  const auto [interior, face] = comparison_gap(solve_pde_fd(b.model, b.riccati, lower, g),
                                               solve_pde_fd(b.model, b.riccati, upper, g));
  EXPECT_GE(interior, -1e-9);
  EXPECT_GE(face, -1e-9);
}

TEST(AlignedScheme, ExponentialTerminalConverges) {
  const Bench& b = bench();
  auto error = [&](std::size_t nx) {
    const PDESolution s = solve_pde_fd(b.model, b.riccati, log_density_terminal(),
                                       with_scheme(b.grid(nx, 5 * (nx - 1)), FDScheme::Aligned));
    double worst = 0.0;
    for (double a : {-0.1, 0.05, 0.15})
      for (double y : {-0.3, 0.0, 0.3}) worst = std::max(worst, std::abs(s.value(point(a, y), 0.0) / std::exp(y) - 1.0));
    return worst;
  };
  const double coarse = error(51), fine = error(101);
  EXPECT_LT(fine, 0.75 * coarse);
  EXPECT_LT(fine, 2e-2);
}

TEST(AlignedScheme, RequiresNonVanishingGain) {
  // sigma 1 and gamma constant at 0.5, so b = -0.5 cancels the gain.
  const MarketModel m = scalar_model(1.0, 0.0, 0.5, -0.5, 0.0, 0.0, 0.0, 0.5);
  const RiccatiSolution r = solve_riccati(m, 1e-2);
  const GridSpec g = auto_grid(m, r, 21, 21, 20, 7);
  EXPECT_FALSE(g.aligned_available());
  EXPECT_THROW(solve_pde_fd(m, r, goal_terminal(), with_scheme(g, FDScheme::Aligned)), SolverError);
  EXPECT_EQ(solve_pde_fd(m, r, goal_terminal(), g).grid.scheme, FDScheme::Centred);
}

TEST(AlignedScheme, GoalClaimAgreesWithMonteCarlo) {
  const Bench& b = bench();
  const PDESolution s = solve_pde_fd(b.model, b.riccati, goal_terminal(), b.grid(151, 750));
  for (const Vec& x : {point(0.05, 0.0), point(0.0, -0.2)}) {
    const VEstimate e = estimate_V_mc(b.model, b.riccati, goal_terminal(), x, 0.0, {20000, 1e-3, 11, false});
    EXPECT_NEAR(s.value(x, 0.0), e.value, 3.0 * e.std_error + 1e-2) << x.transpose();
  }
}

TEST(EstimateVMc, ExponentialTerminal) {
  const Bench& b = bench();
  for (double t : {0.0, 0.6}) {
    const VEstimate e = estimate_V_mc(b.model, b.riccati, log_density_terminal(), point(0.1, 0.3),
                                      t, {20000, 2e-3, 3, false});
    EXPECT_NEAR(e.value, std::exp(0.3), 3.0 * e.std_error);
  }
}

TEST(EstimateVMc, ConstantTerminal) {
  const Bench& b = bench();
  const VEstimate e = estimate_V_mc(b.model, b.riccati, constant_terminal(4.0), point(0.1, 0.3),
                                    0.2, {1000, 1e-2, 3, true});
  EXPECT_EQ(e.value, 4.0);
  EXPECT_EQ(e.std_error, 0.0);
  EXPECT_EQ(e.gradient.norm(), 0.0);
  EXPECT_EQ(e.gradient_std_error.norm(), 0.0);
}

TEST(EstimateVMc, AtHorizon) {
  const Bench& b = bench();
  const TerminalCondition tc = claim_terminal(UtilitySpec::power(0.5, 1.0), 1.0);
  const VEstimate e = estimate_V_mc(b.model, b.riccati, tc, point(0.1, 0.3), 1.0, {100, 1e-2, 3, true});
  EXPECT_DOUBLE_EQ(e.value, std::exp(0.6));
  EXPECT_EQ(e.std_error, 0.0);
  EXPECT_NEAR(e.gradient(0), 0.0, 1e-12);
  EXPECT_NEAR(e.gradient(1), 2.0 * std::exp(0.6), 1e-5);
}

TEST(EstimateVMc, GradientAgreesWithGrid) {
  const Bench& b = bench();
  const TerminalCondition tc = claim_terminal(UtilitySpec::power(0.5, 1.0), 1.0);
  const PDESolution s = solve_pde_fd(b.model, b.riccati, tc, b.grid(101, 500));
  const Vec x = point(0.05, 0.0);
  const VEstimate e = estimate_V_mc(b.model, b.riccati, tc, x, 0.0, {20000, 2e-3, 9, true});
  const Vec g = s.gradient(x, 0.0);
  EXPECT_NEAR(e.value, s.value(x, 0.0), 3.0 * e.std_error + 1e-2 * s.value(x, 0.0));
  for (int k = 0; k < 2; ++k)
    EXPECT_NEAR(e.gradient(k), g(k), 3.0 * e.gradient_std_error(k) + 1e-2 * std::abs(g(k)));
}

TEST(SolvePdeMc, ProbeTable) {
  const Bench& b = bench();
  const PDESolution s = solve_pde_mc(b.model, b.riccati, log_density_terminal(),
                                     {{point(0.05, 0.0), 0.0}, {point(0.0, 0.5), 0.5}},
                                     {5000, 1e-2, 4, true});
  ASSERT_EQ(s.probes.size(), 2u);
  EXPECT_EQ(s.solver, SolverKind::MC);
  EXPECT_NEAR(s.probes[1].value, std::exp(0.5), 3.0 * s.probes[1].std_error);
  ASSERT_TRUE(static_cast<bool>(s.estimator));
  EXPECT_THROW(s.value(point(0.0, 0.0), 0.0), DomainError);
}

}  // namespace
}  // namespace driftopt
