// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "driftopt/diagnostics.hpp"
#include "driftopt/model.hpp"
#include "driftopt/simulate.hpp"

namespace driftopt {

enum class UtilityKind { Log, Power, Quadratic, LinearPenalty, Goal };

// Real interval with optional closed ends; infinite ends are open.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_closed = false;
  bool hi_closed = false;
  bool contains(double x) const;
};

// Utility U on a domain D, plus the initial wealth X0.
//   log             U = ln x,            D = (0, inf)
//   power(d)        U = x^d / d,         D = [0, inf), d < 1, d != 0
//   quadratic(k,c)  U = c x - k x^2,     D = R, k > 0, c >= 0
//   linear_penalty  U = x - x^d,         D = [0, inf), d = 1 + 1/l
//   goal(a)         U = 1{x >= a},       D = [0, inf), 0 < X0 < a
struct UtilitySpec {
  UtilityKind kind = UtilityKind::Log;
  double d = 0.0;     // power exponent; 1 + 1/l for linear_penalty
  double k = 0.0;     // quadratic curvature
  double c = 0.0;     // quadratic slope
  int l = 0;          // linear_penalty order
  double goal = 0.0;  // goal level
  double X0 = 1.0;

  static UtilitySpec log(double X0);
  static UtilitySpec power(double d, double X0);
  static UtilitySpec quadratic(double k, double c, double X0);
  static UtilitySpec linear_penalty(int l, double X0);
  static UtilitySpec goal_reaching(double level, double X0);

  std::string name() const;
  Interval domain() const;
  // Admissible multipliers.
  Interval multipliers() const;
  // True when the budget E_* F(Z, lambda) grows with lambda.
  bool budget_increasing() const { return kind == UtilityKind::LinearPenalty; }
  // Claim exponent 1/(1-d) for power utility (1 for log).
  double claim_exponent() const;
  // U(x); -inf outside the domain.
  double utility(double x) const;
  // Sign s such that F(z, lambda) maximizes z U(x) - s lambda x.
  double multiplier_sign() const { return budget_increasing() ? -1.0 : 1.0; }
};

// Pointwise maximizer F(z, lambda). DomainError if z <= 0 or lambda is
// outside the multiplier set.
double claim_map(const UtilitySpec& u, double z, double lambda);

// claim_map without argument checks, for inner loops.
double claim_value(const UtilitySpec& u, double z, double lambda);

struct MonteCarloConfig {
  std::size_t paths = 10000;
  double dt = 1e-3;
  std::uint64_t seed = 0;
};

// Sample mean of F(Zbar_i, lambda).
Estimate budget(const UtilitySpec& u, const std::vector<double>& zbar, double lambda);

struct Calibration {
  UtilitySpec utility;
  double lambda_hat = 0.0;
  double budget = 0.0;     // E_* F(Zbar, lambda_hat)
  double residual = 0.0;   // budget - X0
  double std_error = 0.0;  // of the budget estimate
  double tolerance = 0.0;
  std::size_t bad = 0;
  int iterations = 0;
  MonteCarloConfig mc;
};

// Finds lambda_hat with |E_* F(Zbar, lambda_hat) - X0| <= tolerance on a
// fixed P* sample. The sample overload takes Zbar(T) draws directly.
// Throws CalibrationError when no root is bracketed or F is non-finite on
// more than 0.1% of paths.
Calibration solve_multiplier(const UtilitySpec& u, const std::vector<double>& zbar,
                             const MonteCarloConfig& mc = {});
Calibration solve_multiplier(const UtilitySpec& u, const MarketModel& model,
                             const MonteCarloConfig& mc);

// Terminal Zbar sample used for calibration.
std::vector<double> calibration_sample(const MarketModel& model, const MonteCarloConfig& mc);

struct QuadrReport {
  Estimate second_moment;  // E_* F(Zbar, lambda)^2
  double top_share = 0.0;  // share of the sum from the largest 0.1%
  bool heavy_tail = false;
  bool bounded = false;    // claim bounded, no moment check needed
  double mu = 0.0;         // Zbar exponent controlling F^2
  MomentReport moment;
  bool pass = false;
};

// Exponent mu with F(Zbar, lambda)^2 bounded by a multiple of 1 + Zbar^mu;
// empty for bounded claims.
std::optional<double> claim_moment_exponent(const UtilitySpec& u);

QuadrReport check_quadr(const UtilitySpec& u, double lambda_hat,
                        const std::vector<double>& zbar, const MarketModel& model);
QuadrReport check_quadr(const UtilitySpec& u, double lambda_hat, const MarketModel& model,
                        const MonteCarloConfig& mc);

}  // namespace driftopt
