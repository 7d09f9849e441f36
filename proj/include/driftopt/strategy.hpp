// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "driftopt/claim.hpp"
#include "driftopt/filter.hpp"
#include "driftopt/model.hpp"
#include "driftopt/pde.hpp"
#include "driftopt/simulate.hpp"

namespace driftopt {

// Stock holdings at one instant plus the events seen while computing them.
struct Position {
  Vec pi;
  bool extrapolated = false;  // state more than one cell outside the grid
  bool capped = false;        // |pi| hit the position cap
};

// pi^T = B(t) grad V(x, t)^T g(x, t) with x = (a_hat, y_extra) and
//   g = (b + gamma Q ; a_hat^T Q).
// FD solutions interpolate the grid gradient (states are clamped to the
// grid); MC solutions call the solution's estimator. Each component is
// capped at pi_max in magnitude.
Position optimal_strategy(const PDESolution& solution, const FilterState& state,
                          const MarketModel& model, double t,
                          double pi_max = std::numeric_limits<double>::infinity());

// Merton holdings with the filtered drift plugged in:
//   pi = wealth / (1 - d) Q a_hat, d = 0 for log.
// DomainError for other utilities.
Vec baseline_certainty_equivalence(const MarketModel& model, const UtilitySpec& u,
                                   const FilterState& state, double wealth);

struct WealthPath {
  std::vector<double> times;       // M + 1 nodes
  std::vector<double> X;           // wealth
  std::vector<double> X_tilde;     // X / B
  Mat pi;                          // M x n, held over [t_k, t_k+1)
  std::vector<double> pi0;         // bond holding X - sum pi
  double terminal_claim = 0.0;     // F(Zbar(T), lambda_hat)
  double replication_error = 0.0;  // |X_tilde(T) - terminal_claim|
  double min_excess = 0.0;         // realized q_pi = min_t X_tilde(t) - X0
  std::size_t cap_events = 0;
  std::size_t extrapolations = 0;
};

struct ReplicationConfig {
  double pi_max_factor = 1e3;  // cap |pi| <= factor * X0
};

// Trades the optimal strategy along stored paths, starting from X0.
std::vector<WealthPath> run_replication(const MarketModel& model, const UtilitySpec& u,
                                        double lambda_hat, const PDESolution& solution,
                                        const std::vector<PathBundle>& paths,
                                        const ReplicationConfig& cfg = {});

// Streaming replication over `mc.paths` paths of the given measure.
struct ReplicationSummary {
  Estimate abs_error;        // |X_tilde(T) - F(Zbar(T), lambda_hat)|
  Estimate wealth_half;      // X_tilde(T/2), nearest node
  Estimate wealth_terminal;  // X_tilde(T)
  Estimate claim;            // F(Zbar(T), lambda_hat)
  double min_excess = 0.0;   // min over paths of the realized q_pi
  std::size_t cap_events = 0;
  std::size_t extrapolations = 0;
  double initial_value = 0.0;  // V(x(0), 0)
};

ReplicationSummary replication_study(const MarketModel& model, const UtilitySpec& u,
                                     double lambda_hat, const PDESolution& solution,
                                     const MonteCarloConfig& mc,
                                     Measure measure = Measure::P,
                                     const ReplicationConfig& cfg = {});

// Maps (filter state, wealth X, t) to stock holdings. The factories below
// keep references to their arguments.
using Policy = std::function<Vec(const FilterState& state, double wealth, double t)>;

Policy optimal_policy(const PDESolution& solution, const MarketModel& model,
                      double pi_max = std::numeric_limits<double>::infinity());
Policy certainty_equivalence_policy(const MarketModel& model, const UtilitySpec& u);
Policy zero_policy(int n);

struct UtilityEvaluation {
  Estimate utility;            // over paths with X_tilde(T) in the domain
  std::size_t breaches = 0;    // paths scored -inf
  double breach_rate = 0.0;
  bool valid = true;           // breach rate <= 1%
  Estimate terminal_wealth;    // X_tilde(T)
};

// Forward simulation under P from X0; averages U(X_tilde(T)).
UtilityEvaluation evaluate_expected_utility(const Policy& policy, const MarketModel& model,
                                            const UtilitySpec& u, const MonteCarloConfig& mc);

// Mean of U(F(Zbar(T), lambda)) under P: the upper bound for any policy.
Estimate expected_claim_utility(const UtilitySpec& u, double lambda, const MarketModel& model,
                                const MonteCarloConfig& mc);

// sqrt(a^2 + b^2).
double combined_std_error(const Estimate& a, const Estimate& b);

}  // namespace driftopt
