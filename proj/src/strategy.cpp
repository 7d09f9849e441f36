// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "driftopt/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "driftopt/errors.hpp"

namespace driftopt {

namespace {

Vec state_vector(const FilterState& s) {
  const Eigen::Index n = s.a_hat.size();
  Vec x(n + 1);
  x.head(n) = s.a_hat;
  x(n) = s.y_extra;
  return x;
}

FilterState kernel_state(const PathKernel& kernel, const PathState& s) {
  FilterState f;
  f.t = s.t;
  f.a_hat = Eigen::Map<const Vec>(s.a_hat.data(), kernel.n());
  f.gamma = kernel.gamma_nodes()[s.k];
  f.y_extra = s.y;
  return f;
}

double dot_increment(const Vec& pi, const std::vector<double>& dR) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < pi.size(); ++i) acc += pi(i) * dR[std::size_t(i)];
  return acc;
}

std::vector<double> bonds(const MarketModel& model, const std::vector<double>& times) {
  std::vector<double> out(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) out[k] = model.bond(times[k]);
  return out;
}

void check_mc(const MonteCarloConfig& mc) {
  if (mc.paths < 2 || !(mc.dt > 0.0)) throw DomainError("invalid Monte Carlo settings");
}

}  // namespace

Position optimal_strategy(const PDESolution& solution, const FilterState& state,
                          const MarketModel& model, double t, double pi_max) {
  const int n = model.n();
  if (state.a_hat.size() != n || state.gamma.rows() != n)
    throw DomainError("optimal_strategy: filter state has the wrong dimension");
  if (t > model.horizon() * (1.0 + 1e-12)) throw DomainError("optimal_strategy: t > T");
  t = std::min(t, model.horizon());

  Position pos;
  const Vec x = state_vector(state);
  Vec grad;
  if (solution.solver == SolverKind::FD) {
    if (n != 1) throw DomainError("optimal_strategy: grid solutions need n = 1");
    pos.extrapolated = solution.cells_outside(x) > 1.0;
    grad = solution.gradient(x, t);
  } else {
    if (!solution.estimator) throw DomainError("optimal_strategy: solution has no estimator");
    grad = solution.estimator(x, t).gradient;
  }

  const CoefficientNode c = model.at(t);
  const Mat Q = model.Q(t);
  Mat g(n + 1, n);
  g.topRows(n) = c.b + state.gamma * Q;
  g.row(n) = state.a_hat.transpose() * Q;
  pos.pi = model.bond(t) * (g.transpose() * grad);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(pos.pi(i)) > pi_max) {
      pos.pi(i) = std::copysign(pi_max, pos.pi(i));
      pos.capped = true;
    }
  }
  return pos;
}

Vec baseline_certainty_equivalence(const MarketModel& model, const UtilitySpec& u,
                                   const FilterState& state, double wealth) {
  double scale;
  switch (u.kind) {
    case UtilityKind::Log:
      scale = 1.0;
      break;
    case UtilityKind::Power:
      scale = 1.0 / (1.0 - u.d);
      break;
    default:
      throw DomainError("certainty equivalence needs log or power utility");
  }
  return wealth * scale * (model.Q(state.t) * state.a_hat);
}

std::vector<WealthPath> run_replication(const MarketModel& model, const UtilitySpec& u,
                                        double lambda_hat, const PDESolution& solution,
                                        const std::vector<PathBundle>& paths,
                                        const ReplicationConfig& cfg) {
  const int n = model.n();
  const double pi_max = cfg.pi_max_factor * u.X0;
  std::vector<WealthPath> out(paths.size());
  for_each_path(
      paths.size(), [] { return 0; },
      [&](std::size_t p, int&) {
        const PathBundle& b = paths[p];
        const std::size_t M = b.steps();
        WealthPath& w = out[p];
        w.times = b.times;
        const std::vector<double> B = bonds(model, b.times);
        w.X.resize(M + 1);
        w.X_tilde.resize(M + 1);
        w.pi = Mat::Zero(Eigen::Index(M), n);
        w.pi0.resize(M);
        double xt = u.X0;
        w.X_tilde[0] = xt;
        w.X[0] = B[0] * xt;
        double lowest = xt;
        for (std::size_t k = 0; k < M; ++k) {
          Position pos = optimal_strategy(solution, b.filter_state(k), model, b.times[k], pi_max);
          w.cap_events += pos.capped;
          w.extrapolations += pos.extrapolated;
          w.pi.row(Eigen::Index(k)) = pos.pi.transpose();
          w.pi0[k] = w.X[k] - pos.pi.sum();
          Vec dR = (b.R_tilde.row(Eigen::Index(k + 1)) - b.R_tilde.row(Eigen::Index(k))).transpose();
          xt += pos.pi.dot(dR) / B[k];
          w.X_tilde[k + 1] = xt;
          w.X[k + 1] = B[k + 1] * xt;
          lowest = std::min(lowest, xt);
        }
        w.terminal_claim = claim_value(u, b.Zbar, lambda_hat);
        w.replication_error = std::abs(xt - w.terminal_claim);
        w.min_excess = lowest - u.X0;
      });
  return out;
}

ReplicationSummary replication_study(const MarketModel& model, const UtilitySpec& u,
                                     double lambda_hat, const PDESolution& solution,
                                     const MonteCarloConfig& mc, Measure measure,
                                     const ReplicationConfig& cfg) {
  check_mc(mc);
  PathKernel kernel(model, mc.dt, measure, mc.seed);
  const std::size_t M = kernel.steps();
  const std::size_t half = (M + 1) / 2;
  const std::vector<double> B = bonds(model, kernel.times());
  const double pi_max = cfg.pi_max_factor * u.X0;
  const std::size_t N = mc.paths;
  std::vector<double> err(N), mid(N), fin(N), claim(N), lowest(N);
  std::vector<std::size_t> caps(N), extrap(N);

  for_each_path(
      N, [&] { return kernel.make_state(); },
      [&](std::size_t i, PathState& s) {
        kernel.begin(i, s);
        double xt = u.X0, low = xt;
        std::size_t nc = 0, ne = 0;
        for (std::size_t k = 0; k < M; ++k) {
          if (k == half) mid[i] = xt;
          Position pos = optimal_strategy(solution, kernel_state(kernel, s), model, s.t, pi_max);
          nc += pos.capped;
          ne += pos.extrapolated;
          kernel.advance(i, s);
          xt += dot_increment(pos.pi, s.dR) / B[k];
          low = std::min(low, xt);
        }
        if (half == M) mid[i] = xt;
        fin[i] = xt;
        claim[i] = claim_value(u, std::exp(s.y), lambda_hat);
        err[i] = std::abs(xt - claim[i]);
        lowest[i] = low - u.X0;
        caps[i] = nc;
        extrap[i] = ne;
      });

  ReplicationSummary r;
  r.abs_error = summarize(err);
  r.wealth_half = summarize(mid);
  r.wealth_terminal = summarize(fin);
  r.claim = summarize(claim);
  r.min_excess = *std::min_element(lowest.begin(), lowest.end());
  for (std::size_t i = 0; i < N; ++i) {
    r.cap_events += caps[i];
    r.extrapolations += extrap[i];
  }
  Vec x0(model.n() + 1);
  x0.head(model.n()) = model.m0();
  x0(model.n()) = 0.0;
  if (solution.solver == SolverKind::FD)
    r.initial_value = solution.value(x0, 0.0);
  else if (solution.estimator)
    r.initial_value = solution.estimator(x0, 0.0).value;
  return r;
}

Policy optimal_policy(const PDESolution& solution, const MarketModel& model, double pi_max) {
  return [&solution, &model, pi_max](const FilterState& s, double, double t) {
    return optimal_strategy(solution, s, model, t, pi_max).pi;
  };
}

Policy certainty_equivalence_policy(const MarketModel& model, const UtilitySpec& u) {
  return [&model, u](const FilterState& s, double wealth, double) {
    return baseline_certainty_equivalence(model, u, s, wealth);
  };
}

Policy zero_policy(int n) {
  return [n](const FilterState&, double, double) { return Vec::Zero(n).eval(); };
}

UtilityEvaluation evaluate_expected_utility(const Policy& policy, const MarketModel& model,
                                            const UtilitySpec& u, const MonteCarloConfig& mc) {
  check_mc(mc);
  PathKernel kernel(model, mc.dt, Measure::P, mc.seed);
  const std::size_t M = kernel.steps();
  const std::vector<double> B = bonds(model, kernel.times());
  const std::size_t N = mc.paths;
  std::vector<double> util(N), wealth(N);

  for_each_path(
      N, [&] { return kernel.make_state(); },
      [&](std::size_t i, PathState& s) {
        kernel.begin(i, s);
        double xt = u.X0;
        for (std::size_t k = 0; k < M; ++k) {
          Vec pi = policy(kernel_state(kernel, s), B[k] * xt, s.t);
          kernel.advance(i, s);
          xt += dot_increment(pi, s.dR) / B[k];
        }
        wealth[i] = xt;
        util[i] = u.domain().contains(xt) ? u.utility(xt)
                                          : -std::numeric_limits<double>::infinity();
      });

  UtilityEvaluation e;
  e.utility = summarize(util);
  e.breaches = e.utility.bad;
  e.breach_rate = double(e.breaches) / double(N);
  e.valid = e.breach_rate <= 0.01;
  e.terminal_wealth = summarize(wealth);
  return e;
}

Estimate expected_claim_utility(const UtilitySpec& u, double lambda, const MarketModel& model,
                                const MonteCarloConfig& mc) {
  check_mc(mc);
  PathKernel kernel(model, mc.dt, Measure::P, mc.seed);
  const std::size_t N = mc.paths;
  std::vector<double> util(N);
  for_each_path(
      N, [&] { return kernel.make_state(); },
      [&](std::size_t i, PathState& s) {
        kernel.run(i, s, [](const PathState&) {});
        util[i] = u.utility(claim_value(u, std::exp(s.y), lambda));
      });
  return summarize(util);
}

double combined_std_error(const Estimate& a, const Estimate& b) {
  return std::hypot(a.std_error, b.std_error);
}

}  // namespace driftopt
