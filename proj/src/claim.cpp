// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "driftopt/claim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "driftopt/errors.hpp"
#include "driftopt/filter.hpp"

namespace driftopt {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxBadFraction = 1e-3;
constexpr int kMaxExpansions = 200;
constexpr int kMaxBisections = 200;

void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError("invalid utility: " + what);
}

double tolerance_for(const UtilitySpec& u, const Estimate& e) {
  double k = u.kind == UtilityKind::Goal ? 2.0 : 0.5;
  return std::max(1e-3 * std::abs(u.X0), k * e.std_error);
}

void check_bad(const Estimate& e, double lambda) {
  std::size_t total = e.n + e.bad;
  if (double(e.bad) > kMaxBadFraction * double(total)) {
    std::ostringstream os;
    os << "claim is non-finite on " << e.bad << " of " << total << " paths at lambda = "
       << lambda << "; E_* F^2 is likely infinite for this model";
    throw CalibrationError(os.str());
  }
}

Calibration finish(const UtilitySpec& u, double lambda, const Estimate& e, int iters,
                   const MonteCarloConfig& mc) {
  Calibration c;
  c.utility = u;
  c.lambda_hat = lambda;
  c.budget = e.value;
  c.residual = e.value - u.X0;
  c.std_error = e.std_error;
  c.tolerance = tolerance_for(u, e);
  c.bad = e.bad;
  c.iterations = iters;
  c.mc = mc;
  return c;
}

// Goal claim: the budget is a step function of lambda on a finite sample,
// alpha * #{z_i >= lambda alpha} / N. Picks the count closest to X0 and
// returns the midpoint of the lambda interval that realizes it.
Calibration solve_goal(const UtilitySpec& u, const std::vector<double>& zbar,
                       const MonteCarloConfig& mc) {
  std::vector<double> z;
  z.reserve(zbar.size());
  std::size_t bad = 0;
  for (double v : zbar) {
    if (std::isfinite(v) && v > 0.0) z.push_back(v);
    else ++bad;
  }
  if (z.empty()) throw CalibrationError("goal calibration: no finite Zbar samples");
  if (double(bad) > kMaxBadFraction * double(zbar.size()))
    throw CalibrationError("goal calibration: too many non-finite Zbar samples");
  std::sort(z.begin(), z.end(), std::greater<double>());
  const double N = double(z.size());
  const double a = u.goal;
  std::size_t best = 0;
  double best_err = kInf;
  for (std::size_t k = 0; k <= z.size(); ++k) {
    double err = std::abs(a * double(k) / N - u.X0);
    if (err <= best_err) {
      best_err = err;
      best = k;
    }
  }
  double lambda;
  if (best == 0) {
    lambda = 2.0 * z.front() / a;
  } else if (best == z.size()) {
    lambda = 0.5 * z.back() / a;
  } else {
    lambda = 0.5 * (z[best - 1] + z[best]) / a;
  }
  Estimate e = budget(u, zbar, lambda);
  Calibration c = finish(u, lambda, e, 1, mc);
  if (std::abs(c.residual) > c.tolerance) {
    std::ostringstream os;
    os << "goal calibration: closest attainable budget " << c.budget << " misses X0 = "
       << u.X0 << " by more than " << c.tolerance;
    throw CalibrationError(os.str());
  }
  return c;
}

}  // namespace

bool Interval::contains(double x) const {
  if (std::isnan(x)) return false;
  bool above = lo_closed ? x >= lo : x > lo;
  bool below = hi_closed ? x <= hi : x < hi;
  return above && below;
}

UtilitySpec UtilitySpec::log(double X0) {
  require(X0 > 0.0 && std::isfinite(X0), "log utility needs X0 > 0");
  UtilitySpec u;
  u.kind = UtilityKind::Log;
  u.X0 = X0;
  return u;
}

UtilitySpec UtilitySpec::power(double d, double X0) {
  require(d < 1.0 && d != 0.0 && std::isfinite(d), "power utility needs d < 1, d != 0");
  require(X0 > 0.0 && std::isfinite(X0), "power utility needs X0 > 0");
  UtilitySpec u;
  u.kind = UtilityKind::Power;
  u.d = d;
  u.X0 = X0;
  return u;
}

UtilitySpec UtilitySpec::quadratic(double k, double c, double X0) {
  require(k > 0.0 && std::isfinite(k), "quadratic utility needs k > 0");
  require(c >= 0.0 && std::isfinite(c), "quadratic utility needs c >= 0");
  require(std::isfinite(X0), "X0 must be finite");
  UtilitySpec u;
  u.kind = UtilityKind::Quadratic;
  u.k = k;
  u.c = c;
  u.X0 = X0;
  return u;
}

UtilitySpec UtilitySpec::linear_penalty(int l, double X0) {
  require(l >= 1, "linear_penalty needs a positive integer l");
  UtilitySpec u;
  u.kind = UtilityKind::LinearPenalty;
  u.l = l;
  u.d = 1.0 + 1.0 / double(l);
  require(X0 > std::pow(u.d, -double(l)) && std::isfinite(X0),
          "linear_penalty needs X0 > d^-l");
  u.X0 = X0;
  return u;
}

UtilitySpec UtilitySpec::goal_reaching(double level, double X0) {
  require(level > 0.0 && std::isfinite(level), "goal level must be positive");
  require(X0 > 0.0 && X0 < level, "goal utility needs 0 < X0 < level");
  UtilitySpec u;
  u.kind = UtilityKind::Goal;
  u.goal = level;
  u.X0 = X0;
  return u;
}

std::string UtilitySpec::name() const {
  switch (kind) {
    case UtilityKind::Log: return "log";
    case UtilityKind::Power: return "power";
    case UtilityKind::Quadratic: return "quadratic";
    case UtilityKind::LinearPenalty: return "linear_penalty";
    case UtilityKind::Goal: return "goal";
  }
  return "unknown";
}

Interval UtilitySpec::domain() const {
  switch (kind) {
    case UtilityKind::Log: return {0.0, kInf, false, false};
    case UtilityKind::Quadratic: return {-kInf, kInf, false, false};
    default: return {0.0, kInf, true, false};
  }
}

Interval UtilitySpec::multipliers() const {
  switch (kind) {
    case UtilityKind::Quadratic: return {-kInf, kInf, false, false};
    case UtilityKind::LinearPenalty: return {0.0, kInf, true, false};
    default: return {0.0, kInf, false, false};
  }
}

double UtilitySpec::claim_exponent() const {
  if (kind == UtilityKind::Power) return 1.0 / (1.0 - d);
  if (kind == UtilityKind::LinearPenalty) return double(l);
  return 1.0;
}

double UtilitySpec::utility(double x) const {
  if (!domain().contains(x)) return -kInf;
  switch (kind) {
    case UtilityKind::Log: return std::log(x);
    case UtilityKind::Power:
      if (x == 0.0) return d > 0.0 ? 0.0 : -kInf;
      return std::pow(x, d) / d;
    case UtilityKind::Quadratic: return c * x - k * x * x;
    case UtilityKind::LinearPenalty: return x - std::pow(x, d);
    case UtilityKind::Goal: return x >= goal ? 1.0 : 0.0;
  }
  return -kInf;
}

double claim_value(const UtilitySpec& u, double z, double lambda) {
  switch (u.kind) {
    case UtilityKind::Log: return z / lambda;
    case UtilityKind::Power: return std::exp(u.claim_exponent() * std::log(z / lambda));
    case UtilityKind::Quadratic: return (u.c - lambda / z) / (2.0 * u.k);
    case UtilityKind::LinearPenalty:
      return std::pow((1.0 + lambda / z) / u.d, double(u.l));
    case UtilityKind::Goal: return z >= lambda * u.goal ? u.goal : 0.0;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double claim_map(const UtilitySpec& u, double z, double lambda) {
  if (!(z > 0.0) || !std::isfinite(z)) throw DomainError("claim_map: z must be positive");
  if (!u.multipliers().contains(lambda)) {
    std::ostringstream os;
    os << "claim_map: lambda = " << lambda << " outside the multiplier set of " << u.name();
    throw DomainError(os.str());
  }
  return claim_value(u, z, lambda);
}

Estimate budget(const UtilitySpec& u, const std::vector<double>& zbar, double lambda) {
  std::vector<double> f(zbar.size());
  for (std::size_t i = 0; i < zbar.size(); ++i) f[i] = claim_value(u, zbar[i], lambda);
  return summarize(f);
}

Calibration solve_multiplier(const UtilitySpec& u, const std::vector<double>& zbar,
                             const MonteCarloConfig& mc) {
  if (zbar.empty()) throw CalibrationError("calibration sample is empty");
  if (u.kind == UtilityKind::Goal) return solve_goal(u, zbar, mc);

  const Interval L = u.multipliers();
  const bool additive = std::isinf(L.lo);
  const double sign = u.budget_increasing() ? -1.0 : 1.0;
  // g(lambda) = sign * (budget - X0) is non-increasing in lambda.
  auto eval = [&](double lambda) { return budget(u, zbar, lambda); };
  auto g = [&](const Estimate& e) { return sign * (e.value - u.X0); };

  int iters = 0;
  double lo, hi;
  Estimate elo, ehi;
  if (additive) {
    lo = -1.0;
    hi = 1.0;
    elo = eval(lo);
    ehi = eval(hi);
    while ((!(g(elo) >= 0.0) || !(g(ehi) <= 0.0)) && iters < kMaxExpansions) {
      double w = hi - lo;
      if (!(g(elo) >= 0.0)) elo = eval(lo -= w);
      if (!(g(ehi) <= 0.0)) ehi = eval(hi += w);
      ++iters;
    }
  } else {
    lo = L.lo_closed ? L.lo : 0.5;
    hi = L.lo_closed ? 1.0 : 2.0;
    elo = eval(lo);
    ehi = eval(hi);
    while ((!(g(elo) >= 0.0) || !(g(ehi) <= 0.0)) && iters < kMaxExpansions) {
      if (!(g(elo) >= 0.0)) {
        if (L.lo_closed) break;
        elo = eval(lo *= 0.5);
      }
      if (!(g(ehi) <= 0.0)) ehi = eval(hi *= 2.0);
      ++iters;
    }
  }
  if (!(g(elo) >= 0.0) || !(g(ehi) <= 0.0)) {
    std::ostringstream os;
    os << "no multiplier bracket for " << u.name() << " within [" << lo << ", " << hi
       << "]: budget ranges over [" << elo.value << ", " << ehi.value << "] vs X0 = " << u.X0;
    throw CalibrationError(os.str());
  }

  // Bisect on the common sample until the bracket collapses.
  for (int b = 0; b < kMaxBisections; ++b, ++iters) {
    double mid = (additive || lo == 0.0) ? 0.5 * (lo + hi) : std::sqrt(lo * hi);
    if (!(mid > lo && mid < hi)) break;
    Estimate em = eval(mid);
    if (g(em) >= 0.0) {
      lo = mid;
      elo = em;
    } else {
      hi = mid;
      ehi = em;
    }
    if (hi - lo <= 1e-15 * std::max(1.0, std::abs(hi))) break;
  }
  const bool pick_lo = std::abs(g(elo)) <= std::abs(g(ehi));
  const double lambda = pick_lo ? lo : hi;
  const Estimate& e = pick_lo ? elo : ehi;
  check_bad(e, lambda);
  Calibration c = finish(u, lambda, e, iters, mc);
  if (!(std::abs(c.residual) <= c.tolerance)) {
    std::ostringstream os;
    os << "calibration residual " << c.residual << " exceeds tolerance " << c.tolerance
       << " for " << u.name();
    throw CalibrationError(os.str());
  }
  return c;
}

std::vector<double> calibration_sample(const MarketModel& model, const MonteCarloConfig& mc) {
  std::vector<double> z = terminal_log_zbar(model, mc.paths, mc.dt, mc.seed);
  for (double& v : z) v = std::exp(v);
  return z;
}

Calibration solve_multiplier(const UtilitySpec& u, const MarketModel& model,
                             const MonteCarloConfig& mc) {
  Cov1Report cov1 = check_cov1(model, default_cov1_eps(model));
  if (!cov1.pass) {
    std::ostringstream os;
    os << "model fails the covariance condition (worst margin " << cov1.worst_margin
       << "); calibration not attempted";
    throw CalibrationError(os.str());
  }
  return solve_multiplier(u, calibration_sample(model, mc), mc);
}

std::optional<double> claim_moment_exponent(const UtilitySpec& u) {
  switch (u.kind) {
    case UtilityKind::Log: return 2.0;
    case UtilityKind::Power: return 2.0 * u.claim_exponent();
    case UtilityKind::LinearPenalty: return -2.0 * double(u.l);
    case UtilityKind::Quadratic: return -2.0;
    case UtilityKind::Goal: return std::nullopt;
  }
  return std::nullopt;
}

QuadrReport check_quadr(const UtilitySpec& u, double lambda_hat,
                        const std::vector<double>& zbar, const MarketModel& model) {
  QuadrReport r;
  std::vector<double> sq(zbar.size());
  for (std::size_t i = 0; i < zbar.size(); ++i) {
    double f = claim_value(u, zbar[i], lambda_hat);
    sq[i] = f * f;
  }
  r.second_moment = summarize(sq);

  std::vector<double> finite;
  finite.reserve(sq.size());
  for (double v : sq)
    if (std::isfinite(v)) finite.push_back(v);
  std::sort(finite.begin(), finite.end(), std::greater<double>());
  double total = std::accumulate(finite.begin(), finite.end(), 0.0);
  std::size_t top = std::max<std::size_t>(1, finite.size() / 1000);
  double top_sum = std::accumulate(finite.begin(), finite.begin() + std::ptrdiff_t(std::min(top, finite.size())), 0.0);
  r.top_share = total > 0.0 ? top_sum / total : 0.0;
  r.heavy_tail = r.top_share > 0.5;

  const std::optional<double> mu = claim_moment_exponent(u);
  r.bounded = !mu;
  r.mu = mu.value_or(0.0);
  if (r.bounded) {
    r.moment.unconditional = true;
    r.moment.pass = true;
  } else {
    RiccatiSolution ric = solve_riccati(model, 1e-3);
    ModelDiagnostics diag = diagnose(model, ric);
    r.moment = search_moment_condition(model, diag, r.mu, default_cov1_eps(model));
  }
  r.pass = r.second_moment.ok && std::isfinite(r.second_moment.value) && r.moment.pass;
  return r;
}

QuadrReport check_quadr(const UtilitySpec& u, double lambda_hat, const MarketModel& model,
                        const MonteCarloConfig& mc) {
  return check_quadr(u, lambda_hat, calibration_sample(model, mc), model);
}

}  // namespace driftopt
