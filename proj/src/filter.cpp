// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "driftopt/filter.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "driftopt/errors.hpp"

namespace driftopt {
namespace {

constexpr double kPsdReject = -1e-8;

Mat riccati_rhs(const CoefficientNode& c, const Mat& g) {
  Mat s = c.sigma * c.sigma.transpose();
  Mat q = s.inverse();
  return -g * q * g - c.alpha * g - g * c.alpha.transpose() + c.beta * c.beta.transpose();
}

}  // namespace

FilterState initial_filter_state(const MarketModel& model) {
  return FilterState{0.0, model.m0(), model.gamma0(), 0.0};
}

Mat RiccatiSolution::interpolate(const std::vector<Mat>& path, double t) const {
  if (times.empty()) throw DomainError("RiccatiSolution is empty");
  const double slack = 1e-12 * std::max(1.0, times.back());
  if (t < times.front() - slack || t > times.back() + slack) {
    std::ostringstream os;
    os << "time " << t << " outside Riccati grid [" << times.front() << ", "
       << times.back() << "]";
    throw DomainError(os.str());
  }
  if (t <= times.front()) return path.front();
  if (t >= times.back()) return path.back();
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t k = std::size_t(it - times.begin()) - 1;
  if (t == times[k]) return path[k];
  double w = (t - times[k]) / (times[k + 1] - times[k]);
  return lerp(path[k], path[k + 1], w);
}

Mat RiccatiSolution::gamma(double t) const { return interpolate(gamma_path, t); }
Mat RiccatiSolution::A(double t) const { return interpolate(A_path, t); }
Mat RiccatiSolution::gain(double t) const { return interpolate(gain_path, t); }
Mat RiccatiSolution::drift(double t) const { return interpolate(drift_path, t); }

std::vector<double> uniform_grid(double horizon, std::size_t steps) {
  if (steps == 0) throw DomainError("uniform_grid: steps must be >= 1");
  std::vector<double> g(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) g[k] = horizon * double(k) / double(steps);
  g.back() = horizon;
  return g;
}

RiccatiSolution solve_riccati(const MarketModel& model, const std::vector<double>& grid) {
  if (grid.size() < 2 || std::abs(grid.front()) > 1e-12 ||
      std::abs(grid.back() - model.horizon()) > 1e-9 * std::max(1.0, model.horizon()))
    throw DomainError("solve_riccati: grid must span [0, T]");
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1])) throw DomainError("solve_riccati: grid must increase");

  RiccatiSolution out;
  out.times = grid;
  out.times.front() = 0.0;
  out.times.back() = model.horizon();
  const std::size_t K = out.times.size();
  out.gamma_path.reserve(K);

  Mat g = model.gamma0();
  out.gamma_path.push_back(g);
  for (std::size_t k = 1; k < K; ++k) {
    double t = out.times[k - 1];
    double h = out.times[k] - t;
    CoefficientNode c0 = model.at(t);
    CoefficientNode ch = model.at(t + 0.5 * h);
    CoefficientNode c1 = model.at(out.times[k]);
    Mat k1 = riccati_rhs(c0, g);
    Mat k2 = riccati_rhs(ch, g + 0.5 * h * k1);
    Mat k3 = riccati_rhs(ch, g + 0.5 * h * k2);
    Mat k4 = riccati_rhs(c1, g + h * k3);
    g = symmetrize(g + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    double ev = min_eigenvalue(g);
    if (!std::isfinite(ev) || ev < kPsdReject) {
      std::ostringstream os;
      os << "Riccati step rejected at t = " << out.times[k]
         << ": covariance eigenvalue " << ev << " (grid too coarse)";
      throw SolverError(os.str());
    }
    out.gamma_path.push_back(g);
  }

  out.A_path.reserve(K);
  out.alpha_tilde_path.reserve(K);
  out.gain_path.reserve(K);
  out.drift_path.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    CoefficientNode c = model.at(out.times[k]);
    Mat q = (c.sigma * c.sigma.transpose()).inverse();
    Mat gq = out.gamma_path[k] * q;
    Mat at = c.alpha - c.b;
    out.alpha_tilde_path.push_back(at);
    out.A_path.push_back(-at - gq);
    out.gain_path.push_back(c.b + gq);
    out.drift_path.push_back(-c.alpha - gq);
  }
  return out;
}

RiccatiSolution solve_riccati(const MarketModel& model, double step) {
  if (!(step > 0.0)) throw DomainError("solve_riccati: step must be positive");
  return solve_riccati(model, diagnostic_grid(model, step));
}

FilterState filter_step(const FilterState& state, const Vec& dR, double dt,
                        const MarketModel& model, const RiccatiSolution& riccati) {
  const int n = model.n();
  if (state.a_hat.size() != n || state.gamma.rows() != n || state.gamma.cols() != n ||
      dR.size() != n)
    throw DomainError("filter_step: dimension mismatch");
  if (!(dt > 0.0)) throw DomainError("filter_step: dt must be positive");
  CoefficientNode c = model.at(state.t);
  Mat q = (c.sigma * c.sigma.transpose()).inverse();
  Mat gq = state.gamma * q;
  Mat drift = -c.alpha - gq;
  Mat gain = c.b + gq;

  FilterState next;
  next.t = state.t + dt;
  const Vec& a = state.a_hat;
  next.a_hat = a + (drift * a + c.alpha * c.delta) * dt + gain * dR;
  Vec qa = q * a;
  next.y_extra = state.y_extra - 0.5 * a.dot(qa) * dt + qa.dot(dR);
  next.gamma = riccati.gamma(std::min(next.t, riccati.times.back()));
  return next;
}

double conditional_density(const FilterState& state) { return std::exp(state.y_extra); }

}  // namespace driftopt
