// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "driftopt/linalg.hpp"
#include "driftopt/model.hpp"

namespace driftopt {

// Observer's sufficient statistics at time t: conditional mean of the
// drift, its conditional covariance and y_extra = ln Zbar(t).
struct FilterState {
  double t = 0.0;
  Vec a_hat;
  Mat gamma;
  double y_extra = 0.0;
};

FilterState initial_filter_state(const MarketModel& model);

// Deterministic part of the Kalman-Bucy filter on a time grid.
//
//   gamma'  = -gamma Q gamma - alpha gamma - gamma alpha^T + beta beta^T
//   A       = -alpha_tilde - gamma Q,          alpha_tilde = alpha - b
//   gain    = (b sigma sigma^T + gamma) Q
//   drift   = A - b sigma sigma^T Q = -alpha - gamma Q
//
// so that the conditional mean obeys
//   d a_hat = (drift a_hat + alpha delta) dt + gain dR~.
struct RiccatiSolution {
  std::vector<double> times;
  std::vector<Mat> gamma_path;
  std::vector<Mat> A_path;
  std::vector<Mat> alpha_tilde_path;
  std::vector<Mat> gain_path;
  std::vector<Mat> drift_path;

  int n() const { return gamma_path.empty() ? 0 : int(gamma_path.front().rows()); }

  // Linear interpolation between nodes; DomainError outside the grid.
  Mat gamma(double t) const;
  Mat A(double t) const;
  Mat gain(double t) const;
  Mat drift(double t) const;

 private:
  Mat interpolate(const std::vector<Mat>& path, double t) const;
};

// Uniform grid with `steps` intervals on [0, T].
std::vector<double> uniform_grid(double horizon, std::size_t steps);

// Integrates the Riccati equation from gamma(0) = gamma_0 with one RK4 step
// per grid interval, symmetrizing after each step. Throws SolverError if
// gamma loses positive semidefiniteness beyond -1e-8.
RiccatiSolution solve_riccati(const MarketModel& model,
                              const std::vector<double>& grid);
RiccatiSolution solve_riccati(const MarketModel& model, double step);

// One Euler-Maruyama step of the filter driven by the excess-return
// increment dR. Coefficients are frozen at state.t; gamma is read from
// `riccati` at state.t + dt.
FilterState filter_step(const FilterState& state, const Vec& dR, double dt,
                        const MarketModel& model,
                        const RiccatiSolution& riccati);

// Zbar(t) = exp(y_extra).
double conditional_density(const FilterState& state);

}  // namespace driftopt
