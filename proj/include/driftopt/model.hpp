// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "driftopt/linalg.hpp"

namespace driftopt {

// Coefficient values at one node of the model time grid.
struct CoefficientNode {
  Mat sigma;  // n x n volatility
  Mat alpha;  // n x n mean-reversion of the drift
  Mat beta;   // n x n drift noise loading
  Mat b;      // n x n feedback of excess returns into the drift
  Vec delta;  // n, mean-reversion level
  double r = 0.0;
};

// Raw inputs for a MarketModel. Every coefficient lives on the same time
// partition of [0, T]; values between nodes are linear interpolants.
struct MarketInputs {
  double horizon = 1.0;
  std::vector<double> times;            // 0 = t_0 < ... < t_K = horizon
  std::vector<CoefficientNode> nodes;   // one per entry of `times`
  Vec m0;                               // mean of the initial drift
  Mat gamma0;                           // covariance of the initial drift
  Vec S0;                               // initial prices, all > 0
};

// Hidden-drift market: prices dS_i = S_i (a_i dt + sum_j sigma_ij dw_j),
// excess drift a~ following
//   da~ = (alpha delta + (b - alpha) a~) dt + b sigma dw + beta dW,
// bond B(t) = exp(int_0^t r). Immutable once constructed.
class MarketModel {
 public:
  explicit MarketModel(MarketInputs inputs);

  // All coefficients constant on [0, horizon].
  static MarketModel constant(double horizon, const CoefficientNode& c,
                              const Vec& m0, const Mat& gamma0, const Vec& S0);

  int n() const { return n_; }
  double horizon() const { return horizon_; }
  const std::vector<double>& grid() const { return times_; }
  const std::vector<CoefficientNode>& nodes() const { return nodes_; }
  double grid_step() const;  // largest spacing of the coefficient grid

  const Vec& m0() const { return m0_; }
  const Mat& gamma0() const { return gamma0_; }
  const Vec& S0() const { return S0_; }
  double B0() const { return 1.0; }

  // Interpolated coefficients; throw DomainError outside [0, T].
  CoefficientNode at(double t) const;
  Mat sigma(double t) const { return at(t).sigma; }
  Mat Q(double t) const;  // (sigma sigma^T)^{-1}
  double r(double t) const;

  // B(t) = exp(int_0^t r(s) ds), exact for piecewise-linear r.
  double bond(double t) const;

  // min over grid nodes of lambda_min(sigma sigma^T).
  double c_sigma() const { return c_sigma_; }

  // min over grid nodes of the smallest singular value of beta (0 if beta
  // is singular somewhere).
  double beta_min_singular() const { return beta_min_sv_; }

 private:
  void check_time(double t) const;

  int n_ = 0;
  double horizon_ = 0.0;
  std::vector<double> times_;
  std::vector<CoefficientNode> nodes_;
  std::vector<double> log_bond_;  // int_0^{t_k} r at grid nodes
  Vec m0_;
  Mat gamma0_;
  Vec S0_;
  double c_sigma_ = 0.0;
  double beta_min_sv_ = 0.0;
};

// phi_m(t, s): solution of d phi/dt = (m b(t) - alpha(t)) phi, phi(s, s) = I,
// by classical RK4 with steps no larger than the coefficient grid step or
// `max_step`.
Mat fundamental_matrix(const MarketModel& model, int mode, double t, double s,
                       double max_step = 1e-3);

// K~_m(t) = int_0^t phi_m(t,s) b sigma sigma^T b^T phi_m(t,s)^T ds by
// composite Simpson quadrature; symmetrized.
Mat covariance_Km(const MarketModel& model, int mode, double t,
                  double max_step = 1e-3);

// K~_m on every node of `times` in one cumulative pass.
std::vector<Mat> covariance_Km_path(const MarketModel& model, int mode,
                                    const std::vector<double>& times,
                                    double max_step = 1e-3);

// Grid used by the diagnostics: the coefficient grid refined so that no
// spacing exceeds `max_step`.
std::vector<double> diagnostic_grid(const MarketModel& model, double max_step);

struct Cov1Entry {
  double t = 0.0;
  int mode = 0;
  double min_eigenvalue = 0.0;  // of sigma sigma^T - T K~_m(t)
  double margin = 0.0;          // min_eigenvalue - eps
  bool pass = false;
};

struct Cov1Report {
  double eps = 0.0;
  std::vector<Cov1Entry> entries;
  double worst_margin = 0.0;
  bool pass = false;
};

// Checks T K~_m(t) + eps I < sigma(t) sigma(t)^T for m in {0, 1} on the
// diagnostic grid. A failure is reported, never thrown.
Cov1Report check_cov1(const MarketModel& model, double eps,
                      double max_step = 1e-2);

// Default probe value for eps: 1% of c_sigma.
inline double default_cov1_eps(const MarketModel& model) {
  return 0.01 * model.c_sigma();
}

}  // namespace driftopt
