// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "driftopt/filter.hpp"
#include "driftopt/model.hpp"

namespace driftopt {

// Derived deterministic quantities of a model on a common time grid.
struct ModelDiagnostics {
  std::vector<double> times;
  std::vector<Mat> phi0;    // phi_0(t_k, 0)
  std::vector<Mat> phi1;    // phi_1(t_k, 0)
  std::vector<Mat> K0;      // K~_0(t_k)
  std::vector<Mat> K1;      // K~_1(t_k)
  std::vector<Mat> Khat;    // covariance of a_hat(t_k) under P*
  std::vector<Mat> Ktilde;  // covariance of a~(t_k) under P*

  // phi_m(t_j, t_k) = phi_m(t_j, 0) phi_m(t_k, 0)^{-1}.
  Mat phi(int mode, std::size_t j, std::size_t k) const;
};

// Builds all diagnostics on the grid of `riccati`.
ModelDiagnostics diagnose(const MarketModel& model,
                          const RiccatiSolution& riccati);

enum class MomentCovariance { Khat, Ktilde };

struct MomentEntry {
  double t = 0.0;
  double margin = 0.0;  // lambda_min(sigma sigma^T - eps I - kappa K(t))
  bool pass = false;
};

struct MomentReport {
  double mu = 0.0;
  double p = 0.0;
  double eps = 0.0;
  double kappa = 0.0;
  bool unconditional = false;  // mu in [0, 1]
  std::vector<MomentEntry> entries;
  double worst_margin = 0.0;
  bool pass = false;
};

// kappa(p) = p / (p - 1) * T * (mu^2 p - mu).
double moment_kappa(double mu, double p, double horizon);

// Sufficient condition for E_* Zbar^mu < infinity:
// kappa(p) K(t) < sigma sigma^T - eps I at every grid time. For mu in
// [0, 1] the report is an unconditional pass. DomainError if p <= 1.
MomentReport check_moment_condition(const MarketModel& model, double mu,
                                    double p,
                                    const std::vector<double>& times,
                                    const std::vector<Mat>& covariance,
                                    double eps);
MomentReport check_moment_condition(const MarketModel& model,
                                    const ModelDiagnostics& diagnostics,
                                    double mu, double p, MomentCovariance cov,
                                    double eps);

// Searches p over a fixed ladder and both covariance choices; passes if any
// combination passes.
MomentReport search_moment_condition(const MarketModel& model,
                                     const ModelDiagnostics& diagnostics,
                                     double mu, double eps);

// One row of the diagnostics table: t, quantity, min_eigenvalue, margin.
struct DiagnosticRow {
  double t = 0.0;
  std::string quantity;
  double min_eigenvalue = 0.0;
  double margin = 0.0;
};

std::vector<DiagnosticRow> diagnostic_rows(const Cov1Report& cov1);
std::vector<DiagnosticRow> diagnostic_rows(const MomentReport& report,
                                           const std::string& label);

}  // namespace driftopt
