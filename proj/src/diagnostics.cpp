// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "driftopt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "driftopt/errors.hpp"

namespace driftopt {
namespace {

// One RK4 step of the Lyapunov equation K' = F K + K F^T + M with F, M
// linear in time between the end points.
Mat lyapunov_step(const Mat& K, const Mat& F0, const Mat& F1, const Mat& M0,
                  const Mat& M1, double h) {
  Mat Fh = 0.5 * (F0 + F1);
  Mat Mh = 0.5 * (M0 + M1);
  auto rhs = [](const Mat& F, const Mat& M, const Mat& X) {
    return Mat(F * X + X * F.transpose() + M);
  };
  Mat k1 = rhs(F0, M0, K);
  Mat k2 = rhs(Fh, Mh, K + 0.5 * h * k1);
  Mat k3 = rhs(Fh, Mh, K + 0.5 * h * k2);
  Mat k4 = rhs(F1, M1, K + h * k3);
  return symmetrize(K + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

}  // namespace

Mat ModelDiagnostics::phi(int mode, std::size_t j, std::size_t k) const {
  const auto& p = mode == 0 ? phi0 : phi1;
  if (j >= p.size() || k >= p.size() || k > j)
    throw DomainError("ModelDiagnostics::phi: index out of range");
  return p[j] * p[k].inverse();
}

ModelDiagnostics diagnose(const MarketModel& model, const RiccatiSolution& riccati) {
  ModelDiagnostics d;
  d.times = riccati.times;
  const std::size_t K = d.times.size();
  const int n = model.n();
  for (int mode = 0; mode <= 1; ++mode) {
    auto& p = mode == 0 ? d.phi0 : d.phi1;
    p.reserve(K);
    p.push_back(Mat::Identity(n, n));
    for (std::size_t k = 1; k < K; ++k)
      p.push_back(fundamental_matrix(model, mode, d.times[k], d.times[k - 1]) * p.back());
  }
  d.K0 = covariance_Km_path(model, 0, d.times);
  d.K1 = covariance_Km_path(model, 1, d.times);

  // Covariances under P*, where dR~ = sigma dw:
  //   a_hat: d a_hat = (drift a_hat + alpha delta) dt + gain sigma dw
  //   a~:    d a~ = (alpha delta - alpha a~) dt + b sigma dw + beta dW
  std::vector<Mat> Fh(K), Mh(K), Ft(K), Mt(K);
  for (std::size_t k = 0; k < K; ++k) {
    CoefficientNode c = model.at(d.times[k]);
    Mat gs = riccati.gain_path[k] * c.sigma;
    Mat bs = c.b * c.sigma;
    Fh[k] = riccati.drift_path[k];
    Mh[k] = gs * gs.transpose();
    Ft[k] = -c.alpha;
    Mt[k] = bs * bs.transpose() + c.beta * c.beta.transpose();
  }
  d.Khat.push_back(Mat::Zero(n, n));
  d.Ktilde.push_back(model.gamma0());
  for (std::size_t k = 1; k < K; ++k) {
    double h = d.times[k] - d.times[k - 1];
    d.Khat.push_back(lyapunov_step(d.Khat.back(), Fh[k - 1], Fh[k], Mh[k - 1], Mh[k], h));
    d.Ktilde.push_back(
        lyapunov_step(d.Ktilde.back(), Ft[k - 1], Ft[k], Mt[k - 1], Mt[k], h));
  }
  return d;
}

double moment_kappa(double mu, double p, double horizon) {
  if (!(p > 1.0)) throw DomainError("moment condition requires p > 1");
  return p / (p - 1.0) * horizon * (mu * mu * p - mu);
}

MomentReport check_moment_condition(const MarketModel& model, double mu, double p,
                                    const std::vector<double>& times,
                                    const std::vector<Mat>& covariance, double eps) {
  MomentReport r;
  r.mu = mu;
  r.p = p;
  r.eps = eps;
  r.kappa = moment_kappa(mu, p, model.horizon());
  if (mu >= 0.0 && mu <= 1.0) {
    r.unconditional = true;
    r.pass = true;
    r.worst_margin = std::numeric_limits<double>::infinity();
    return r;
  }
  if (times.size() != covariance.size())
    throw DomainError("check_moment_condition: covariance path size mismatch");
  const Mat I = Mat::Identity(model.n(), model.n());
  r.worst_margin = std::numeric_limits<double>::infinity();
  r.pass = true;
  for (std::size_t k = 0; k < times.size(); ++k) {
    Mat s = model.sigma(times[k]);
    MomentEntry e;
    e.t = times[k];
    e.margin = min_eigenvalue(s * s.transpose() - eps * I - r.kappa * covariance[k]);
    e.pass = e.margin > 0.0;
    r.pass = r.pass && e.pass;
    r.worst_margin = std::min(r.worst_margin, e.margin);
    r.entries.push_back(e);
  }
  return r;
}

MomentReport check_moment_condition(const MarketModel& model,
                                    const ModelDiagnostics& diagnostics, double mu,
                                    double p, MomentCovariance cov, double eps) {
  const auto& path = cov == MomentCovariance::Khat ? diagnostics.Khat : diagnostics.Ktilde;
  return check_moment_condition(model, mu, p, diagnostics.times, path, eps);
}

MomentReport search_moment_condition(const MarketModel& model,
                                     const ModelDiagnostics& diagnostics, double mu,
                                     double eps) {
  static const double ladder[] = {1.05, 1.1, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0};
  MomentReport best;
  bool have = false;
  for (double p : ladder) {
    for (auto cov : {MomentCovariance::Khat, MomentCovariance::Ktilde}) {
      MomentReport r = check_moment_condition(model, diagnostics, mu, p, cov, eps);
      if (r.unconditional || r.pass) return r;
      if (!have || r.worst_margin > best.worst_margin) {
        best = r;
        have = true;
      }
    }
  }
  return best;
}

std::vector<DiagnosticRow> diagnostic_rows(const Cov1Report& cov1) {
  std::vector<DiagnosticRow> rows;
  rows.reserve(cov1.entries.size());
  for (const auto& e : cov1.entries)
    rows.push_back({e.t, e.mode == 0 ? "cov1_m0" : "cov1_m1", e.min_eigenvalue, e.margin});
  return rows;
}

std::vector<DiagnosticRow> diagnostic_rows(const MomentReport& report,
                                           const std::string& label) {
  std::vector<DiagnosticRow> rows;
  rows.reserve(report.entries.size());
  for (const auto& e : report.entries)
    rows.push_back({e.t, label, e.margin + report.eps, e.margin});
  return rows;
}

}  // namespace driftopt
