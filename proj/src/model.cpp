// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "driftopt/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/SVD>

#include "driftopt/errors.hpp"

namespace driftopt {
namespace {

constexpr double kTimeSlack = 1e-12;
constexpr double kMinCSigma = 1e-8;
constexpr double kPsdTolerance = 1e-12;

void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError("invalid market model: " + what);
}

bool square(const Mat& m, int n) { return m.rows() == n && m.cols() == n; }

// Index k with times[k] <= t <= times[k+1] and the blend weight.
std::pair<std::size_t, double> locate(const std::vector<double>& times, double t) {
  if (times.size() == 1) return {0, 0.0};
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t k = it == times.begin() ? 0 : std::size_t(it - times.begin()) - 1;
  k = std::min(k, times.size() - 2);
  double w = (t - times[k]) / (times[k + 1] - times[k]);
  return {k, std::clamp(w, 0.0, 1.0)};
}

// RK4 step for X' = M(t) X.
Mat rk4_linear(const MarketModel& model, int mode, const Mat& x, double t, double h) {
  auto gen = [&](double s) {
    CoefficientNode c = model.at(std::min(s, model.horizon()));
    return Mat(double(mode) * c.b - c.alpha);
  };
  Mat m0 = gen(t), mh = gen(t + 0.5 * h), m1 = gen(t + h);
  Mat k1 = m0 * x;
  Mat k2 = mh * (x + 0.5 * h * k1);
  Mat k3 = mh * (x + 0.5 * h * k2);
  Mat k4 = m1 * (x + h * k3);
  return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Uniform substeps of [a, b] with spacing <= h.
int substeps(double a, double b, double h) {
  return std::max(1, int(std::ceil((b - a) / h - 1e-9)));
}

}  // namespace

MarketModel::MarketModel(MarketInputs in)
    : horizon_(in.horizon),
      times_(std::move(in.times)),
      nodes_(std::move(in.nodes)),
      m0_(std::move(in.m0)),
      gamma0_(std::move(in.gamma0)),
      S0_(std::move(in.S0)) {
  require(horizon_ > 0.0 && std::isfinite(horizon_), "horizon must be positive");
  require(times_.size() >= 2, "time grid needs at least two nodes");
  require(times_.size() == nodes_.size(), "one coefficient node per grid time");
  require(std::abs(times_.front()) <= kTimeSlack, "grid must start at 0");
  require(std::abs(times_.back() - horizon_) <= 1e-9 * std::max(1.0, horizon_),
          "grid must end at the horizon");
  times_.front() = 0.0;
  times_.back() = horizon_;
  for (std::size_t k = 1; k < times_.size(); ++k)
    require(times_[k] > times_[k - 1], "grid times must be strictly increasing");

  n_ = int(m0_.size());
  require(n_ >= 1, "asset count must be >= 1");
  require(square(gamma0_, n_), "gamma0 must be n x n");
  require(S0_.size() == n_, "S0 must have n entries");
  require((S0_.array() > 0.0).all(), "initial prices must be positive");
  require(gamma0_.isApprox(gamma0_.transpose(), 1e-12) ||
              (gamma0_ - gamma0_.transpose()).norm() < 1e-14,
          "gamma0 must be symmetric");
  require(min_eigenvalue(gamma0_) >= -kPsdTolerance,
          "gamma0 must be positive semidefinite");

  c_sigma_ = std::numeric_limits<double>::infinity();
  beta_min_sv_ = std::numeric_limits<double>::infinity();
  for (const auto& c : nodes_) {
    require(square(c.sigma, n_) && square(c.alpha, n_) && square(c.beta, n_) &&
                square(c.b, n_) && c.delta.size() == n_,
            "coefficient dimensions must match n");
    require(c.sigma.allFinite() && c.alpha.allFinite() && c.beta.allFinite() &&
                c.b.allFinite() && c.delta.allFinite() && std::isfinite(c.r),
            "coefficients must be finite");
    c_sigma_ = std::min(c_sigma_, min_eigenvalue(c.sigma * c.sigma.transpose()));
    Eigen::JacobiSVD<Mat> svd(c.beta);
    beta_min_sv_ = std::min(beta_min_sv_, svd.singularValues().minCoeff());
  }
  if (!(c_sigma_ > kMinCSigma)) {
    std::ostringstream os;
    os << "sigma sigma^T is degenerate (min eigenvalue " << c_sigma_
       << " <= " << kMinCSigma << ")";
    require(false, os.str());
  }

  log_bond_.assign(times_.size(), 0.0);
  for (std::size_t k = 1; k < times_.size(); ++k)
    log_bond_[k] = log_bond_[k - 1] +
                   0.5 * (nodes_[k - 1].r + nodes_[k].r) * (times_[k] - times_[k - 1]);
}

MarketModel MarketModel::constant(double horizon, const CoefficientNode& c,
                                  const Vec& m0, const Mat& gamma0, const Vec& S0) {
  MarketInputs in;
  in.horizon = horizon;
  in.times = {0.0, horizon};
  in.nodes = {c, c};
  in.m0 = m0;
  in.gamma0 = gamma0;
  in.S0 = S0;
  return MarketModel(std::move(in));
}

double MarketModel::grid_step() const {
  double h = 0.0;
  for (std::size_t k = 1; k < times_.size(); ++k) h = std::max(h, times_[k] - times_[k - 1]);
  return h;
}

void MarketModel::check_time(double t) const {
  if (!(t >= -kTimeSlack && t <= horizon_ + kTimeSlack * std::max(1.0, horizon_))) {
    std::ostringstream os;
    os << "time " << t << " outside [0, " << horizon_ << "]";
    throw DomainError(os.str());
  }
}

CoefficientNode MarketModel::at(double t) const {
  check_time(t);
  auto [k, w] = locate(times_, t);
  const auto& a = nodes_[k];
  const auto& b = nodes_[k + 1];
  if (w == 0.0) return a;
  if (w == 1.0) return b;
  CoefficientNode c;
  c.sigma = lerp(a.sigma, b.sigma, w);
  c.alpha = lerp(a.alpha, b.alpha, w);
  c.beta = lerp(a.beta, b.beta, w);
  c.b = lerp(a.b, b.b, w);
  c.delta = a.delta + w * (b.delta - a.delta);
  c.r = a.r + w * (b.r - a.r);
  return c;
}

Mat MarketModel::Q(double t) const {
  Mat s = sigma(t);
  return (s * s.transpose()).inverse();
}

double MarketModel::r(double t) const { return at(t).r; }

double MarketModel::bond(double t) const {
  check_time(t);
  t = std::clamp(t, 0.0, horizon_);
  auto [k, w] = locate(times_, t);
  double dt = t - times_[k];
  double r0 = nodes_[k].r;
  double r1 = nodes_[k + 1].r;
  double slope = (r1 - r0) / (times_[k + 1] - times_[k]);
  (void)w;
  return std::exp(log_bond_[k] + r0 * dt + 0.5 * slope * dt * dt);
}

Mat fundamental_matrix(const MarketModel& model, int mode, double t, double s,
                       double max_step) {
  if (mode != 0 && mode != 1) throw DomainError("fundamental_matrix: mode must be 0 or 1");
  model.at(t);
  model.at(s);
  if (s > t) throw DomainError("fundamental_matrix: requires s <= t");
  Mat x = Mat::Identity(model.n(), model.n());
  if (t == s) return x;
  double h_max = std::min(model.grid_step(), max_step);
  int steps = substeps(s, t, h_max);
  double h = (t - s) / steps;
  for (int i = 0; i < steps; ++i) x = rk4_linear(model, mode, x, s + i * h, h);
  return x;
}

std::vector<double> diagnostic_grid(const MarketModel& model, double max_step) {
  std::vector<double> out{0.0};
  const auto& g = model.grid();
  for (std::size_t k = 1; k < g.size(); ++k) {
    int m = substeps(g[k - 1], g[k], max_step);
    for (int i = 1; i <= m; ++i)
      out.push_back(i == m ? g[k] : g[k - 1] + (g[k] - g[k - 1]) * i / m);
  }
  return out;
}

std::vector<Mat> covariance_Km_path(const MarketModel& model, int mode,
                                    const std::vector<double>& times,
                                    double max_step) {
  if (mode != 0 && mode != 1) throw DomainError("covariance_Km: mode must be 0 or 1");
  const int n = model.n();
  for (double t : times) model.at(t);
  // K(t) = Phi(t) J(t) Phi(t)^T with Phi(t) = phi_m(t, 0) and
  // J(t) = int_0^t Phi(s)^{-1} M(s) Phi(s)^{-T} ds, M = b sigma sigma^T b^T.
  auto integrand = [&](double s, const Mat& phi) {
    CoefficientNode c = model.at(s);
    Mat bs = c.b * c.sigma;
    Mat inv = phi.inverse();
    return Mat(inv * bs * bs.transpose() * inv.transpose());
  };
  std::vector<Mat> out;
  out.reserve(times.size());
  Mat phi = Mat::Identity(n, n);
  Mat J = Mat::Zero(n, n);
  double cur = 0.0;
  double h_max = std::min(model.grid_step(), max_step);
  for (double t : times) {
    if (t < cur - kTimeSlack) throw DomainError("covariance_Km_path: times must be sorted");
    if (t > cur) {
      // Composite Simpson on an even number of panels.
      int m = substeps(cur, t, h_max);
      if (m % 2) ++m;
      double h = (t - cur) / m;
      Mat acc = integrand(cur, phi);
      Mat p = phi;
      for (int i = 1; i <= m; ++i) {
        double s0 = cur + (i - 1) * h;
        p = rk4_linear(model, mode, p, s0, h);
        double w = (i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * integrand(s0 + h, p);
      }
      J += (h / 3.0) * acc;
      phi = p;
      cur = t;
    }
    if (t == 0.0) {
      out.push_back(Mat::Zero(n, n));
    } else {
      out.push_back(symmetrize(phi * J * phi.transpose()));
    }
  }
  return out;
}

Mat covariance_Km(const MarketModel& model, int mode, double t, double max_step) {
  return covariance_Km_path(model, mode, {t}, max_step).front();
}

Cov1Report check_cov1(const MarketModel& model, double eps, double max_step) {
  Cov1Report report;
  report.eps = eps;
  report.worst_margin = std::numeric_limits<double>::infinity();
  const auto times = diagnostic_grid(model, max_step);
  const double T = model.horizon();
  const Mat I = Mat::Identity(model.n(), model.n());
  for (int mode = 0; mode <= 1; ++mode) {
    auto K = covariance_Km_path(model, mode, times);
    for (std::size_t k = 0; k < times.size(); ++k) {
      Mat s = model.sigma(times[k]);
      Cov1Entry e;
      e.t = times[k];
      e.mode = mode;
      e.min_eigenvalue = min_eigenvalue(s * s.transpose() - T * K[k]);
      e.margin = min_eigenvalue(s * s.transpose() - T * K[k] - eps * I);
      e.pass = e.margin > 1e-12;
      report.worst_margin = std::min(report.worst_margin, e.margin);
      report.entries.push_back(e);
    }
  }
  report.pass = std::all_of(report.entries.begin(), report.entries.end(),
                            [](const Cov1Entry& e) { return e.pass; });
  return report;
}

}  // namespace driftopt
