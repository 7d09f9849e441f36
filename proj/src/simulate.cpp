// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "driftopt/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "driftopt/errors.hpp"

namespace driftopt {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void put(std::vector<double>& dst, std::size_t k, const Mat& m) {
  const std::size_t r = std::size_t(m.rows()), c = std::size_t(m.cols());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) dst[k * r * c + i * c + j] = m(Eigen::Index(i), Eigen::Index(j));
}

void put(std::vector<double>& dst, std::size_t k, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) dst[k * std::size_t(v.size()) + std::size_t(i)] = v(i);
}

// y = M x for a row-major n x n block.
inline void matvec(const double* M, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += M[i * n + j] * x[j];
    y[i] = acc;
  }
}

std::vector<double> kernel_grid(double t0, double T, std::size_t steps) {
  std::vector<double> g(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) g[k] = t0 + (T - t0) * double(k) / double(steps);
  g.back() = T;
  return g;
}

}  // namespace

const char* to_string(Measure m) { return m == Measure::P ? "P" : "P*"; }

Estimate summarize(const std::vector<double>& samples) {
  Estimate e;
  double sum = 0.0;
  for (double x : samples) {
    if (std::isfinite(x)) {
      sum += x;
      ++e.n;
    } else {
      ++e.bad;
    }
  }
  e.ok = e.bad == 0 && e.n > 0;
  if (e.n == 0) {
    e.value = kNaN;
    e.std_error = kNaN;
    return e;
  }
  e.value = sum / double(e.n);
  double ss = 0.0;
  for (double x : samples)
    if (std::isfinite(x)) ss += (x - e.value) * (x - e.value);
  e.std_error = e.n > 1 ? std::sqrt(ss / double(e.n - 1) / double(e.n)) : 0.0;
  return e;
}

std::size_t steps_for(double span, double dt) {
  if (!(dt > 0.0) || !(span > 0.0) || !std::isfinite(dt))
    throw DomainError("invalid time step");
  double m = span / dt;
  double r = std::round(m);
  if (r < 1.0 || std::abs(m - r) > 1e-9 * std::max(1.0, m)) {
    std::ostringstream os;
    os << "dt = " << dt << " does not divide the interval length " << span;
    throw DomainError(os.str());
  }
  return std::size_t(r);
}

RiccatiSolution riccati_covering(const MarketModel& model, const std::vector<double>& times) {
  const double T = model.horizon();
  const double tol = 1e-12 * std::max(1.0, T);
  std::vector<double> g(times.begin(), times.end());
  g.insert(g.end(), model.grid().begin(), model.grid().end());
  g.push_back(0.0);
  g.push_back(T);
  std::sort(g.begin(), g.end());
  std::vector<double> out;
  for (double t : g) {
    if (t < -tol || t > T + tol) throw DomainError("riccati_covering: time outside [0, T]");
    t = std::clamp(t, 0.0, T);
    if (out.empty() || t - out.back() > tol) out.push_back(t);
  }
  out.back() = T;
  return solve_riccati(model, out);
}

PathKernel::PathKernel(const MarketModel& model, const RiccatiSolution& riccati, double t0,
                       std::size_t steps, Measure measure, std::uint64_t seed,
                       bool track_drift)
    : n_(model.n()),
      measure_(measure),
      track_drift_(track_drift || measure == Measure::P),
      seed_(seed),
      normals_(seed),
      riccati_(std::make_shared<RiccatiSolution>(riccati)) {
  init(model, t0, steps);
}

PathKernel::PathKernel(const MarketModel& model, double dt, Measure measure,
                       std::uint64_t seed, bool track_drift)
    : n_(model.n()),
      measure_(measure),
      track_drift_(track_drift || measure == Measure::P),
      seed_(seed),
      normals_(seed) {
  std::size_t M = steps_for(model.horizon(), dt);
  riccati_ = std::make_shared<RiccatiSolution>(
      riccati_covering(model, kernel_grid(0.0, model.horizon(), M)));
  init(model, 0.0, M);
}

void PathKernel::init(const MarketModel& model, double t0, std::size_t steps) {
  const double T = model.horizon();
  if (steps == 0) throw DomainError("PathKernel: need at least one step");
  if (!(t0 >= 0.0 && t0 < T)) throw DomainError("PathKernel: start time outside [0, T)");
  if (measure_ == Measure::P && t0 != 0.0)
    throw DomainError("PathKernel: physical-measure paths start at t = 0");
  if (riccati_->n() != n_) throw DomainError("PathKernel: Riccati dimension mismatch");
  times_ = kernel_grid(t0, T, steps);
  gamma_nodes_.reserve(times_.size());
  for (double t : times_) gamma_nodes_.push_back(riccati_->gamma(t));

  m0_ = model.m0();
  sqrt_gamma0_ = psd_sqrt(model.gamma0());
  S0_.assign(model.S0().data(), model.S0().data() + n_);

  const std::size_t nn = std::size_t(n_) * std::size_t(n_);
  for (auto* v : {&sig_, &alpha_, &beta_, &b_, &q_, &drift_, &gain_}) v->assign(steps * nn, 0.0);
  for (auto* v : {&adelta_, &half_var_}) v->assign(steps * std::size_t(n_), 0.0);
  dlog_bond_.assign(steps, 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    CoefficientNode c = model.at(times_[k]);
    Mat ss = c.sigma * c.sigma.transpose();
    Mat q = ss.inverse();
    Mat gq = gamma_nodes_[k] * q;
    put(sig_, k, c.sigma);
    put(alpha_, k, c.alpha);
    put(beta_, k, c.beta);
    put(b_, k, c.b);
    put(q_, k, q);
    put(drift_, k, Mat(-c.alpha - gq));
    put(gain_, k, Mat(c.b + gq));
    put(adelta_, k, Vec(c.alpha * c.delta));
    put(half_var_, k, Vec(0.5 * ss.diagonal()));
    dlog_bond_[k] = std::log(model.bond(times_[k + 1])) - std::log(model.bond(times_[k]));
  }
}

PathState PathKernel::make_state() const {
  PathState s;
  const std::size_t n = std::size_t(n_);
  for (auto* v : {&s.a_tilde, &s.a_hat, &s.R, &s.S, &s.dR, &s.dw, &s.dW}) v->assign(n, 0.0);
  s.scratch.assign(4 * n, 0.0);
  return s;
}

void PathKernel::begin(std::uint64_t index, PathState& s) const {
  const int n = n_;
  s.k = 0;
  s.t = times_[0];
  s.y = 0.0;
  s.log_Z = track_drift_ ? 0.0 : kNaN;
  for (int i = 0; i < n; ++i) {
    s.a_hat[i] = m0_(i);
    s.R[i] = 0.0;
    s.S[i] = S0_[std::size_t(i)];
    s.dR[i] = s.dw[i] = s.dW[i] = 0.0;
  }
  if (track_drift_) {
    double* z = s.scratch.data();
    normals_.fill(index, 0, Stream::Initial, z, n);
    for (int i = 0; i < n; ++i) {
      double acc = m0_(i);
      for (int j = 0; j < n; ++j) acc += sqrt_gamma0_(i, j) * z[j];
      s.a_tilde[i] = acc;
    }
  } else {
    std::fill(s.a_tilde.begin(), s.a_tilde.end(), kNaN);
  }
}

void PathKernel::begin_at(std::uint64_t index, const double* a_hat0, double y0,
                          PathState& s) const {
  if (measure_ != Measure::PStar || track_drift_)
    throw DomainError("PathKernel::begin_at: only for P* kernels without drift");
  begin(index, s);
  for (int i = 0; i < n_; ++i) s.a_hat[i] = a_hat0[i];
  s.y = y0;
}

void PathKernel::advance(std::uint64_t index, PathState& s) const {
  const int n = n_;
  const std::size_t k = s.k;
  const std::size_t nn = std::size_t(n) * std::size_t(n);
  const double h = times_[k + 1] - times_[k];
  const double sq = std::sqrt(h);
  const double* sig = sig_.data() + k * nn;
  const double* q = q_.data() + k * nn;
  const double* ad = adelta_.data() + k * std::size_t(n);
  double* z = s.scratch.data();
  double* tmp = z + n;
  double* qa = tmp + n;
  double* ahat_new = qa + n;

  normals_.fill(index, std::uint32_t(k), Stream::Returns, z, n);
  for (int i = 0; i < n; ++i) s.dw[i] = sq * z[i];
  matvec(sig, s.dw.data(), s.dR.data(), n);
  if (measure_ == Measure::P)
    for (int i = 0; i < n; ++i) s.dR[i] += s.a_tilde[i] * h;

  if (track_drift_) {
    normals_.fill(index, std::uint32_t(k), Stream::Drift, z, n);
    for (int i = 0; i < n; ++i) s.dW[i] = sq * z[i];
    // log Z += a~^T Q (dR - a~ h / 2)
    for (int i = 0; i < n; ++i) tmp[i] = s.dR[i] - 0.5 * h * s.a_tilde[i];
    matvec(q, tmp, qa, n);
    double inc = 0.0;
    for (int i = 0; i < n; ++i) inc += s.a_tilde[i] * qa[i];
    s.log_Z += inc;
  }

  // y += -a^T Q a h / 2 + a^T Q dR
  matvec(q, s.a_hat.data(), qa, n);
  double quad = 0.0, lin = 0.0;
  for (int i = 0; i < n; ++i) {
    quad += s.a_hat[i] * qa[i];
    lin += qa[i] * s.dR[i];
  }
  s.y += -0.5 * h * quad + lin;

  // a_hat += (drift a_hat + alpha delta) h + gain dR
  const double* dr = drift_.data() + k * nn;
  const double* gn = gain_.data() + k * nn;
  for (int i = 0; i < n; ++i) {
    double acc = ad[i];
    for (int j = 0; j < n; ++j) acc += dr[i * n + j] * s.a_hat[j];
    double g = 0.0;
    for (int j = 0; j < n; ++j) g += gn[i * n + j] * s.dR[j];
    ahat_new[i] = s.a_hat[i] + acc * h + g;
  }

  if (track_drift_) {
    // a~ += (alpha delta - alpha a~) h + b dR + beta dW
    const double* al = alpha_.data() + k * nn;
    const double* bb = b_.data() + k * nn;
    const double* be = beta_.data() + k * nn;
    for (int i = 0; i < n; ++i) {
      double acc = ad[i];
      double noise = 0.0;
      for (int j = 0; j < n; ++j) {
        acc -= al[i * n + j] * s.a_tilde[j];
        noise += bb[i * n + j] * s.dR[j] + be[i * n + j] * s.dW[j];
      }
      tmp[i] = s.a_tilde[i] + acc * h + noise;
    }
    for (int i = 0; i < n; ++i) s.a_tilde[i] = tmp[i];
  }

  const double* hv = half_var_.data() + k * std::size_t(n);
  for (int i = 0; i < n; ++i) {
    s.a_hat[i] = ahat_new[i];
    s.R[i] += s.dR[i];
    s.S[i] *= std::exp(dlog_bond_[k] + s.dR[i] - hv[i] * h);
  }
  s.k = k + 1;
  s.t = times_[k + 1];
}

FilterState PathBundle::filter_state(std::size_t k) const {
  if (k >= times.size()) throw DomainError("PathBundle::filter_state: node out of range");
  return FilterState{times[k], a_hat.row(Eigen::Index(k)).transpose(), (*gamma)[k], y_extra[k]};
}

namespace {

PathBundle empty_bundle(const PathKernel& kernel, std::uint64_t index,
                        std::shared_ptr<const std::vector<Mat>> gamma) {
  const Eigen::Index M = Eigen::Index(kernel.steps());
  const Eigen::Index n = kernel.n();
  PathBundle b;
  b.times = kernel.times();
  b.dw = Mat::Zero(M, n);
  if (kernel.tracks_drift()) {
    b.dW = Mat::Zero(M, n);
    b.a_tilde = Mat::Zero(M + 1, n);
  }
  b.R_tilde = Mat::Zero(M + 1, n);
  b.S = Mat::Zero(M + 1, n);
  b.a_hat = Mat::Zero(M + 1, n);
  b.y_extra.assign(std::size_t(M) + 1, 0.0);
  b.gamma = std::move(gamma);
  b.measure = kernel.measure();
  b.seed = kernel.seed();
  b.index = index;
  return b;
}

void record(PathBundle& b, const PathState& s) {
  const Eigen::Index k = Eigen::Index(s.k);
  for (Eigen::Index i = 0; i < b.R_tilde.cols(); ++i) {
    std::size_t u = std::size_t(i);
    if (k > 0) {
      b.dw(k - 1, i) = s.dw[u];
      if (b.dW.rows() > 0) b.dW(k - 1, i) = s.dW[u];
    }
    if (b.a_tilde.rows() > 0) b.a_tilde(k, i) = s.a_tilde[u];
    b.R_tilde(k, i) = s.R[u];
    b.S(k, i) = s.S[u];
    b.a_hat(k, i) = s.a_hat[u];
  }
  b.y_extra[s.k] = s.y;
  if (s.k + 1 == b.times.size()) {
    b.log_Z = s.log_Z;
    b.Z = std::exp(s.log_Z);
    b.Zbar = std::exp(s.y);
  }
}

PathBundle run_bundle(const PathKernel& kernel, std::uint64_t index, PathState& s,
                      const std::shared_ptr<const std::vector<Mat>>& gamma) {
  PathBundle b = empty_bundle(kernel, index, gamma);
  kernel.run(index, s, [&](const PathState& st) { record(b, st); });
  return b;
}

}  // namespace

std::vector<PathBundle> simulate_paths(const MarketModel& model, std::size_t count,
                                       double dt, Measure measure, std::uint64_t seed,
                                       bool track_drift) {
  if (count == 0) throw DomainError("simulate_paths: count must be >= 1");
  PathKernel kernel(model, dt, measure, seed, track_drift);
  auto gamma = std::make_shared<const std::vector<Mat>>(kernel.gamma_nodes());
  std::vector<PathBundle> out(count);
  for_each_path(
      count, [&] { return kernel.make_state(); },
      [&](std::size_t i, PathState& s) { out[i] = run_bundle(kernel, i, s, gamma); });
  return out;
}

std::vector<PathBundle> simulate_paths_reference(const MarketModel& model,
                                                 std::size_t count, double dt,
                                                 Measure measure, std::uint64_t seed,
                                                 bool track_drift) {
  if (count == 0) throw DomainError("simulate_paths: count must be >= 1");
  const int n = model.n();
  const std::size_t M = steps_for(model.horizon(), dt);
  const auto times = [&] {
    std::vector<double> g(M + 1);
    for (std::size_t k = 0; k <= M; ++k) g[k] = model.horizon() * double(k) / double(M);
    g.back() = model.horizon();
    return g;
  }();
  const RiccatiSolution riccati = riccati_covering(model, times);
  auto gamma = std::make_shared<std::vector<Mat>>();
  for (double t : times) gamma->push_back(riccati.gamma(t));
  const bool drift = track_drift || measure == Measure::P;
  NormalSource normals(seed);
  const Mat sg0 = psd_sqrt(model.gamma0());

  std::vector<PathBundle> out;
  out.reserve(count);
  for (std::size_t p = 0; p < count; ++p) {
    PathBundle b;
    b.times = times;
    b.dw = Mat::Zero(Eigen::Index(M), n);
    b.R_tilde = Mat::Zero(Eigen::Index(M) + 1, n);
    b.S = Mat::Zero(Eigen::Index(M) + 1, n);
    b.a_hat = Mat::Zero(Eigen::Index(M) + 1, n);
    b.y_extra.assign(M + 1, 0.0);
    b.gamma = gamma;
    b.measure = measure;
    b.seed = seed;
    b.index = p;

    Vec z(n);
    Vec a = Vec::Constant(n, std::numeric_limits<double>::quiet_NaN());
    double logZ = drift ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    if (drift) {
      b.dW = Mat::Zero(Eigen::Index(M), n);
      b.a_tilde = Mat::Zero(Eigen::Index(M) + 1, n);
      normals.fill(p, 0, Stream::Initial, z.data(), n);
      a = model.m0() + sg0 * z;
      b.a_tilde.row(0) = a.transpose();
    }
    FilterState f = initial_filter_state(model);
    f.gamma = (*gamma)[0];
    Vec S = model.S0();
    Vec R = Vec::Zero(n);
    b.S.row(0) = S.transpose();
    b.a_hat.row(0) = f.a_hat.transpose();
    for (std::size_t k = 0; k < M; ++k) {
      const double t = times[k];
      const double h = times[k + 1] - t;
      CoefficientNode c = model.at(t);
      Mat ss = c.sigma * c.sigma.transpose();
      Mat q = ss.inverse();
      normals.fill(p, std::uint32_t(k), Stream::Returns, z.data(), n);
      Vec dw = std::sqrt(h) * z;
      Vec dR = c.sigma * dw;
      if (measure == Measure::P) dR += a * h;
      Vec dW = Vec::Zero(n);
      if (drift) {
        normals.fill(p, std::uint32_t(k), Stream::Drift, z.data(), n);
        dW = std::sqrt(h) * z;
        logZ += a.dot(q * (dR - 0.5 * h * a));
        a = a + (c.alpha * c.delta - c.alpha * a) * h + c.b * dR + c.beta * dW;
      }
      f = filter_step(f, dR, h, model, riccati);
      f.t = times[k + 1];
      double dlb = std::log(model.bond(times[k + 1])) - std::log(model.bond(t));
      for (int i = 0; i < n; ++i) S(i) *= std::exp(dlb + dR(i) - 0.5 * ss(i, i) * h);
      R += dR;
      const Eigen::Index r = Eigen::Index(k) + 1;
      b.dw.row(r - 1) = dw.transpose();
      if (drift) {
        b.dW.row(r - 1) = dW.transpose();
        b.a_tilde.row(r) = a.transpose();
      }
      b.R_tilde.row(r) = R.transpose();
      b.S.row(r) = S.transpose();
      b.a_hat.row(r) = f.a_hat.transpose();
      b.y_extra[k + 1] = f.y_extra;
    }
    b.log_Z = logZ;
    b.Z = std::exp(logZ);
    b.Zbar = std::exp(b.y_extra.back());
    out.push_back(std::move(b));
  }
  return out;
}

double density_Z(const PathBundle& path, const MarketModel& model) {
  if (!path.has_drift())
    throw DomainError("density_Z: bundle carries no drift path");
  double logZ = 0.0;
  const std::size_t M = path.steps();
  for (std::size_t k = 0; k < M; ++k) {
    const double h = path.times[k + 1] - path.times[k];
    Vec a = path.a_tilde.row(Eigen::Index(k)).transpose();
    Vec dR = (path.R_tilde.row(Eigen::Index(k) + 1) - path.R_tilde.row(Eigen::Index(k))).transpose();
    logZ += a.dot(model.Q(path.times[k]) * (dR - 0.5 * h * a));
  }
  return std::exp(logZ);
}

Estimate expectation_under_pstar(const std::function<double(const PathBundle&)>& functional,
                                 const MarketModel& model, std::size_t count, double dt,
                                 std::uint64_t seed) {
  if (count == 0) throw DomainError("expectation_under_pstar: count must be >= 1");
  PathKernel kernel(model, dt, Measure::PStar, seed);
  auto gamma = std::make_shared<const std::vector<Mat>>(kernel.gamma_nodes());
  std::vector<double> values(count);
  for_each_path(
      count, [&] { return kernel.make_state(); },
      [&](std::size_t i, PathState& s) {
        values[i] = functional(run_bundle(kernel, i, s, gamma));
      });
  return summarize(values);
}

std::vector<double> terminal_log_zbar(const MarketModel& model, std::size_t count,
                                      double dt, std::uint64_t seed) {
  if (count == 0) throw DomainError("terminal_log_zbar: count must be >= 1");
  PathKernel kernel(model, dt, Measure::PStar, seed);
  std::vector<double> out(count);
  for_each_path(
      count, [&] { return kernel.make_state(); },
      [&](std::size_t i, PathState& s) {
        kernel.begin(i, s);
        for (std::size_t k = 0; k < kernel.steps(); ++k) kernel.advance(i, s);
        out[i] = s.y;
      });
  return out;
}

}  // namespace driftopt
