// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "driftopt/pde.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include "driftopt/errors.hpp"

namespace driftopt {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Centred weights of one interior node:
//   w1 d2_x1 + b1 d_x1 + w2 d2_x2 + b2 d_x2 + cx dd_x1x2
// with undivided differences d2 u = u+ - 2u + u-, d u = u+ - u- and the
// four-point cross difference dd.
struct Plan {
  double w1 = 0, b1 = 0, w2 = 0, b2 = 0, cx = 0;
  double art1 = 0, art2 = 0;
};

Plan make_plan(double D11, double D12, double D22, double f1, double f2, double h1,
               double h2, bool upwind) {
  Plan pl;
  pl.w1 = 0.5 * D11 / (h1 * h1);
  pl.w2 = 0.5 * D22 / (h2 * h2);
  pl.b1 = f1 / (2.0 * h1);
  pl.b2 = f2 / (2.0 * h2);
  pl.cx = D12 / (4.0 * h1 * h2);
  if (upwind) {
    if (std::abs(pl.b1) > pl.w1) {
      pl.art1 = (std::abs(pl.b1) - pl.w1) * h1 * h1;
      pl.w1 = std::abs(pl.b1);
    }
    if (std::abs(pl.b2) > pl.w2) {
      pl.art2 = (std::abs(pl.b2) - pl.w2) * h2 * h2;
      pl.w2 = std::abs(pl.b2);
    }
  }
  return pl;
}

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// k(t) = Q / gain of the aligned coordinate xi = y - k a^2 / 2; NaN when the
// gain is not bounded away from zero.
double aligned_k(const MarketModel& model, const RiccatiSolution& riccati, double t) {
  const double sg = model.sigma(t)(0, 0);
  const double G = riccati.gain(t)(0, 0);
  const double Q = 1.0 / (sg * sg);
  if (!(std::abs(G) > 1e-8 * Q)) return std::numeric_limits<double>::quiet_NaN();
  return Q / G;
}

// Coefficients of the backward equation in (a, xi) at time t.
struct AlignedCoefficients {
  double Dr, ad, Q, D, k, dk;
  double a_drift(double a) const { return Dr * a + ad; }
  // The noise of y and of k a^2 / 2 cancel, leaving a pure drift in xi.
  double xi_drift(double a) const {
    return -0.5 * Q * a * a - 0.5 * dk * a * a - k * a * a_drift(a) - 0.5 * k * D;
  }
};

AlignedCoefficients aligned_coefficients(const MarketModel& model, const RiccatiSolution& riccati,
                                         double t) {
  const double T = model.horizon();
  auto k_of = [&](double s) {
    const double k = aligned_k(model, riccati, s);
    if (!std::isfinite(k)) throw SolverError("aligned scheme: the filter gain vanishes");
    return k;
  };
  const CoefficientNode c = model.at(t);
  const double sg = c.sigma(0, 0);
  const double G = riccati.gain(t)(0, 0);
  const double step = 1e-6 * std::max(1.0, T);
  const double lo = std::max(0.0, t - step), hi = std::min(T, t + step);
  AlignedCoefficients a;
  a.Dr = riccati.drift(t)(0, 0);
  a.ad = (c.alpha * c.delta)(0);
  a.Q = 1.0 / (sg * sg);
  a.D = sg * G * sg * G;
  a.k = k_of(t);
  a.dk = (k_of(hi) - k_of(lo)) / (hi - lo);
  return a;
}

// Implicit Euler step matrices are solved by BiCGSTAB with an incomplete LU
// preconditioner that is rebuilt when the iteration count grows.
class StepSolver {
 public:
  explicit StepSolver(FDStats& stats) : stats_(stats) {
    ilu_.setDroptol(1e-5);
    ilu_.setFillfactor(4);
  }

  Eigen::VectorXd solve(const SpMat& A, const Eigen::VectorXd& rhs, const Eigen::VectorXd& guess,
                        double t) {
    auto build = [&] {
      ilu_.compute(A);
      if (ilu_.info() != Eigen::Success) throw SolverError("preconditioner setup failed");
      since_build_ = 0;
      ++stats_.preconditioner_builds;
    };
    Eigen::VectorXd x;
    Eigen::Index iters;
    double err;
    auto attempt = [&] {
      x = guess;
      iters = 1000;
      err = 1e-10;
      return Eigen::internal::bicgstab(A, rhs, x, ilu_, iters, err);
    };
    if (since_build_ < 0) build();
    bool ok = attempt();
    if (!ok || iters > 20) {
      build();
      ok = attempt();
    }
    if (!ok || !x.allFinite()) {
      std::ostringstream os;
      os << "linear solve failed at t = " << t << " (residual " << err << ")";
      throw SolverError(os.str());
    }
    stats_.max_iterations = std::max(stats_.max_iterations, int(iters));
    stats_.max_residual = std::max(stats_.max_residual, err);
    ++since_build_;
    return x;
  }

 private:
  FDStats& stats_;
  Eigen::IncompleteLUT<double> ilu_;
  int since_build_ = -1;
};

// Rows assembled as (column, value) pairs into CSR arrays.
struct CsrBuilder {
  std::vector<int> outer, inner;
  std::vector<double> vals;
  std::vector<std::pair<int, double>> row;

  explicit CsrBuilder(std::size_t n, std::size_t per_row) : outer(n + 1) {
    inner.reserve(n * per_row);
    vals.reserve(n * per_row);
    row.reserve(per_row + 1);
  }
  void clear() {
    inner.clear();
    vals.clear();
  }
  void commit(std::size_t r) {
    outer[r] = int(inner.size());
    std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [col, v] : row) {
      if (v == 0.0 && col != int(r)) continue;
      inner.push_back(col);
      vals.push_back(v);
    }
    row.clear();
  }
  SpMat matrix(std::size_t n) {
    outer[n] = int(inner.size());
    return Eigen::Map<const SpMat>(Eigen::Index(n), Eigen::Index(n), Eigen::Index(inner.size()),
                                   outer.data(), inner.data(), vals.data());
  }
};

std::size_t snapshot_stride(const GridSpec& gs) {
  return std::max<std::size_t>(
      1, (gs.nt + gs.max_snapshots - 2) / std::max<std::size_t>(1, gs.max_snapshots - 1));
}

}  // namespace

const char* to_string(FDScheme s) {
  switch (s) {
    case FDScheme::Auto: return "auto";
    case FDScheme::Centred: return "centred";
    case FDScheme::Aligned: return "aligned";
  }
  return "?";
}

PDECoefficients coefficients(const MarketModel& model, const RiccatiSolution& riccati) {
  auto m = std::make_shared<MarketModel>(model);
  auto r = std::make_shared<RiccatiSolution>(riccati);
  const int n = model.n();
  auto check = [n](const Vec& x) {
    if (x.size() != n + 1) throw DomainError("PDE state must have n + 1 coordinates");
  };
  PDECoefficients c;
  c.f = [m, r, check, n](const Vec& x, double t) {
    check(x);
    CoefficientNode cn = m->at(t);
    Vec a = x.head(n);
    Mat q = m->Q(t);
    Vec out(n + 1);
    out.head(n) = r->drift(t) * a + cn.alpha * cn.delta;
    out(n) = -0.5 * a.dot(q * a);
    return out;
  };
  c.g = [m, r, check, n](const Vec& x, double t) {
    check(x);
    Mat q = m->Q(t);
    Mat out(n + 1, n);
    out.topRows(n) = r->gain(t);
    out.row(n) = (q * x.head(n)).transpose();
    return out;
  };
  c.diffusion = [m, g = c.g](const Vec& x, double t) {
    Mat gg = g(x, t);
    Mat s = m->sigma(t);
    return Mat(gg * s * s.transpose() * gg.transpose());
  };
  return c;
}

TerminalCondition claim_terminal(const UtilitySpec& u, double lambda) {
  if (!u.multipliers().contains(lambda))
    throw DomainError("claim_terminal: lambda outside the multiplier set");
  TerminalCondition tc;
  tc.label = u.name() + " claim";
  tc.phi = [u, lambda](const Vec& x) { return claim_value(u, std::exp(x(x.size() - 1)), lambda); };
  switch (u.kind) {
    case UtilityKind::Log: tc.kappa_lo = tc.kappa_hi = 1.0; break;
    case UtilityKind::Power: tc.kappa_lo = tc.kappa_hi = u.claim_exponent(); break;
    case UtilityKind::Quadratic: tc.kappa_lo = tc.kappa_hi = -1.0; break;
    case UtilityKind::LinearPenalty:
      tc.kappa_lo = -double(u.l);
      tc.kappa_hi = -1.0;
      break;
    case UtilityKind::Goal: {
      const double jump = std::log(lambda * u.goal);
      const double level = u.goal;
      tc.smoothed = [jump, level](const Vec& x, double width) {
        double y = x(x.size() - 1);
        if (!(width > 0.0)) return y >= jump ? level : 0.0;
        return level * std::clamp((y - jump) / width + 0.5, 0.0, 1.0);
      };
      break;
    }
  }
  return tc;
}

TerminalCondition constant_terminal(double c) {
  TerminalCondition tc;
  tc.label = "constant";
  tc.phi = [c](const Vec&) { return c; };
  return tc;
}

TerminalCondition log_density_terminal() {
  TerminalCondition tc;
  tc.label = "exp(y)";
  tc.phi = [](const Vec& x) { return std::exp(x(x.size() - 1)); };
  tc.kappa_lo = tc.kappa_hi = 1.0;
  return tc;
}

TerminalCondition combine(double a, const TerminalCondition& p1, double b,
                          const TerminalCondition& p2) {
  if (p1.kappa_lo != p2.kappa_lo || p1.kappa_hi != p2.kappa_hi)
    throw DomainError("combine: terminal conditions have different far-field exponents");
  TerminalCondition tc;
  tc.label = "combination";
  tc.kappa_lo = p1.kappa_lo;
  tc.kappa_hi = p1.kappa_hi;
  tc.phi = [a, b, f1 = p1.phi, f2 = p2.phi](const Vec& x) { return a * f1(x) + b * f2(x); };
  if (p1.smoothed || p2.smoothed) {
    auto s1 = p1.smoothed ? p1.smoothed : [f = p1.phi](const Vec& x, double) { return f(x); };
    auto s2 = p2.smoothed ? p2.smoothed : [f = p2.phi](const Vec& x, double) { return f(x); };
    tc.smoothed = [a, b, s1, s2](const Vec& x, double w) { return a * s1(x, w) + b * s2(x, w); };
  }
  return tc;
}

GridSpec auto_grid(const MarketModel& model, const RiccatiSolution& riccati, std::size_t nx1,
                   std::size_t nx2, std::size_t nt, std::uint64_t seed, double k_dom,
                   std::size_t pilot) {
  if (model.n() != 1) throw SolverError("finite differences support n = 1 only");
  if (nx1 < 5 || nx2 < 5 || nt < 1) throw DomainError("auto_grid: grid too small");
  double lo1 = kInf, hi1 = -kInf, lo2 = 0.0, hi2 = 0.0, lo3 = kInf, hi3 = -kInf;
  bool aligned = true;
  for (Measure measure : {Measure::PStar, Measure::P}) {
    PathKernel kernel(model, riccati, 0.0, nt, measure, seed);
    const std::size_t K = kernel.steps() + 1;
    std::vector<double> a(pilot * K), y(pilot * K), xi(pilot * K);
    std::vector<double> k_at(K);
    for (std::size_t k = 0; k < K; ++k) {
      k_at[k] = aligned_k(model, riccati, kernel.times()[k]);
      if (!std::isfinite(k_at[k])) aligned = false;
    }
    for_each_path(
        pilot, [&] { return kernel.make_state(); },
        [&](std::size_t i, PathState& s) {
          kernel.run(i, s, [&](const PathState& st) {
            a[i * K + st.k] = st.a_hat[0];
            y[i * K + st.k] = st.y;
            xi[i * K + st.k] = st.y - 0.5 * k_at[st.k] * st.a_hat[0] * st.a_hat[0];
          });
        });
    auto envelope = [&](const std::vector<double>& v, double& lo, double& hi) {
      for (std::size_t k = 0; k < K; ++k) {
        double m = 0.0, var = 0.0;
        for (std::size_t i = 0; i < pilot; ++i) m += v[i * K + k];
        m /= double(pilot);
        for (std::size_t i = 0; i < pilot; ++i) var += (v[i * K + k] - m) * (v[i * K + k] - m);
        double sd = std::sqrt(var / double(std::max<std::size_t>(1, pilot - 1)));
        lo = std::min(lo, m - k_dom * sd);
        hi = std::max(hi, m + k_dom * sd);
      }
    };
    envelope(a, lo1, hi1);
    envelope(y, lo2, hi2);
    if (aligned) envelope(xi, lo3, hi3);
  }

  auto pad = [](double& lo, double& hi) {
    double c = 0.5 * (lo + hi);
    double half = std::max(0.5 * (hi - lo), 1e-2 * (1.0 + std::abs(c)));
    lo = c - half;
    hi = c + half;
  };
  pad(lo1, hi1);
  pad(lo2, hi2);
  GridSpec g;
  g.x1_lo = lo1;
  g.x1_hi = hi1;
  g.x2_lo = lo2;
  g.x2_hi = hi2;
  if (aligned) {
    // Transport in xi carries the outflow face values inward; doubling the
    // range keeps them away from the envelope.
    const double half = 0.5 * (hi3 - lo3);
    lo3 -= half;
    hi3 += half;
    pad(lo3, hi3);
    g.xi_lo = lo3;
    g.xi_hi = hi3;
  } else {
    g.xi_lo = g.xi_hi = std::numeric_limits<double>::quiet_NaN();
  }
  g.nx1 = nx1;
  g.nx2 = nx2;
  g.nt = nt;
  return g;
}

GridSpec coarsen(const GridSpec& g) {
  GridSpec c = g;
  c.nx1 = (g.nx1 - 1) / 2 + 1;
  c.nx2 = (g.nx2 - 1) / 2 + 1;
  c.nt = std::max<std::size_t>(1, g.nt / 2);
  return c;
}

bool PDESolution::in_grid(const Vec& x) const {
  if (solver != SolverKind::FD || x.size() != 2) return false;
  return x(0) >= grid.x1_lo && x(0) <= grid.x1_hi && x(1) >= grid.x2_lo && x(1) <= grid.x2_hi;
}

double PDESolution::cells_outside(const Vec& x) const {
  const double h1 = (grid.x1_hi - grid.x1_lo) / double(grid.nx1 - 1);
  const double h2 = (grid.x2_hi - grid.x2_lo) / double(grid.nx2 - 1);
  double o1 = std::max({0.0, grid.x1_lo - x(0), x(0) - grid.x1_hi}) / h1;
  double o2 = std::max({0.0, grid.x2_lo - x(1), x(1) - grid.x2_hi}) / h2;
  return std::max(o1, o2);
}

void PDESolution::locate_time(double t, std::size_t& s, double& w) const {
  const auto& ts = snapshot_times;
  if (ts.size() < 2) throw DomainError("PDESolution has no time snapshots");
  const double slack = 1e-12 * std::max(1.0, ts.back());
  if (t < ts.front() - slack || t > ts.back() + slack)
    throw DomainError("PDESolution: time outside [0, T]");
  t = std::clamp(t, ts.front(), ts.back());
  auto it = std::upper_bound(ts.begin(), ts.end(), t);
  s = std::min<std::size_t>(std::size_t(it - ts.begin()), ts.size() - 1);
  s = s == 0 ? 0 : s - 1;
  s = std::min(s, ts.size() - 2);
  w = (t - ts[s]) / (ts[s + 1] - ts[s]);
}

double PDESolution::interp_node_values(const std::vector<double>& v, double a, double b) const {
  const std::size_t N1 = x1.size(), N2 = x2.size();
  const double h1 = x1[1] - x1[0], h2 = x2[1] - x2[0];
  double u = std::clamp((a - x1[0]) / h1, 0.0, double(N1 - 1));
  double r = std::clamp((b - x2[0]) / h2, 0.0, double(N2 - 1));
  std::size_t i = std::min<std::size_t>(std::size_t(u), N1 - 2);
  std::size_t j = std::min<std::size_t>(std::size_t(r), N2 - 2);
  double fu = u - double(i), fr = r - double(j);
  auto at = [&](std::size_t ii, std::size_t jj) { return v[ii * N2 + jj]; };
  return (1 - fu) * (1 - fr) * at(i, j) + fu * (1 - fr) * at(i + 1, j) +
         (1 - fu) * fr * at(i, j + 1) + fu * fr * at(i + 1, j + 1);
}

Vec PDESolution::node_gradient_interp(const std::vector<double>& v, double a, double b) const {
  const std::size_t N1 = x1.size(), N2 = x2.size();
  const double h1 = x1[1] - x1[0], h2 = x2[1] - x2[0];
  auto at = [&](std::size_t ii, std::size_t jj) { return v[ii * N2 + jj]; };
  auto grad = [&](std::size_t i, std::size_t j) {
    double g1, g2;
    if (i == 0) g1 = (at(1, j) - at(0, j)) / h1;
    else if (i == N1 - 1) g1 = (at(i, j) - at(i - 1, j)) / h1;
    else g1 = (at(i + 1, j) - at(i - 1, j)) / (2.0 * h1);
    if (j == 0) g2 = (at(i, 1) - at(i, 0)) / h2;
    else if (j == N2 - 1) g2 = (at(i, j) - at(i, j - 1)) / h2;
    else g2 = (at(i, j + 1) - at(i, j - 1)) / (2.0 * h2);
    return std::array<double, 2>{g1, g2};
  };
  double u = std::clamp((a - x1[0]) / h1, 0.0, double(N1 - 1));
  double r = std::clamp((b - x2[0]) / h2, 0.0, double(N2 - 1));
  std::size_t i = std::min<std::size_t>(std::size_t(u), N1 - 2);
  std::size_t j = std::min<std::size_t>(std::size_t(r), N2 - 2);
  double fu = u - double(i), fr = r - double(j);
  auto g00 = grad(i, j), g10 = grad(i + 1, j), g01 = grad(i, j + 1), g11 = grad(i + 1, j + 1);
  Vec out(2);
  for (int k = 0; k < 2; ++k)
    out(k) = (1 - fu) * (1 - fr) * g00[k] + fu * (1 - fr) * g10[k] + (1 - fu) * fr * g01[k] +
             fu * fr * g11[k];
  return out;
}

double PDESolution::value(const Vec& x, double t) const {
  if (solver != SolverKind::FD) throw DomainError("value(): probe-table solutions have no grid");
  if (x.size() != 2) throw DomainError("value(): state must have 2 coordinates");
  std::size_t s;
  double w;
  locate_time(t, s, w);
  double v0 = interp_node_values(snapshots[s], x(0), x(1));
  if (w == 0.0) return v0;
  double v1 = interp_node_values(snapshots[s + 1], x(0), x(1));
  return (1 - w) * v0 + w * v1;
}

Vec PDESolution::gradient(const Vec& x, double t) const {
  if (solver != SolverKind::FD) throw DomainError("gradient(): probe-table solutions have no grid");
  if (x.size() != 2) throw DomainError("gradient(): state must have 2 coordinates");
  std::size_t s;
  double w;
  locate_time(t, s, w);
  Vec g0 = node_gradient_interp(snapshots[s], x(0), x(1));
  if (w == 0.0) return g0;
  Vec g1 = node_gradient_interp(snapshots[s + 1], x(0), x(1));
  return (1 - w) * g0 + w * g1;
}

namespace {

void solve_centred(const MarketModel& model, const RiccatiSolution& riccati,
                   const TerminalCondition& terminal, PDESolution& sol) {
  const GridSpec& gs = sol.grid;
  const std::size_t N1 = gs.nx1, N2 = gs.nx2, N = N1 * N2;
  const double T = model.horizon();
  const double h1 = sol.x1[1] - sol.x1[0];
  const double h2 = sol.x2[1] - sol.x2[0];
  const double dt = T / double(gs.nt);

  Eigen::VectorXd V(static_cast<Eigen::Index>(N)), rhs(static_cast<Eigen::Index>(N));
  for (std::size_t i = 0; i < N1; ++i)
    for (std::size_t j = 0; j < N2; ++j) {
      Vec x(2);
      x << sol.x1[i], sol.x2[j];
      double v = terminal.smoothed ? terminal.smoothed(x, 2.0 * h2) : terminal.phi(x);
      if (!std::isfinite(v)) throw SolverError("terminal condition is not finite on the grid");
      V(Eigen::Index(i * N2 + j)) = v;
    }

  const std::size_t stride = snapshot_stride(gs);
  auto store = [&](double t) {
    sol.snapshot_times.push_back(t);
    sol.snapshots.emplace_back(V.data(), V.data() + N);
  };
  store(T);

  const double rho_lo = std::exp(-terminal.kappa_lo * h2);
  const double rho_hi = std::exp(terminal.kappa_hi * h2);

  CsrBuilder csr(N, 9);
  StepSolver solver(sol.stats);
  std::vector<Plan> plans(N1);

  for (std::size_t step = gs.nt; step-- > 0;) {
    const double t = T * double(step) / double(gs.nt);
    CoefficientNode c = model.at(t);
    const double sg = c.sigma(0, 0);
    const double Q = 1.0 / (sg * sg);
    const double G = riccati.gain(t)(0, 0);
    const double Dr = riccati.drift(t)(0, 0);
    const double ad = (c.alpha * c.delta)(0);
    for (std::size_t i = 1; i + 1 < N1; ++i) {
      const double x = sol.x1[i];
      const double v1 = sg * G;
      const double v2 = sg * x * Q;
      plans[i] = make_plan(v1 * v1, v1 * v2, v2 * v2, Dr * x + ad, -0.5 * Q * x * x, h1, h2,
                           gs.upwind);
      sol.stats.max_artificial_x1 = std::max(sol.stats.max_artificial_x1, plans[i].art1);
      sol.stats.max_artificial_x2 = std::max(sol.stats.max_artificial_x2, plans[i].art2);
    }

    csr.clear();
    auto idx = [&](std::size_t ii, std::size_t jj) { return int(ii * N2 + jj); };
    std::size_t r = 0;
    for (std::size_t i = 0; i < N1; ++i) {
      for (std::size_t j = 0; j < N2; ++j, ++r) {
        auto& row = csr.row;
        if (i == 0) {
          row = {{idx(0, j), 1.0}, {idx(1, j), -2.0}, {idx(2, j), 1.0}};
          rhs(Eigen::Index(r)) = 0.0;
        } else if (i == N1 - 1) {
          row = {{idx(i - 2, j), 1.0}, {idx(i - 1, j), -2.0}, {idx(i, j), 1.0}};
          rhs(Eigen::Index(r)) = 0.0;
        } else if (j == 0) {
          row = {{idx(i, 0), 1.0}, {idx(i, 1), -(1.0 + rho_lo)}, {idx(i, 2), rho_lo}};
          rhs(Eigen::Index(r)) = 0.0;
        } else if (j == N2 - 1) {
          row = {{idx(i, j - 2), rho_hi}, {idx(i, j - 1), -(1.0 + rho_hi)}, {idx(i, j), 1.0}};
          rhs(Eigen::Index(r)) = 0.0;
        } else {
          const Plan& pl = plans[i];
          row.push_back({idx(i, j), 1.0 + dt * 2.0 * (pl.w1 + pl.w2)});
          row.push_back({idx(i - 1, j), -dt * (pl.w1 - pl.b1)});
          row.push_back({idx(i + 1, j), -dt * (pl.w1 + pl.b1)});
          row.push_back({idx(i, j - 1), -dt * (pl.w2 - pl.b2)});
          row.push_back({idx(i, j + 1), -dt * (pl.w2 + pl.b2)});
          row.push_back({idx(i + 1, j + 1), -dt * pl.cx});
          row.push_back({idx(i - 1, j - 1), -dt * pl.cx});
          row.push_back({idx(i + 1, j - 1), dt * pl.cx});
          row.push_back({idx(i - 1, j + 1), dt * pl.cx});
          rhs(Eigen::Index(r)) = V(Eigen::Index(r));
        }
        csr.commit(r);
      }
    }
    const SpMat A = csr.matrix(N);
    V = solver.solve(A, rhs, V, t);
    if (step % stride == 0) store(t);
  }
}

void solve_aligned(const MarketModel& model, const RiccatiSolution& riccati,
                   const TerminalCondition& terminal, PDESolution& sol) {
  const GridSpec& gs = sol.grid;
  const std::size_t N1 = gs.nx1, N2 = gs.nx2, N = N1 * N2;
  const double T = model.horizon();
  const double h1 = sol.x1[1] - sol.x1[0];
  const double h3 = (gs.xi_hi - gs.xi_lo) / double(N2 - 1);
  const double dt = T / double(gs.nt);
  auto k_of = [&](double t) {
    const double k = aligned_k(model, riccati, t);
    if (!std::isfinite(k)) throw SolverError("aligned scheme: the filter gain vanishes");
    return k;
  };

  Eigen::VectorXd W(static_cast<Eigen::Index>(N)), rhs(static_cast<Eigen::Index>(N));
  const double kT = k_of(T);
  for (std::size_t i = 0; i < N1; ++i)
    for (std::size_t j = 0; j < N2; ++j) {
      const double a = sol.x1[i];
      Vec x(2);
      x << a, gs.xi_lo + h3 * double(j) + 0.5 * kT * a * a;
      double v = terminal.smoothed ? terminal.smoothed(x, 2.0 * h3) : terminal.phi(x);
      if (!std::isfinite(v)) throw SolverError("terminal condition is not finite on the grid");
      W(Eigen::Index(i * N2 + j)) = v;
    }

  // The a nodes coincide with the x1 nodes, so resampling is linear in xi.
  const std::size_t M2 = sol.x2.size();
  auto store = [&](double t) {
    const double k = k_of(t);
    std::vector<double> out(N1 * M2);
    for (std::size_t i = 0; i < N1; ++i) {
      const double a = sol.x1[i];
      for (std::size_t j = 0; j < M2; ++j) {
        const double u =
            std::clamp((sol.x2[j] - 0.5 * k * a * a - gs.xi_lo) / h3, 0.0, double(N2 - 1));
        const std::size_t m = std::min<std::size_t>(std::size_t(u), N2 - 2);
        const double f = u - double(m);
        out[i * M2 + j] = (1.0 - f) * W(Eigen::Index(i * N2 + m)) + f * W(Eigen::Index(i * N2 + m + 1));
      }
    }
    sol.snapshot_times.push_back(t);
    sol.snapshots.push_back(std::move(out));
  };
  const std::size_t stride = snapshot_stride(gs);
  store(T);

  CsrBuilder csr(N, 4);
  StepSolver solver(sol.stats);

  for (std::size_t step = gs.nt; step-- > 0;) {
    const double t = T * double(step) / double(gs.nt);
    const AlignedCoefficients ac = aligned_coefficients(model, riccati, t);
    csr.clear();
    auto idx = [&](std::size_t ii, std::size_t jj) { return int(ii * N2 + jj); };
    std::size_t r = 0;
    for (std::size_t i = 0; i < N1; ++i) {
      const double a = sol.x1[i];
      const double f1 = ac.a_drift(a);
      const double cxi = ac.xi_drift(a);
      double w = 0.5 * ac.D / (h1 * h1);
      const double b = f1 / (2.0 * h1);
      if (i > 0 && i + 1 < N1) {
        if (std::abs(b) > w) {
          sol.stats.max_artificial_x1 = std::max(sol.stats.max_artificial_x1, (std::abs(b) - w) * h1 * h1);
          w = std::abs(b);
        }
        sol.stats.max_artificial_x2 = std::max(sol.stats.max_artificial_x2, 0.5 * std::abs(cxi) * h3);
      }
      const double up = dt * std::abs(cxi) / h3;
      for (std::size_t j = 0; j < N2; ++j, ++r) {
        auto& row = csr.row;
        if (i == 0 || i == N1 - 1) {
          row = {{idx(i, j), 1.0}, {idx(i == 0 ? 1 : N1 - 2, j), -1.0}};
          rhs(Eigen::Index(r)) = 0.0;
        } else {
          double diag = 1.0 + dt * 2.0 * w;
          row.push_back({idx(i - 1, j), -dt * (w - b)});
          row.push_back({idx(i + 1, j), -dt * (w + b)});
          if (cxi > 0.0 && j + 1 < N2) {
            diag += up;
            row.push_back({idx(i, j + 1), -up});
          } else if (cxi < 0.0 && j > 0) {
            diag += up;
            row.push_back({idx(i, j - 1), -up});
          }
          row.push_back({idx(i, j), diag});
          rhs(Eigen::Index(r)) = W(Eigen::Index(r));
        }
        csr.commit(r);
      }
    }
    const SpMat A = csr.matrix(N);
    W = solver.solve(A, rhs, W, t);
    if (step % stride == 0) store(t);
  }
}

}  // namespace

PDESolution solve_pde_fd(const MarketModel& model, const RiccatiSolution& riccati,
                         const TerminalCondition& terminal, const GridSpec& gs) {
  if (model.n() != 1)
    throw SolverError("finite differences support n = 1 only; use the Monte Carlo solver");
  if (gs.nx1 < 5 || gs.nx2 < 5 || gs.nt < 1 || !(gs.x1_hi > gs.x1_lo) ||
      !(gs.x2_hi > gs.x2_lo))
    throw DomainError("solve_pde_fd: invalid grid specification");
  FDScheme scheme = gs.scheme;
  if (scheme == FDScheme::Auto)
    scheme = terminal.discontinuous() && gs.aligned_available() ? FDScheme::Aligned
                                                                : FDScheme::Centred;
  if (scheme == FDScheme::Aligned && !gs.aligned_available())
    throw SolverError("aligned scheme needs a xi range from auto_grid and a non-vanishing gain");

  const std::size_t N1 = gs.nx1, N2 = gs.nx2;
  const double h1 = (gs.x1_hi - gs.x1_lo) / double(N1 - 1);
  const double h2 = (gs.x2_hi - gs.x2_lo) / double(N2 - 1);

  PDESolution sol;
  sol.solver = SolverKind::FD;
  sol.terminal_label = terminal.label;
  sol.grid = gs;
  sol.grid.scheme = scheme;
  sol.x1.resize(N1);
  sol.x2.resize(N2);
  for (std::size_t i = 0; i < N1; ++i) sol.x1[i] = gs.x1_lo + h1 * double(i);
  for (std::size_t j = 0; j < N2; ++j) sol.x2[j] = gs.x2_lo + h2 * double(j);
  sol.x1.back() = gs.x1_hi;
  sol.x2.back() = gs.x2_hi;

  if (scheme == FDScheme::Aligned)
    solve_aligned(model, riccati, terminal, sol);
  else
    solve_centred(model, riccati, terminal, sol);

  std::reverse(sol.snapshot_times.begin(), sol.snapshot_times.end());
  std::reverse(sol.snapshots.begin(), sol.snapshots.end());
  sol.snapshot_times.front() = 0.0;
  return sol;
}

VEstimate estimate_V_mc(const MarketModel& model, const RiccatiSolution& riccati,
                        const TerminalCondition& terminal, const Vec& x, double t,
                        const FKConfig& mc) {
  const int n = model.n();
  const int d = n + 1;
  if (x.size() != d) throw DomainError("estimate_V_mc: state must have n + 1 coordinates");
  if (mc.paths == 0 || !(mc.dt > 0.0)) throw DomainError("estimate_V_mc: invalid Monte Carlo settings");
  const double T = model.horizon();
  model.at(t);
  std::vector<double> bump(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) bump[std::size_t(k)] = 1e-3 * std::max(1.0, std::abs(x(k)));

  VEstimate out;
  out.gradient = Vec::Zero(d);
  out.gradient_std_error = Vec::Zero(d);
  if (T - t <= 1e-12 * std::max(1.0, T)) {
    out.value = terminal.phi(x);
    for (int k = 0; k < d; ++k) {
      Vec xp = x, xm = x;
      xp(k) += bump[std::size_t(k)];
      xm(k) -= bump[std::size_t(k)];
      out.gradient(k) = (terminal.phi(xp) - terminal.phi(xm)) / (2.0 * bump[std::size_t(k)]);
    }
    return out;
  }

  const std::size_t steps =
      std::max<std::size_t>(1, std::size_t(std::ceil((T - t) / mc.dt - 1e-9)));
  PathKernel kernel(model, riccati, t, steps, Measure::PStar, mc.seed);
  const std::size_t N = mc.paths;
  const int runs = mc.gradient ? 1 + 2 * d : 1;
  std::vector<double> vals(N);
  std::vector<std::vector<double>> diffs(std::size_t(mc.gradient ? d : 0), std::vector<double>(N));

  for_each_path(
      N, [&] { return kernel.make_state(); },
      [&](std::size_t i, PathState& s) {
        Vec start(d);
        auto terminal_at = [&](const Vec& x0) {
          kernel.begin_at(i, x0.data(), x0(n), s);
          for (std::size_t k = 0; k < kernel.steps(); ++k) kernel.advance(i, s);
          Vec y(d);
          for (int k = 0; k < n; ++k) y(k) = s.a_hat[std::size_t(k)];
          y(n) = s.y;
          return terminal.phi(y);
        };
        vals[i] = terminal_at(x);
        for (int r = 1; r < runs; r += 2) {
          int k = (r - 1) / 2;
          Vec xp = x, xm = x;
          xp(k) += bump[std::size_t(k)];
          xm(k) -= bump[std::size_t(k)];
          double fp = terminal_at(xp), fm = terminal_at(xm);
          diffs[std::size_t(k)][i] = (fp - fm) / (2.0 * bump[std::size_t(k)]);
        }
      });
  Estimate e = summarize(vals);
  out.value = e.value;
  out.std_error = e.std_error;
  out.bad = e.bad;
  for (std::size_t k = 0; k < diffs.size(); ++k) {
    Estimate g = summarize(diffs[k]);
    out.gradient(Eigen::Index(k)) = g.value;
    out.gradient_std_error(Eigen::Index(k)) = g.std_error;
  }
  return out;
}

PDESolution solve_pde_mc(const MarketModel& model, const RiccatiSolution& riccati,
                         const TerminalCondition& terminal,
                         const std::vector<std::pair<Vec, double>>& probes,
                         const FKConfig& mc) {
  PDESolution sol;
  sol.solver = SolverKind::MC;
  sol.terminal_label = terminal.label;
  auto m = std::make_shared<const MarketModel>(model);
  auto ric = std::make_shared<const RiccatiSolution>(riccati);
  sol.estimator = [m, ric, terminal, mc](const Vec& x, double t) {
    return estimate_V_mc(*m, *ric, terminal, x, t, mc);
  };
  for (const auto& [x, t] : probes) {
    VEstimate v = sol.estimator(x, t);
    sol.probes.push_back({x, t, v.value, v.std_error, v.gradient, v.gradient_std_error, v.bad});
  }
  return sol;
}

}  // namespace driftopt
