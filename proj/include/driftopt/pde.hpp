// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "driftopt/claim.hpp"
#include "driftopt/filter.hpp"
#include "driftopt/model.hpp"
#include "driftopt/simulate.hpp"

namespace driftopt {

// Coefficients of the Cauchy problem in x = (a_hat, y):
//   f(x, t) = (drift(t) a_hat + alpha delta ; -a_hat^T Q a_hat / 2)
//   g(x, t) = (gain(t) ; a_hat^T Q)
struct PDECoefficients {
  std::function<Vec(const Vec& x, double t)> f;
  std::function<Mat(const Vec& x, double t)> g;
  std::function<Mat(const Vec& x, double t)> diffusion;  // g sigma sigma^T g^T
};

PDECoefficients coefficients(const MarketModel& model, const RiccatiSolution& riccati);

// Terminal data Phi(x). For the finite-difference solver the condition also
// carries far-field exponents: in the last coordinate, V behaves like
// A + B exp(kappa x_last) near each face.
struct TerminalCondition {
  std::string label;
  std::function<double(const Vec& x)> phi;
  // Smoothed Phi for grid solvers; `width` is the mollification width in
  // the last coordinate. Empty when Phi is already smooth.
  std::function<double(const Vec& x, double width)> smoothed;
  double kappa_lo = 0.0;
  double kappa_hi = 0.0;

  double operator()(const Vec& x) const { return phi(x); }
  bool discontinuous() const { return static_cast<bool>(smoothed); }
};

// Phi(x) = F(exp(x_last), lambda).
TerminalCondition claim_terminal(const UtilitySpec& u, double lambda);
TerminalCondition constant_terminal(double c);
// Phi(x) = exp(x_last).
TerminalCondition log_density_terminal();
// a Phi1 + b Phi2 (smoothed parts combined when either is smoothed).
TerminalCondition combine(double a, const TerminalCondition& p1, double b,
                          const TerminalCondition& p2);

// Centred: implicit Euler with a centred 9-point stencil in (a_hat, y);
// second order in space, not monotone.
// Aligned: implicit Euler in (a_hat, xi) with xi = y - k(t) a_hat^2 / 2 and
// k = Q / gain, coordinates in which the rank-one diffusion acts on a_hat
// only; xi is transported and upwinded, so the scheme is monotone and first
// order. Values are resampled onto the (a_hat, y) grid.
// Auto picks Aligned for discontinuous terminal data when it is available.
enum class FDScheme { Auto, Centred, Aligned };

const char* to_string(FDScheme s);

struct GridSpec {
  double x1_lo = -1.0, x1_hi = 1.0;
  double x2_lo = -1.0, x2_hi = 1.0;
  // xi range of the aligned scheme, set by auto_grid; NaN when unknown or
  // when the gain vanishes on [0, T].
  double xi_lo = std::numeric_limits<double>::quiet_NaN();
  double xi_hi = std::numeric_limits<double>::quiet_NaN();
  std::size_t nx1 = 201, nx2 = 201;
  std::size_t nt = 1000;
  std::size_t max_snapshots = 201;
  bool upwind = false;  // upwind first-order terms where centred ones lose monotonicity
  FDScheme scheme = FDScheme::Auto;

  bool aligned_available() const {
    return std::isfinite(xi_lo) && std::isfinite(xi_hi) && xi_hi > xi_lo;
  }
};

// Bounds from pilot runs under P* and P from the model's initial state: each
// coordinate (and xi) covers mean +- k_dom std at every time under both
// measures.
GridSpec auto_grid(const MarketModel& model, const RiccatiSolution& riccati,
                   std::size_t nx1, std::size_t nx2, std::size_t nt,
                   std::uint64_t seed, double k_dom = 6.0, std::size_t pilot = 1000);

// Same bounds, (n - 1) / 2 + 1 nodes per axis and nt / 2 steps.
GridSpec coarsen(const GridSpec& g);

enum class SolverKind { FD, MC };

struct FDStats {
  double max_artificial_x1 = 0.0;  // largest diffusion added by upwinding on x1
  double max_artificial_x2 = 0.0;  // on x2 (on xi for the aligned scheme)
  int max_iterations = 0;
  double max_residual = 0.0;
  int preconditioner_builds = 0;
};

struct VEstimate {
  double value = 0.0;
  double std_error = 0.0;
  Vec gradient;
  Vec gradient_std_error;
  std::size_t bad = 0;
};

struct MCProbe {
  Vec x;
  double t = 0.0;
  double value = 0.0;
  double std_error = 0.0;
  Vec gradient;
  Vec gradient_std_error;
  std::size_t bad = 0;
};

// Value function either on a space-time grid (FD, n = 1) or as a probe
// table (MC).
class PDESolution {
 public:
  SolverKind solver = SolverKind::FD;
  std::string terminal_label;

  // FD grid.
  GridSpec grid;
  std::vector<double> x1, x2;
  std::vector<double> snapshot_times;             // increasing, 0 .. T
  std::vector<std::vector<double>> snapshots;     // V at node i * nx2 + j
  FDStats stats;

  // MC probe table.
  std::vector<MCProbe> probes;
  // Feynman-Kac estimate at arbitrary (x, t), set by solve_pde_mc.
  std::function<VEstimate(const Vec& x, double t)> estimator;

  // True when x lies inside the FD bounds.
  bool in_grid(const Vec& x) const;
  // Cells outside the grid in the worst coordinate (0 when inside).
  double cells_outside(const Vec& x) const;
  // Bilinear in space, linear in time; x is clamped to the grid. FD only.
  double value(const Vec& x, double t) const;
  // Central differences at nodes, interpolated like value(). FD only.
  Vec gradient(const Vec& x, double t) const;
  // Node value at snapshot s.
  double node(std::size_t s, std::size_t i, std::size_t j) const {
    return snapshots[s][i * x2.size() + j];
  }

 private:
  void locate_time(double t, std::size_t& s, double& w) const;
  double interp_node_values(const std::vector<double>& v, double a, double b) const;
  Vec node_gradient_interp(const std::vector<double>& v, double a, double b) const;
};

// Backward implicit Euler with the scheme chosen by gs.scheme; the resolved
// scheme is recorded in the solution's grid. SolverError if n != 1, the
// aligned scheme is requested but unavailable, or the linear solver fails.
PDESolution solve_pde_fd(const MarketModel& model, const RiccatiSolution& riccati,
                         const TerminalCondition& terminal, const GridSpec& grid);

struct FKConfig {
  std::size_t paths = 10000;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  bool gradient = true;
};

// Feynman-Kac estimate of V(x, t) = E_* Phi(y^{x,t}(T)) with the same
// Euler scheme as the path kernel. The gradient uses central differences
// with common random numbers and bump 1e-3 max(1, |x_k|).
VEstimate estimate_V_mc(const MarketModel& model, const RiccatiSolution& riccati,
                        const TerminalCondition& terminal, const Vec& x, double t,
                        const FKConfig& mc);

// Probe-table solution built from estimate_V_mc.
PDESolution solve_pde_mc(const MarketModel& model, const RiccatiSolution& riccati,
                         const TerminalCondition& terminal,
                         const std::vector<std::pair<Vec, double>>& probes,
                         const FKConfig& mc);

}  // namespace driftopt
