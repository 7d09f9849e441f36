// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "driftopt/filter.hpp"
#include "driftopt/model.hpp"
#include "driftopt/rng.hpp"

namespace driftopt {

enum class Measure { P, PStar };

const char* to_string(Measure m);

// Sample mean over the finite samples. Non-finite samples are excluded and
// counted in `bad`; `ok` is false when any were seen.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  std::size_t bad = 0;
  bool ok = true;
};

Estimate summarize(const std::vector<double>& samples);

// Number of steps of size dt on an interval of length `span`; DomainError
// unless dt divides span within 1e-9 relative.
std::size_t steps_for(double span, double dt);

// Riccati solution whose nodes include every point of `times`, so that
// lookups at those points are exact.
RiccatiSolution riccati_covering(const MarketModel& model, const std::vector<double>& times);

// Running state of one simulated path. Only `a_tilde` and `log_Z` depend on
// whether the kernel tracks the hidden (or starred) drift.
struct PathState {
  std::size_t k = 0;
  double t = 0.0;
  std::vector<double> a_tilde;  // hidden drift (P) or starred drift (P*)
  std::vector<double> a_hat;
  std::vector<double> R;        // cumulative excess return
  std::vector<double> S;
  std::vector<double> dR;       // increment that led into node k
  std::vector<double> dw;
  std::vector<double> dW;
  double y = 0.0;               // y_extra = ln Zbar
  double log_Z = 0.0;
  std::vector<double> scratch;
};

// Allocation-free Euler-Maruyama kernel for (a~, R~, S, a_hat, y) on a fixed
// uniform grid. Coefficients are tabulated per step.
class PathKernel {
 public:
  // Grid t0 + k (T - t0) / steps. Measure P requires t0 = 0; `track_drift`
  // is forced on under P.
  PathKernel(const MarketModel& model, const RiccatiSolution& riccati, double t0,
             std::size_t steps, Measure measure, std::uint64_t seed,
             bool track_drift = false);
  // Solves the Riccati equation on the kernel grid itself.
  PathKernel(const MarketModel& model, double dt, Measure measure, std::uint64_t seed,
             bool track_drift = false);

  int n() const { return n_; }
  std::size_t steps() const { return times_.size() - 1; }
  const std::vector<double>& times() const { return times_; }
  Measure measure() const { return measure_; }
  bool tracks_drift() const { return track_drift_; }
  std::uint64_t seed() const { return seed_; }
  const RiccatiSolution& riccati() const { return *riccati_; }
  const std::vector<Mat>& gamma_nodes() const { return gamma_nodes_; }

  PathState make_state() const;

  // Starts path `index` at the model's initial state.
  void begin(std::uint64_t index, PathState& s) const;
  // Starts path `index` at t0 with a_hat = a_hat0, y = y0 (P* only).
  void begin_at(std::uint64_t index, const double* a_hat0, double y0, PathState& s) const;
  // Advances s from node s.k to s.k + 1.
  void advance(std::uint64_t index, PathState& s) const;

  // Runs a full path, calling obs(s) at every node including 0.
  template <class Obs>
  void run(std::uint64_t index, PathState& s, Obs&& obs) const {
    begin(index, s);
    obs(static_cast<const PathState&>(s));
    for (std::size_t k = 0; k < steps(); ++k) {
      advance(index, s);
      obs(static_cast<const PathState&>(s));
    }
  }

 private:
  void init(const MarketModel& model, double t0, std::size_t steps);

  int n_ = 0;
  Measure measure_ = Measure::P;
  bool track_drift_ = false;
  std::uint64_t seed_ = 0;
  NormalSource normals_;
  std::shared_ptr<const RiccatiSolution> riccati_;
  std::vector<double> times_;
  std::vector<Mat> gamma_nodes_;
  Vec m0_;
  Mat sqrt_gamma0_;
  std::vector<double> S0_;
  // Per-step tables, row-major n x n (or n) blocks at offset k.
  std::vector<double> sig_, alpha_, beta_, b_, q_, drift_, gain_;
  std::vector<double> adelta_, half_var_, dlog_bond_;
};

// Runs fn(i, state) for i in [0, count) across OpenMP threads; each thread
// owns one state from make(). Results must be written by index.
template <class Make, class Fn>
void for_each_path(std::size_t count, Make&& make, Fn&& fn) {
  const long long N = static_cast<long long>(count);
#pragma omp parallel
  {
    auto state = make();
#pragma omp for schedule(static)
    for (long long i = 0; i < N; ++i) fn(static_cast<std::size_t>(i), state);
  }
}

// One stored trajectory. Rows are grid nodes (M + 1) or steps (M).
struct PathBundle {
  std::vector<double> times;
  Mat dw;       // M x n
  Mat dW;       // M x n, empty when the drift is not simulated
  Mat a_tilde;  // (M+1) x n, empty when the drift is not simulated
  Mat R_tilde;  // (M+1) x n
  Mat S;        // (M+1) x n
  Mat a_hat;    // (M+1) x n
  std::vector<double> y_extra;  // M + 1
  std::shared_ptr<const std::vector<Mat>> gamma;  // per node, shared
  double log_Z = 0.0;  // NaN when the drift is not simulated
  double Z = 0.0;      // NaN when the drift is not simulated
  double Zbar = 0.0;
  Measure measure = Measure::P;
  std::uint64_t seed = 0;
  std::uint64_t index = 0;

  bool has_drift() const { return a_tilde.rows() > 0; }
  std::size_t steps() const { return times.size() - 1; }
  FilterState filter_state(std::size_t k) const;
};

// `count` bundles with indices 0..count-1, path-parallel.
std::vector<PathBundle> simulate_paths(const MarketModel& model, std::size_t count,
                                       double dt, Measure measure, std::uint64_t seed,
                                       bool track_drift = false);

// Serial reference built from filter_step and dense Eigen algebra. Uses the
// same random numbers as simulate_paths.
std::vector<PathBundle> simulate_paths_reference(const MarketModel& model,
                                                 std::size_t count, double dt,
                                                 Measure measure, std::uint64_t seed,
                                                 bool track_drift = false);

// exp of the discretized log-density sum a~^T Q (dR~ - a~ dt / 2) recomputed
// from the stored drift. DomainError when the drift was not simulated.
double density_Z(const PathBundle& path, const MarketModel& model);

// Mean and standard error of an observable functional over P* bundles.
Estimate expectation_under_pstar(const std::function<double(const PathBundle&)>& functional,
                                 const MarketModel& model, std::size_t count, double dt,
                                 std::uint64_t seed);

// ln Zbar(T) on `count` P* paths, streamed without storing bundles.
std::vector<double> terminal_log_zbar(const MarketModel& model, std::size_t count,
                                      double dt, std::uint64_t seed);

}  // namespace driftopt
