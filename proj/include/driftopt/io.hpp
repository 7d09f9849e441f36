// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "driftopt/claim.hpp"
#include "driftopt/diagnostics.hpp"
#include "driftopt/model.hpp"
#include "driftopt/pde.hpp"
#include "driftopt/simulate.hpp"
#include "driftopt/strategy.hpp"

namespace driftopt {

// Model files are JSON objects:
//
//   {
//     "horizon": 1.0,
//     "sigma": [[0.2]],          // scalar allowed when n = 1
//     "alpha": 1.0, "beta": 0.1, "b": 0.0,
//     "delta": [0.05], "r": 0.02,
//     "m0": [0.05], "gamma0": [[0.04]], "S0": [1.0]
//   }
//
// Any coefficient may instead be {"times": [...], "values": [...]} with one
// value per time; all coefficients are merged onto the union of their time
// points by linear interpolation. S0 defaults to ones.
MarketModel model_from_json_text(const std::string& text);
MarketModel load_model(const std::string& path);

struct SolverSettings {
  SolverKind kind = SolverKind::FD;
  std::size_t nx1 = 201, nx2 = 201, nt = 1000;
  double k_dom = 6.0;
  std::size_t pilot = 1000;
  std::optional<std::pair<double, double>> x1_bounds, x2_bounds;
  bool upwind = false;
  FDScheme scheme = FDScheme::Auto;
  std::size_t mc_paths = 10000;  // Feynman-Kac paths per probe
  double mc_dt = 1e-3;
  std::vector<std::pair<Vec, double>> probes;  // (x, t); default (m0, 0) at t = 0
};

struct ReplicationSettings {
  std::size_t paths = 1000;
  double dt = 1e-3;
  double pi_max_factor = 1e3;
  std::size_t saved_paths = 5;
};

struct ExperimentConfig {
  std::string path;        // config file
  std::string model_path;  // empty when the model is inline
  std::shared_ptr<const MarketModel> model;
  UtilitySpec utility;
  SolverSettings solver;
  MonteCarloConfig mc;           // calibration sample; seed is mandatory
  ReplicationSettings replication;
  MonteCarloConfig compare;      // utility comparison (seed derived)
  std::string out_dir = "out";
  std::uint64_t fingerprint = 0;  // hash of the normalized config
};

// ConfigError when the file is unreadable, malformed or misses the seed.
ExperimentConfig load_config(const std::string& path);

// Recomputes the fingerprint after command-line overrides.
void refresh_fingerprint(ExperimentConfig& cfg);

// Structured-text records (JSON, keys in fixed order, shortest
// round-trip number formatting).
std::string calibration_record(const Calibration& c, const ExperimentConfig& cfg);
std::string quadr_record(const QuadrReport& q);
std::string estimate_record(const Estimate& e, std::size_t N, double dt, std::uint64_t seed);
// `pstar` adds the P* wealth means of a second run when given.
std::string replication_record(const ReplicationSummary& r, const UtilitySpec& u,
                               const ReplicationSummary* pstar = nullptr);
std::string utility_record(const UtilityEvaluation& e);

struct CalibrationArtifact {
  double lambda_hat = 0.0;
  std::uint64_t fingerprint = 0;
};
CalibrationArtifact read_calibration(const std::string& path);

// Dense value-function file, little-endian:
//   char[8]  "DRIFTV01"
//   u64      nx1, nx2, snapshot count
//   f64      x1_lo, x1_hi, x2_lo, x2_hi
//   f64[nx1] x1 nodes, f64[nx2] x2 nodes, f64[count] snapshot times
//   f64      V, snapshot-major then x1-major: V[s][i * nx2 + j]
void write_value_file(const PDESolution& sol, const std::string& path);
PDESolution read_value_file(const std::string& path);

// CSV tables.
void write_diagnostics_csv(std::ostream& os, const std::vector<DiagnosticRow>& rows);
void write_value_slice_csv(std::ostream& os, const PDESolution& sol, double t);
void write_probes_csv(std::ostream& os, const PDESolution& sol);
void write_wealth_csv(std::ostream& os, const std::vector<WealthPath>& paths);
void write_filter_csv(std::ostream& os, const PathBundle& path, const MarketModel& model);

// Shortest decimal that round-trips.
std::string format_number(double x);

}  // namespace driftopt
