// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line driver: validate, solve, replicate, compare, filter-demo.

#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "driftopt/claim.hpp"
#include "driftopt/diagnostics.hpp"
#include "driftopt/errors.hpp"
#include "driftopt/io.hpp"
#include "driftopt/pde.hpp"
#include "driftopt/rng.hpp"
#include "driftopt/simulate.hpp"
#include "driftopt/strategy.hpp"

namespace fs = std::filesystem;
using namespace driftopt;

namespace {

enum Exit { kOk = 0, kUsage = 1, kValidation = 2, kCalibration = 3, kSolver = 4 };

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<double> dt;
  std::string solver;
};

void set_threads() {
  if (const char* env = std::getenv("DRIFTOPT_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
}

ExperimentConfig load(const Options& o) {
  ExperimentConfig cfg = load_config(o.config);
  if (o.seed) cfg.mc.seed = *o.seed;
  if (o.solver == "fd") cfg.solver.kind = SolverKind::FD;
  if (o.solver == "mc") cfg.solver.kind = SolverKind::MC;
  if (!o.out.empty()) cfg.out_dir = o.out;
  refresh_fingerprint(cfg);
  return cfg;
}

fs::path out_dir(const ExperimentConfig& cfg) {
  fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + p.string());
  os << text;
}

template <class Fn>
void write_with(const fs::path& p, Fn&& fn) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + p.string());
  fn(os);
}

std::string num(double x) { return format_number(x); }

RiccatiSolution riccati_for(const ExperimentConfig& cfg) {
  const MarketModel& m = *cfg.model;
  std::size_t steps = cfg.solver.nt;
  if (cfg.solver.kind == SolverKind::MC)
    steps = std::max<std::size_t>(1, std::size_t(std::llround(m.horizon() / cfg.solver.mc_dt)));
  return solve_riccati(m, uniform_grid(m.horizon(), steps));
}

FKConfig fk_config(const ExperimentConfig& cfg) {
  FKConfig fk;
  fk.paths = cfg.solver.mc_paths;
  fk.dt = cfg.solver.mc_dt;
  fk.seed = derive_seed(cfg.mc.seed, "feynman-kac");
  return fk;
}

GridSpec grid_for(const ExperimentConfig& cfg, const RiccatiSolution& ric) {
  const SolverSettings& s = cfg.solver;
  GridSpec g = auto_grid(*cfg.model, ric, s.nx1, s.nx2, s.nt, derive_seed(cfg.mc.seed, "grid"),
                         s.k_dom, s.pilot);
  if (s.x1_bounds) std::tie(g.x1_lo, g.x1_hi) = *s.x1_bounds;
  if (s.x2_bounds) std::tie(g.x2_lo, g.x2_hi) = *s.x2_bounds;
  g.upwind = s.upwind;
  g.scheme = s.scheme;
  return g;
}

int cmd_validate(const Options& o) {
  ExperimentConfig cfg = load(o);
  const MarketModel& m = *cfg.model;
  fs::path dir = out_dir(cfg);
  int warnings = 0;
  std::cout << "model: n = " << m.n() << ", T = " << num(m.horizon())
            << ", grid nodes = " << m.grid().size() << "\n";
  std::cout << "sigma sigma^T min eigenvalue: " << num(m.c_sigma()) << "\n";
  if (m.beta_min_singular() <= 0.0) {
    std::cout << "warning: beta is singular somewhere; the filter covariance may degenerate\n";
    ++warnings;
  }

  const double eps = default_cov1_eps(m);
  Cov1Report cov1 = check_cov1(m, eps);
  std::vector<DiagnosticRow> rows = diagnostic_rows(cov1);
  std::cout << "covariance condition (eps = " << num(eps) << "): " << (cov1.pass ? "pass" : "FAIL")
            << ", worst margin " << num(cov1.worst_margin) << "\n";
  if (!cov1.pass) {
    ++warnings;
    std::cout << "warning: margins below zero:\n  t,mode,min_eigenvalue,margin\n";
    for (const auto& e : cov1.entries)
      if (!e.pass)
        std::cout << "  " << num(e.t) << ',' << e.mode << ',' << num(e.min_eigenvalue) << ','
                  << num(e.margin) << "\n";
  }

  RiccatiSolution ric = solve_riccati(m, 1e-3);
  ModelDiagnostics diag = diagnose(m, ric);
  if (std::optional<double> mu = claim_moment_exponent(cfg.utility)) {
    MomentReport rep = search_moment_condition(m, diag, *mu, eps);
    auto extra = diagnostic_rows(rep, "moment_mu" + num(*mu));
    rows.insert(rows.end(), extra.begin(), extra.end());
    std::cout << "moment condition E_* Zbar^" << num(*mu) << " < inf: "
              << (rep.pass ? "pass" : "not established");
    if (rep.unconditional) std::cout << " (unconditional)";
    else std::cout << " (p = " << num(rep.p) << ", worst margin " << num(rep.worst_margin) << ")";
    std::cout << "\n";
    if (!rep.pass) ++warnings;
  } else {
    std::cout << "moment condition: claim is bounded\n";
  }

  MonteCarloConfig fmc{4000, cfg.mc.dt, derive_seed(cfg.mc.seed, "validate")};
  std::vector<double> z = calibration_sample(m, fmc);
  Estimate ez = summarize(z);
  const double dev = std::abs(ez.value - 1.0) / std::max(ez.std_error, 1e-300);
  std::cout << "density feasibility E_* Zbar(T) = " << num(ez.value) << " +- " << num(ez.std_error)
            << (dev <= 4.0 ? " (consistent with 1)" : " (INCONSISTENT with 1)") << "\n";
  if (dev > 4.0) ++warnings;

  write_with(dir / "diagnostics.csv", [&](std::ostream& os) { write_diagnostics_csv(os, rows); });
  std::cout << (warnings ? "valid with " + std::to_string(warnings) + " warning(s)" : "valid")
            << "\n";
  return kOk;
}

int cmd_solve(const Options& o) {
  ExperimentConfig cfg = load(o);
  if (o.paths) cfg.mc.paths = *o.paths;
  if (o.dt) cfg.mc.dt = *o.dt;
  refresh_fingerprint(cfg);
  const MarketModel& m = *cfg.model;
  fs::path dir = out_dir(cfg);

  Cov1Report cov1 = check_cov1(m, default_cov1_eps(m));
  if (!cov1.pass)
    throw CalibrationError("model fails the covariance condition (worst margin " +
                           num(cov1.worst_margin) + ")");
  MonteCarloConfig mc = cfg.mc;
  mc.seed = derive_seed(cfg.mc.seed, "calibration");
  std::vector<double> zbar = calibration_sample(m, mc);
  Calibration cal = solve_multiplier(cfg.utility, zbar, mc);
  write_file(dir / "calibration.json", calibration_record(cal, cfg));
  std::cout << "lambda_hat = " << num(cal.lambda_hat) << " (residual " << num(cal.residual)
            << ", tolerance " << num(cal.tolerance) << ")\n";
  QuadrReport q = check_quadr(cfg.utility, cal.lambda_hat, zbar, m);
  write_file(dir / "quadr.json", quadr_record(q));
  if (q.heavy_tail) std::cout << "warning: E_* F^2 estimate is dominated by its top 0.1% samples\n";
  if (!q.pass) std::cout << "warning: square integrability of the claim not established\n";

  RiccatiSolution ric = riccati_for(cfg);
  TerminalCondition phi = claim_terminal(cfg.utility, cal.lambda_hat);
  if (cfg.solver.kind == SolverKind::FD) {
    GridSpec g = grid_for(cfg, ric);
    PDESolution sol = solve_pde_fd(m, ric, phi, g);
    write_value_file(sol, (dir / "value_function.bin").string());
    write_with(dir / "value_t0.csv", [&](std::ostream& os) { write_value_slice_csv(os, sol, 0.0); });
    Vec x0(2);
    x0 << m.m0()(0), 0.0;
    std::cout << "grid a_hat [" << num(g.x1_lo) << ", " << num(g.x1_hi) << "] y [" << num(g.x2_lo)
              << ", " << num(g.x2_hi) << "], " << g.nx1 << "x" << g.nx2 << "x" << g.nt << "\n";
    std::cout << "V(x0, 0) = " << num(sol.value(x0, 0.0)) << " (X0 = " << num(cfg.utility.X0)
              << ")\n";
  } else {
    PDESolution sol = solve_pde_mc(m, ric, phi, cfg.solver.probes, fk_config(cfg));
    write_with(dir / "probes.csv", [&](std::ostream& os) { write_probes_csv(os, sol); });
    for (const auto& p : sol.probes)
      std::cout << "V(probe, t = " << num(p.t) << ") = " << num(p.value) << " +- "
                << num(p.std_error) << "\n";
  }
  return kOk;
}

// Value function for replicate/compare, checked against the calibration.
PDESolution load_solution(const ExperimentConfig& cfg, const fs::path& dir, double& lambda) {
  CalibrationArtifact cal = read_calibration((dir / "calibration.json").string());
  if (cal.fingerprint != cfg.fingerprint)
    throw ConfigError("artifacts in " + dir.string() +
                      " were produced from a different configuration; rerun solve");
  lambda = cal.lambda_hat;
  if (cfg.solver.kind == SolverKind::FD) {
    PDESolution sol = read_value_file((dir / "value_function.bin").string());
    sol.terminal_label = cfg.utility.name();
    return sol;
  }
  RiccatiSolution ric = riccati_for(cfg);
  return solve_pde_mc(*cfg.model, ric, claim_terminal(cfg.utility, lambda), {}, fk_config(cfg));
}

int cmd_replicate(const Options& o) {
  ExperimentConfig cfg = load(o);
  if (o.paths) cfg.replication.paths = *o.paths;
  if (o.dt) cfg.replication.dt = *o.dt;
  const MarketModel& m = *cfg.model;
  fs::path dir = out_dir(cfg);
  double lambda = 0.0;
  PDESolution sol = load_solution(cfg, dir, lambda);
  if (sol.solver == SolverKind::MC)
    std::cerr << "note: Monte Carlo gradients at every step; this is slow\n";

  ReplicationConfig rc{cfg.replication.pi_max_factor};
  MonteCarloConfig mc{cfg.replication.paths, cfg.replication.dt,
                      derive_seed(cfg.mc.seed, "replication")};
  ReplicationSummary rp = replication_study(m, cfg.utility, lambda, sol, mc, Measure::P, rc);
  MonteCarloConfig mcs = mc;
  mcs.seed = derive_seed(cfg.mc.seed, "replication-pstar");
  ReplicationSummary rs = replication_study(m, cfg.utility, lambda, sol, mcs, Measure::PStar, rc);

  write_file(dir / "replication.json", replication_record(rp, cfg.utility, &rs));

  const std::size_t saved = std::min(cfg.replication.saved_paths, cfg.replication.paths);
  if (saved > 0) {
    auto bundles = simulate_paths(m, saved, mc.dt, Measure::P, mc.seed);
    auto wealth = run_replication(m, cfg.utility, lambda, sol, bundles, rc);
    write_with(dir / "wealth_paths.csv", [&](std::ostream& os) { write_wealth_csv(os, wealth); });
  }

  std::cout << "mean |X~(T) - F| = " << num(rp.abs_error.value) << " +- "
            << num(rp.abs_error.std_error) << " over " << rp.abs_error.n << " paths\n";
  std::cout << "X~(0) = X0 = " << num(cfg.utility.X0) << ", V(x0, 0) = " << num(rp.initial_value)
            << "\n";
  std::cout << "E_* X~(T/2) = " << num(rs.wealth_half.value) << " +- "
            << num(rs.wealth_half.std_error) << ", E_* X~(T) = " << num(rs.wealth_terminal.value)
            << " +- " << num(rs.wealth_terminal.std_error) << "\n";
  if (rp.cap_events) std::cout << "warning: " << rp.cap_events << " position cap events\n";
  if (rp.extrapolations)
    std::cout << "warning: " << rp.extrapolations << " steps outside the grid\n";
  return kOk;
}

int cmd_compare(const Options& o) {
  ExperimentConfig cfg = load(o);
  if (o.paths) cfg.compare.paths = *o.paths;
  if (o.dt) cfg.compare.dt = *o.dt;
  const MarketModel& m = *cfg.model;
  fs::path dir = out_dir(cfg);
  double lambda = 0.0;
  PDESolution sol = load_solution(cfg, dir, lambda);
  MonteCarloConfig mc = cfg.compare;
  mc.seed = derive_seed(cfg.mc.seed, "compare");
  const UtilitySpec& u = cfg.utility;

  std::ostringstream table;
  table << "policy,E_utility,stderr,breach_count,breach_rate,valid\n";
  auto row = [&](const std::string& name, const UtilityEvaluation& e) {
    table << name << ',' << num(e.utility.value) << ',' << num(e.utility.std_error) << ','
          << e.breaches << ',' << num(e.breach_rate) << ',' << (e.valid ? "true" : "false")
          << '\n';
  };
  const double pi_max = cfg.replication.pi_max_factor * u.X0;
  row("optimal", evaluate_expected_utility(optimal_policy(sol, m, pi_max), m, u, mc));
  if (u.kind == UtilityKind::Log || u.kind == UtilityKind::Power)
    row("certainty_equivalence",
        evaluate_expected_utility(certainty_equivalence_policy(m, u), m, u, mc));
  row("zero", evaluate_expected_utility(zero_policy(m.n()), m, u, mc));
  Estimate bound = expected_claim_utility(u, lambda, m, mc);
  table << "claim_upper_bound," << num(bound.value) << ',' << num(bound.std_error) << ",0,0,true\n";
  write_file(dir / "comparison.csv", table.str());
  std::cout << table.str();
  return kOk;
}

int cmd_filter_demo(const Options& o) {
  ExperimentConfig cfg = load(o);
  const double dt = o.dt.value_or(cfg.mc.dt);
  const MarketModel& m = *cfg.model;
  auto paths = simulate_paths(m, 1, dt, Measure::P, derive_seed(cfg.mc.seed, "filter-demo"));
  std::ostringstream os;
  write_filter_csv(os, paths.front(), m);
  fs::path dir = out_dir(cfg);
  write_file(dir / "filter_path.csv", os.str());
  std::cout << os.str();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal portfolios under a hidden, filtered drift"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* c) {
    c->add_option("--config", o.config, "Experiment configuration (JSON)")->required();
    c->add_option("--out", o.out, "Output directory (overrides the config)");
    c->add_option("--seed", o.seed, "Seed (overrides the config)");
    c->add_option("--paths", o.paths, "Path count of the command's main simulation");
    c->add_option("--dt", o.dt, "Time step of the command's main simulation")
        ->check(CLI::PositiveNumber);
    c->add_option("--solver", o.solver, "Value-function solver")
        ->check(CLI::IsMember({"fd", "mc"}));
  };
  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(const Options&);
  };
  const Cmd cmds[] = {
      {"validate", "Run the model checks", cmd_validate},
      {"solve", "Calibrate the multiplier and solve for the value function", cmd_solve},
      {"replicate", "Trade the optimal strategy along simulated paths", cmd_replicate},
      {"compare", "Compare expected utility of optimal, certainty-equivalence and zero policies",
       cmd_compare},
      {"filter-demo", "Print a filter path for a simulated market", cmd_filter_demo},
  };
  for (const auto& c : cmds) add_common(app.add_subcommand(c.name, c.help));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  set_threads();

  try {
    for (const auto& c : cmds)
      if (app.got_subcommand(c.name)) return c.fn(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DomainError& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return kValidation;
  } catch (const CalibrationError& e) {
    std::cerr << "calibration failure: " << e.what() << "\n";
    return kCalibration;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
