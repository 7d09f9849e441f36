// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite on the benchmark market. Prints one line per criterion:
//
//   acceptance [--cli PATH] [--work DIR] [criterion ...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support.hpp"
#include "driftopt/claim.hpp"
#include "driftopt/filter.hpp"
#include "driftopt/pde.hpp"
#include "driftopt/rng.hpp"
#include "driftopt/simulate.hpp"
#include "driftopt/strategy.hpp"

namespace fs = std::filesystem;
using namespace driftopt;
using driftopt::testing::benchmark_model;
using driftopt::testing::scalar_model;

namespace {

constexpr std::uint64_t kSeed = 20260101;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Options {
  std::string cli;
  fs::path work = fs::temp_directory_path() / "driftopt_acceptance";
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::uint64_t seed_for(const char* label) { return derive_seed(kSeed, label); }

Vec point(double a, double y) { return (Vec(2) << a, y).finished(); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome log_closed_form(const Options&) {
  const MarketModel m = benchmark_model();
  const RiccatiSolution ric = solve_riccati(m, uniform_grid(m.horizon(), 1000));
  const GridSpec g = auto_grid(m, ric, 201, 201, 1000, seed_for("grid"));
  const auto t0 = std::chrono::steady_clock::now();
  const PDESolution sol = solve_pde_fd(m, ric, log_density_terminal(), g);
  const double secs = seconds_since(t0);

  double value_err = 0.0;
  for (std::size_t s = 0; s < sol.snapshots.size(); ++s)
    for (std::size_t i = 1; i + 1 < sol.x1.size(); ++i)
      for (std::size_t j = 1; j + 1 < sol.x2.size(); ++j)
        value_err = std::max(value_err, std::abs(sol.node(s, i, j) / std::exp(sol.x2[j]) - 1.0));

  double pi_err = 0.0;
  const double q = m.Q(0.0)(0, 0);
  for (double t : {0.0, 0.25, 0.5, 0.75})
    for (double fa : {0.15, 0.3, 0.45, 0.6, 0.75, 0.85})
      for (double fy : {0.2, 0.4, 0.5, 0.6, 0.8}) {
        const double a = g.x1_lo + fa * (g.x1_hi - g.x1_lo);
        const double y = g.x2_lo + fy * (g.x2_hi - g.x2_lo);
        if (std::abs(a) < 0.02) continue;
        FilterState st;
        st.t = t;
        st.a_hat = Vec::Constant(1, a);
        st.gamma = ric.gamma(t);
        st.y_extra = y;
        const double pi = optimal_strategy(sol, st, m, t).pi(0);
        const double exact = m.bond(t) * a * std::exp(y) * q;
        pi_err = std::max(pi_err, std::abs(pi / exact - 1.0));
      }

  Outcome o;
  o.pass = value_err < 1e-3 && pi_err < 1e-3 && secs < 60.0;
  o.detail = fmt("max|V/exp(y)-1| = %.2e, max rel strategy error = %.2e, solve %.1f s",
                 value_err, pi_err, secs);
  return o;
}

Outcome martingale(const Options&) {
  const MarketModel m = benchmark_model();
  std::vector<double> y = terminal_log_zbar(m, 100000, 1e-3, seed_for("martingale"));
  for (double& v : y) v = std::exp(v);
  const Estimate e = summarize(y);
  Outcome o;
  o.pass = std::abs(e.value - 1.0) <= 3.0 * e.std_error;
  o.detail = fmt("E*[Zbar(T)] = %.5f +- %.5f (N = 1e5, dt = 1e-3)", e.value, e.std_error);
  return o;
}

Outcome budget_calibration(const Options&) {
  const MarketModel m = benchmark_model();
  const MonteCarloConfig mc{100000, 1e-3, seed_for("calibration")};
  const std::vector<double> zbar = calibration_sample(m, mc);
  const std::vector<UtilitySpec> variants = {
      UtilitySpec::log(1.0), UtilitySpec::power(0.5, 1.0), UtilitySpec::quadratic(0.1, 1.0, 1.0),
      UtilitySpec::linear_penalty(2, 1.0), UtilitySpec::goal_reaching(1.2, 1.0)};
  Outcome o{true, ""};
  double lambda_power = 0.0;
  for (const UtilitySpec& u : variants) {
    const Calibration c = solve_multiplier(u, zbar, mc);
    const double tol = std::max(1e-3 * u.X0, 0.5 * c.std_error);
    const bool ok = std::abs(c.budget - u.X0) <= tol;
    o.pass = o.pass && ok;
    o.detail += fmt("%s %s |res| %.1e; ", u.name().c_str(), ok ? "ok" : "FAIL",
                    std::abs(c.budget - u.X0));
    if (u.kind == UtilityKind::Power) lambda_power = c.lambda_hat;
  }

  // Closed form on an independent sample, delta-method errors on both sides.
  const UtilitySpec p = variants[1];
  const double l = p.claim_exponent();
  auto moment = [l](const std::vector<double>& z) {
    std::vector<double> v(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) v[i] = std::pow(z[i], l);
    return summarize(v);
  };
  const Estimate own = moment(zbar);
  const Estimate fresh = moment(calibration_sample(m, {100000, 1e-3, seed_for("power-check")}));
  const double closed = std::pow(p.X0, -1.0 / l) * std::pow(fresh.value, 1.0 / l);
  const double se = std::hypot(lambda_power / l * own.std_error / own.value,
                               closed / l * fresh.std_error / fresh.value);
  const bool ok = std::abs(lambda_power - closed) <= 3.0 * se;
  o.pass = o.pass && ok;
  o.detail += fmt("power lambda %.5f vs closed form %.5f (3 se = %.5f)", lambda_power, closed,
                  3.0 * se);
  return o;
}

Outcome replication(const Options&) {
  const MarketModel m = benchmark_model();
  const UtilitySpec u = UtilitySpec::power(0.5, 1.0);
  const Calibration c = solve_multiplier(u, m, {100000, 1e-3, seed_for("calibration")});
  const RiccatiSolution ric = solve_riccati(m, uniform_grid(m.horizon(), 1000));
  const GridSpec g = auto_grid(m, ric, 201, 201, 1000, seed_for("grid"));
  const PDESolution sol = solve_pde_fd(m, ric, claim_terminal(u, c.lambda_hat), g);
  const ReplicationSummary coarse =
      replication_study(m, u, c.lambda_hat, sol, {1000, 2e-3, seed_for("replication")});
  const ReplicationSummary fine =
      replication_study(m, u, c.lambda_hat, sol, {1000, 1e-3, seed_for("replication")});
  const double e1 = coarse.abs_error.value, e2 = fine.abs_error.value;
  const double order = std::log2(e1 / e2);
  Outcome o;
  o.pass = order >= 0.4 && e2 < 0.02 * u.X0;
  o.detail = fmt("mean |X~(T)-F| = %.4f (dt 2e-3), %.4f +- %.4f (dt 1e-3), order %.2f, caps %zu",
                 e1, e2, fine.abs_error.std_error, order, fine.cap_events);
  return o;
}

Outcome cross_validation(const Options&) {
  const MarketModel m = benchmark_model();
  const UtilitySpec u = UtilitySpec::goal_reaching(1.2, 1.0);
  const Calibration c = solve_multiplier(u, m, {100000, 1e-3, seed_for("calibration")});
  const TerminalCondition tc = claim_terminal(u, c.lambda_hat);
  const RiccatiSolution ric = solve_riccati(m, uniform_grid(m.horizon(), 1000));
  const GridSpec fine = auto_grid(m, ric, 201, 201, 1000, seed_for("grid"));
  const GridSpec mid = coarsen(fine);
  const GridSpec low = coarsen(mid);
  const PDESolution s0 = solve_pde_fd(m, ric, tc, fine);
  const PDESolution s1 = solve_pde_fd(m, ric, tc, mid);
  const PDESolution s2 = solve_pde_fd(m, ric, tc, low);

  const double jump = std::log(c.lambda_hat * u.goal);
  const std::vector<std::pair<Vec, double>> probes = {
      {point(0.05, 0.0), 0.0},   {point(0.0, 0.0), 0.0},    {point(0.1, 0.0), 0.0},
      {point(0.05, 0.2), 0.0},   {point(0.05, -0.2), 0.0},  {point(0.05, 0.0), 0.5},
      {point(0.05, jump), 0.5},  {point(0.0, 0.3), 0.5},    {point(0.1, -0.3), 0.5},
      {point(0.05, jump + 0.3), 0.75}};
  const FKConfig fk{20000, 1e-3, seed_for("feynman-kac"), false};

  Outcome o{true, ""};
  double worst = -1e300;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const auto& [x, t] = probes[p];
    const double v0 = s0.value(x, t), v1 = s1.value(x, t), v2 = s2.value(x, t);
    // Observed order from three grids, kept within [0.5, 2].
    double order = 1.0;
    if (std::abs(v0 - v1) > 0.0 && std::abs(v1 - v2) > 0.0)
      order = std::clamp(std::log2(std::abs(v1 - v2) / std::abs(v0 - v1)), 0.5, 2.0);
    const double grid_err = std::abs(v0 - v1) / (std::pow(2.0, order) - 1.0);
    const VEstimate mc = estimate_V_mc(m, ric, tc, x, t, fk);
    const double slack = std::abs(v0 - mc.value) - (3.0 * mc.std_error + grid_err);
    worst = std::max(worst, slack);
    if (slack > 0.0) o.pass = false;
  }
  o.detail = fmt("10 goal-claim probes; worst |V_FD-V_MC| - (3 se + grid error) = %.2e", worst);
  return o;
}

Outcome filter_optimality(const Options&) {
  const MarketModel m = benchmark_model();
  const double dt = 1e-3;
  PathKernel kernel(m, dt, Measure::P, seed_for("filter"), true);
  const std::size_t N = 10000, M = kernel.steps();
  const std::size_t window = std::size_t(std::lround(0.25 / dt));
  const CoefficientNode c = m.at(0.0);
  const double T = m.horizon();
  const double prior = c.delta(0) + (m.m0()(0) - c.delta(0)) * std::exp(-c.alpha(0, 0) * T);
  std::vector<double> ef(N), ep(N), er(N);
  for_each_path(
      N, [&] { return kernel.make_state(); },
      [&](std::size_t i, PathState& s) {
        double R_start = 0.0;
        kernel.run(i, s, [&](const PathState& st) {
          if (st.k == M - window) R_start = st.R[0];
        });
        const double a = s.a_tilde[0];
        ef[i] = std::pow(a - s.a_hat[0], 2);
        ep[i] = std::pow(a - prior, 2);
        er[i] = std::pow(a - (s.R[0] - R_start) / (double(window) * dt), 2);
      });
  const Estimate f = summarize(ef), p = summarize(ep), r = summarize(er);
  const double trace = kernel.riccati().gamma(T).trace();
  Outcome o;
  o.pass = std::abs(f.value - trace) <= 3.0 * f.std_error && f.value < p.value && f.value < r.value;
  o.detail = fmt("MSE %.5f +- %.5f vs tr gamma(T) %.5f; prior %.5f, rolling mean %.5f", f.value,
                 f.std_error, trace, p.value, r.value);
  return o;
}

Outcome riccati(const Options&) {
  auto worst = [](const MarketModel& m, auto exact) {
    const RiccatiSolution r = solve_riccati(m, uniform_grid(m.horizon(), 1000));
    double e = 0.0;
    for (std::size_t k = 0; k < r.times.size(); ++k)
      e = std::max(e, std::abs(r.gamma_path[k](0, 0) / exact(r.times[k]) - 1.0));
    return e;
  };
  const double e1 = worst(scalar_model(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0),
                          [](double t) { return 1.0 / (1.0 + t); });
  const double e2 = worst(scalar_model(1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0),
                          [](double) { return 1.0; });
  Outcome o;
  o.pass = e1 < 1e-6 && e2 < 1e-6;
  o.detail = fmt("max rel error %.2e (1/(1+t)), %.2e (stationary)", e1, e2);
  return o;
}

Outcome optimality_ordering(const Options&) {
  const MarketModel m = benchmark_model(0.3);
  const UtilitySpec u = UtilitySpec::power(-1.0, 1.0);
  const Calibration c = solve_multiplier(u, m, {100000, 1e-3, seed_for("calibration")});
  const RiccatiSolution ric = solve_riccati(m, uniform_grid(m.horizon(), 1000));
  const GridSpec g = auto_grid(m, ric, 201, 201, 1000, seed_for("grid"));
  const PDESolution sol = solve_pde_fd(m, ric, claim_terminal(u, c.lambda_hat), g);
  const MonteCarloConfig mc{10000, 1e-3, seed_for("compare")};
  const UtilityEvaluation opt = evaluate_expected_utility(optimal_policy(sol, m), m, u, mc);
  const UtilityEvaluation ce =
      evaluate_expected_utility(certainty_equivalence_policy(m, u), m, u, mc);
  const Estimate bound = expected_claim_utility(u, c.lambda_hat, m, mc);
  Outcome o;
  o.pass = opt.valid && ce.valid &&
           opt.utility.value >= ce.utility.value - 3.0 * combined_std_error(opt.utility, ce.utility) &&
           opt.utility.value <= bound.value + 3.0 * combined_std_error(opt.utility, bound);
  o.detail = fmt("E U: optimal %.5f +- %.5f, certainty equivalence %.5f +- %.5f, claim %.5f +- %.5f",
                 opt.utility.value, opt.utility.std_error, ce.utility.value, ce.utility.std_error,
                 bound.value, bound.std_error);
  return o;
}

Outcome girsanov(const Options&) {
  const MarketModel m = benchmark_model();
  const std::size_t N = 100000;
  auto run = [&](Measure measure) {
    PathKernel kernel(m, 1e-3, measure, seed_for("girsanov"), true);
    std::vector<double> v(N);
    for_each_path(
        N, [&] { return kernel.make_state(); },
        [&](std::size_t i, PathState& s) {
          kernel.run(i, s, [](const PathState&) {});
          const double weight = measure == Measure::P ? 1.0 : std::exp(s.log_Z);
          v[i] = weight * std::cos(s.R[0]);
        });
    return summarize(v);
  };
  const Estimate p = run(Measure::P), q = run(Measure::PStar);
  Outcome o;
  o.pass = std::abs(p.value - q.value) <= 3.0 * combined_std_error(p, q);
  o.detail = fmt("E_P cos R~(T) = %.5f +- %.5f, E_P* Z cos R~*(T) = %.5f +- %.5f", p.value,
                 p.std_error, q.value, q.std_error);
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism(const Options& opt) {
  if (opt.cli.empty()) return {false, "no --cli given"};
  const fs::path root = opt.work / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream cfg(root / "config.json");
    cfg << R"({
  "model": {"horizon": 1.0, "sigma": 0.2, "alpha": 1.0, "beta": 0.1, "b": 0.0,
            "delta": [0.05], "r": 0.02, "m0": [0.05], "gamma0": 0.04},
  "X0": 1.0,
  "utility": {"kind": "power", "d": 0.5},
  "solver": {"kind": "fd", "nx1": 41, "nx2": 41, "nt": 100, "pilot": 200},
  "mc": {"paths": 4000, "dt": 0.01, "seed": 7},
  "replication": {"paths": 40, "dt": 0.01, "saved_paths": 2},
  "compare": {"paths": 400, "dt": 0.01}
})";
  }
  const char* commands[] = {"validate", "solve", "replicate", "compare", "filter-demo"};
  std::vector<fs::path> outs;
  for (int threads : {1, 3, 1}) {
    const fs::path out = root / ("run" + std::to_string(outs.size()));
    for (const char* cmd : commands) {
      const std::string line = "DRIFTOPT_THREADS=" + std::to_string(threads) + " \"" + opt.cli +
                               "\" " + cmd + " --config \"" + (root / "config.json").string() +
                               "\" --out \"" + out.string() + "\" > /dev/null 2>&1";
      if (std::system(line.c_str()) != 0) return {false, std::string("command failed: ") + cmd};
    }
    outs.push_back(out);
  }
  const char* expected[] = {"diagnostics.csv",  "calibration.json", "quadr.json",
                            "value_function.bin", "value_t0.csv",   "replication.json",
                            "wealth_paths.csv", "comparison.csv",   "filter_path.csv"};
  for (const char* name : expected)
    if (!fs::exists(outs[0] / name)) return {false, std::string("missing: ") + name};
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(outs[0])) {
    ++files;
    const std::string name = entry.path().filename().string();
    const std::string ref = slurp(entry.path());
    for (std::size_t r = 1; r < outs.size(); ++r)
      if (!fs::exists(outs[r] / name) || slurp(outs[r] / name) != ref)
        return {false, "differs: " + name};
  }
  return {true, fmt("%zu output files byte-identical across 3 runs (1, 3, 1 threads)", files)};
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  std::set<int> chosen;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc)
      opt.cli = argv[++i];
    else if (a == "--work" && i + 1 < argc)
      opt.work = argv[++i];
    else
      chosen.insert(std::stoi(a));
  }

  const std::vector<std::pair<const char*, std::function<Outcome(const Options&)>>> criteria = {
      {"log-utility closed form", log_closed_form},
      {"martingale normalization", martingale},
      {"budget calibration", budget_calibration},
      {"pathwise replication", replication},
      {"FD vs Feynman-Kac", cross_validation},
      {"filter optimality", filter_optimality},
      {"Riccati closed forms", riccati},
      {"optimality ordering", optimality_ordering},
      {"Girsanov identity", girsanov},
      {"determinism", determinism}};

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!chosen.empty() && !chosen.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second(opt);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %2d %-26s %s  %s [%.1f s]\n", id, criteria[i].first,
                o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
