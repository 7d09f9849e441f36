// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "driftopt/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "driftopt/errors.hpp"
#include "driftopt/rng.hpp"

namespace driftopt {

using Json = nlohmann::ordered_json;

namespace {

static_assert(std::endian::native == std::endian::little, "value files are little-endian");

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Json parse(const std::string& text, const std::string& where) {
  try {
    return Json::parse(text, nullptr, true, true);
  } catch (const Json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

double as_number(const Json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError("'" + key + "' must be a number");
  return j.get<double>();
}

// Matrix from a scalar (n = 1 or diagonal of size n) or nested rows.
Mat as_matrix(const Json& j, const std::string& key, int n) {
  if (j.is_number()) {
    if (n < 1) n = 1;
    return Mat::Identity(n, n) * j.get<double>();
  }
  if (!j.is_array() || j.empty()) throw ConfigError("'" + key + "' must be a matrix");
  const int rows = int(j.size());
  const int cols = j[0].is_array() ? int(j[0].size()) : -1;
  if (cols < 0) throw ConfigError("'" + key + "' must be a nested array");
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (!j[std::size_t(i)].is_array() || int(j[std::size_t(i)].size()) != cols)
      throw ConfigError("'" + key + "' has ragged rows");
    for (int k = 0; k < cols; ++k) m(i, k) = as_number(j[std::size_t(i)][std::size_t(k)], key);
  }
  return m;
}

Vec as_vector(const Json& j, const std::string& key, int n) {
  if (j.is_number()) return Vec::Constant(std::max(n, 1), j.get<double>());
  if (!j.is_array()) throw ConfigError("'" + key + "' must be a vector");
  Vec v(Eigen::Index(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(Eigen::Index(i)) = as_number(j[i], key);
  return v;
}

// A coefficient either constant or given on its own time points.
struct Series {
  std::vector<double> times;  // empty for constants
  std::vector<Json> values;
};

Series as_series(const Json& j, const std::string& key) {
  Series s;
  if (j.is_object()) {
    if (!j.contains("times") || !j.contains("values"))
      throw ConfigError("'" + key + "' needs 'times' and 'values'");
    const Json& t = j["times"];
    const Json& v = j["values"];
    if (!t.is_array() || !v.is_array() || t.size() != v.size() || t.empty())
      throw ConfigError("'" + key + "': times and values must be arrays of equal length");
    for (std::size_t i = 0; i < t.size(); ++i) {
      s.times.push_back(as_number(t[i], key + ".times"));
      s.values.push_back(v[i]);
    }
  } else {
    s.values.push_back(j);
  }
  return s;
}

// Linear interpolation of a series at t, flat outside its points.
template <class T, class Conv>
T series_at(const Series& s, double t, Conv conv) {
  if (s.times.empty()) return conv(s.values[0]);
  if (t <= s.times.front()) return conv(s.values.front());
  if (t >= s.times.back()) return conv(s.values.back());
  auto it = std::upper_bound(s.times.begin(), s.times.end(), t);
  std::size_t k = std::size_t(it - s.times.begin()) - 1;
  double w = (t - s.times[k]) / (s.times[k + 1] - s.times[k]);
  T a = conv(s.values[k]);
  T b = conv(s.values[k + 1]);
  return T((1.0 - w) * a + w * b);
}

const Json& require(const Json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("missing '" + key + "'");
  return j[key];
}

MarketModel model_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("model must be an object");
  const double T = as_number(require(j, "horizon"), "horizon");
  const char* keys[] = {"sigma", "alpha", "beta", "b", "delta", "r"};
  std::map<std::string, Series> series;
  std::set<double> grid{0.0, T};
  for (const char* k : keys) {
    series[k] = as_series(require(j, k), k);
    for (double t : series[k].times) {
      if (t < 0.0 || t > T) throw ConfigError(std::string("'") + k + "' has times outside [0, T]");
      grid.insert(t);
    }
  }
  int n = j.contains("n") ? require(j, "n").get<int>() : 0;
  if (n == 0) {
    const Json& s0 = series["sigma"].values[0];
    n = s0.is_array() ? int(s0.size()) : 1;
  }

  MarketInputs in;
  in.horizon = T;
  in.times.assign(grid.begin(), grid.end());
  auto mat = [&](const char* key) {
    return [key, n](const Json& v) { return as_matrix(v, key, n); };
  };
  for (double t : in.times) {
    CoefficientNode c;
    c.sigma = series_at<Mat>(series["sigma"], t, mat("sigma"));
    c.alpha = series_at<Mat>(series["alpha"], t, mat("alpha"));
    c.beta = series_at<Mat>(series["beta"], t, mat("beta"));
    c.b = series_at<Mat>(series["b"], t, mat("b"));
    c.delta = series_at<Vec>(series["delta"], t,
                             [n](const Json& v) { return as_vector(v, "delta", n); });
    c.r = series_at<double>(series["r"], t, [](const Json& v) { return as_number(v, "r"); });
    in.nodes.push_back(c);
  }
  in.m0 = as_vector(require(j, "m0"), "m0", n);
  in.gamma0 = as_matrix(require(j, "gamma0"), "gamma0", n);
  in.S0 = j.contains("S0") ? as_vector(j["S0"], "S0", n) : Vec::Ones(n);
  return MarketModel(std::move(in));
}

UtilitySpec utility_from_json(const Json& j, double default_X0) {
  if (!j.is_object()) throw ConfigError("utility must be an object");
  const std::string kind = require(j, "kind").get<std::string>();
  const double X0 = j.contains("X0") ? as_number(j["X0"], "X0") : default_X0;
  if (kind == "log") return UtilitySpec::log(X0);
  if (kind == "power") return UtilitySpec::power(as_number(require(j, "d"), "d"), X0);
  if (kind == "quadratic")
    return UtilitySpec::quadratic(as_number(require(j, "k"), "k"), as_number(require(j, "c"), "c"),
                                  X0);
  if (kind == "linear_penalty") return UtilitySpec::linear_penalty(require(j, "l").get<int>(), X0);
  if (kind == "goal")
    return UtilitySpec::goal_reaching(as_number(require(j, "level"), "level"), X0);
  throw ConfigError("unknown utility kind '" + kind + "'");
}

std::size_t as_count(const Json& j, const std::string& key) {
  if (!j.is_number_integer() || j.get<long long>() < 0)
    throw ConfigError("'" + key + "' must be a non-negative integer");
  return j.get<std::size_t>();
}

std::pair<double, double> as_bounds(const Json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("'" + key + "' must be [lo, hi]");
  return {as_number(j[0], key), as_number(j[1], key)};
}

Json matrix_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
    rows.push_back(r);
  }
  return rows;
}

Json vector_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json utility_params(const UtilitySpec& u) {
  Json p = Json::object();
  switch (u.kind) {
    case UtilityKind::Log:
      break;
    case UtilityKind::Power:
      p["d"] = u.d;
      break;
    case UtilityKind::Quadratic:
      p["k"] = u.k;
      p["c"] = u.c;
      break;
    case UtilityKind::LinearPenalty:
      p["l"] = u.l;
      break;
    case UtilityKind::Goal:
      p["level"] = u.goal;
      break;
  }
  p["X0"] = u.X0;
  return p;
}

Json model_json(const MarketModel& m) {
  Json j;
  j["horizon"] = m.horizon();
  Json nodes = Json::array();
  for (std::size_t k = 0; k < m.grid().size(); ++k) {
    const CoefficientNode& c = m.nodes()[k];
    Json node;
    node["t"] = m.grid()[k];
    node["sigma"] = matrix_json(c.sigma);
    node["alpha"] = matrix_json(c.alpha);
    node["beta"] = matrix_json(c.beta);
    node["b"] = matrix_json(c.b);
    node["delta"] = vector_json(c.delta);
    node["r"] = c.r;
    nodes.push_back(node);
  }
  j["nodes"] = nodes;
  j["m0"] = vector_json(m.m0());
  j["gamma0"] = matrix_json(m.gamma0());
  j["S0"] = vector_json(m.S0());
  return j;
}

std::string dump(const Json& j) {
  // nlohmann prints doubles with the shortest round-trip representation.
  return j.dump(2) + "\n";
}

Json estimate_json(const Estimate& e) {
  Json j;
  j["estimate"] = e.value;
  j["stderr"] = e.std_error;
  j["n"] = e.n;
  j["bad"] = e.bad;
  return j;
}

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ConfigError("truncated value file");
  return v;
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

MarketModel model_from_json_text(const std::string& text) {
  return model_from_json(parse(text, "model"));
}

MarketModel load_model(const std::string& path) {
  return model_from_json(parse(read_text(path), path));
}

ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig cfg;
  cfg.path = path;
  const Json j = parse(read_text(path), path);
  if (!j.is_object()) throw ConfigError(path + ": top level must be an object");
  const std::filesystem::path base = std::filesystem::path(path).parent_path();

  try {
    const Json& m = require(j, "model");
    if (m.is_string()) {
      std::filesystem::path mp = m.get<std::string>();
      if (mp.is_relative()) mp = base / mp;
      cfg.model_path = mp.string();
      cfg.model = std::make_shared<const MarketModel>(load_model(cfg.model_path));
    } else {
      cfg.model = std::make_shared<const MarketModel>(model_from_json(m));
    }
    const double X0 = j.contains("X0") ? as_number(j["X0"], "X0") : 1.0;
    cfg.utility = utility_from_json(require(j, "utility"), X0);

    const Json& mc = require(j, "mc");
    if (!mc.contains("seed")) throw ConfigError("'mc.seed' is mandatory");
    cfg.mc.seed = mc["seed"].get<std::uint64_t>();
    if (mc.contains("paths")) cfg.mc.paths = as_count(mc["paths"], "mc.paths");
    if (mc.contains("dt")) cfg.mc.dt = as_number(mc["dt"], "mc.dt");

    if (j.contains("solver")) {
      const Json& s = j["solver"];
      SolverSettings& ss = cfg.solver;
      if (s.contains("kind")) {
        std::string k = s["kind"].get<std::string>();
        if (k == "fd") ss.kind = SolverKind::FD;
        else if (k == "mc") ss.kind = SolverKind::MC;
        else throw ConfigError("solver.kind must be 'fd' or 'mc'");
      }
      if (s.contains("nx1")) ss.nx1 = as_count(s["nx1"], "solver.nx1");
      if (s.contains("nx2")) ss.nx2 = as_count(s["nx2"], "solver.nx2");
      if (s.contains("nt")) ss.nt = as_count(s["nt"], "solver.nt");
      if (s.contains("k_dom")) ss.k_dom = as_number(s["k_dom"], "solver.k_dom");
      if (s.contains("pilot")) ss.pilot = as_count(s["pilot"], "solver.pilot");
      if (s.contains("x1")) ss.x1_bounds = as_bounds(s["x1"], "solver.x1");
      if (s.contains("x2")) ss.x2_bounds = as_bounds(s["x2"], "solver.x2");
      if (s.contains("upwind")) ss.upwind = s["upwind"].get<bool>();
      if (s.contains("scheme")) {
        const std::string k = s["scheme"].get<std::string>();
        if (k == "auto") ss.scheme = FDScheme::Auto;
        else if (k == "centred") ss.scheme = FDScheme::Centred;
        else if (k == "aligned") ss.scheme = FDScheme::Aligned;
        else throw ConfigError("solver.scheme must be 'auto', 'centred' or 'aligned'");
      }
      if (s.contains("paths")) ss.mc_paths = as_count(s["paths"], "solver.paths");
      if (s.contains("dt")) ss.mc_dt = as_number(s["dt"], "solver.dt");
      if (s.contains("probes")) {
        for (const Json& p : s["probes"]) {
          Vec v = as_vector(p, "solver.probes", 0);
          if (v.size() != cfg.model->n() + 2)
            throw ConfigError("each probe is [a_hat..., y, t]");
          ss.probes.push_back({v.head(v.size() - 1), v(v.size() - 1)});
        }
      }
    }
    if (cfg.solver.probes.empty()) {
      Vec x0(cfg.model->n() + 1);
      x0.head(cfg.model->n()) = cfg.model->m0();
      x0(cfg.model->n()) = 0.0;
      cfg.solver.probes.push_back({x0, 0.0});
    }

    if (j.contains("replication")) {
      const Json& r = j["replication"];
      if (r.contains("paths")) cfg.replication.paths = as_count(r["paths"], "replication.paths");
      if (r.contains("dt")) cfg.replication.dt = as_number(r["dt"], "replication.dt");
      if (r.contains("pi_max_factor"))
        cfg.replication.pi_max_factor = as_number(r["pi_max_factor"], "replication.pi_max_factor");
      if (r.contains("saved_paths"))
        cfg.replication.saved_paths = as_count(r["saved_paths"], "replication.saved_paths");
    }
    cfg.compare.paths = 10000;
    cfg.compare.dt = 1e-3;
    if (j.contains("compare")) {
      const Json& c = j["compare"];
      if (c.contains("paths")) cfg.compare.paths = as_count(c["paths"], "compare.paths");
      if (c.contains("dt")) cfg.compare.dt = as_number(c["dt"], "compare.dt");
    }
    if (j.contains("outputs") && j["outputs"].contains("dir"))
      cfg.out_dir = j["outputs"]["dir"].get<std::string>();
  } catch (const Json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  refresh_fingerprint(cfg);
  return cfg;
}

void refresh_fingerprint(ExperimentConfig& cfg) {
  Json j;
  j["model"] = model_json(*cfg.model);
  j["utility"] = cfg.utility.name();
  j["utility_params"] = utility_params(cfg.utility);
  const SolverSettings& s = cfg.solver;
  j["solver"] = {{"kind", s.kind == SolverKind::FD ? "fd" : "mc"},
                 {"nx1", s.nx1},
                 {"nx2", s.nx2},
                 {"nt", s.nt},
                 {"k_dom", s.k_dom},
                 {"pilot", s.pilot},
                 {"upwind", s.upwind},
                 {"scheme", to_string(s.scheme)},
                 {"paths", s.mc_paths},
                 {"dt", s.mc_dt}};
  if (s.x1_bounds) j["solver"]["x1"] = {s.x1_bounds->first, s.x1_bounds->second};
  if (s.x2_bounds) j["solver"]["x2"] = {s.x2_bounds->first, s.x2_bounds->second};
  j["mc"] = {{"paths", cfg.mc.paths}, {"dt", cfg.mc.dt}, {"seed", cfg.mc.seed}};
  cfg.fingerprint = fnv1a(j.dump());
}

std::string calibration_record(const Calibration& c, const ExperimentConfig& cfg) {
  Json j;
  j["variant"] = c.utility.name();
  j["params"] = utility_params(c.utility);
  j["lambda_hat"] = c.lambda_hat;
  j["budget"] = c.budget;
  j["residual"] = c.residual;
  j["stderr"] = c.std_error;
  j["tolerance"] = c.tolerance;
  j["bad"] = c.bad;
  j["iterations"] = c.iterations;
  j["N"] = c.mc.paths;
  j["dt"] = c.mc.dt;
  j["seed"] = c.mc.seed;
  j["fingerprint"] = [&] {
    std::ostringstream os;
    os << std::hex << cfg.fingerprint;
    return os.str();
  }();
  return dump(j);
}

std::string quadr_record(const QuadrReport& q) {
  Json j;
  j["second_moment"] = estimate_json(q.second_moment);
  j["top_share"] = q.top_share;
  j["heavy_tail"] = q.heavy_tail;
  j["bounded"] = q.bounded;
  j["mu"] = q.mu;
  j["moment_pass"] = q.moment.pass;
  j["moment_p"] = q.moment.p;
  j["pass"] = q.pass;
  return dump(j);
}

std::string estimate_record(const Estimate& e, std::size_t N, double dt, std::uint64_t seed) {
  Json j;
  j["estimate"] = e.value;
  j["stderr"] = e.std_error;
  j["N"] = N;
  j["dt"] = dt;
  j["seed"] = seed;
  j["bad"] = e.bad;
  return dump(j);
}

std::string replication_record(const ReplicationSummary& r, const UtilitySpec& u,
                               const ReplicationSummary* pstar) {
  Json j;
  j["variant"] = u.name();
  j["replication_mean_err"] = r.abs_error.value;
  j["replication_err_stderr"] = r.abs_error.std_error;
  j["paths"] = r.abs_error.n;
  j["mean_X_tilde_half"] = estimate_json(r.wealth_half);
  j["mean_X_tilde_T"] = estimate_json(r.wealth_terminal);
  j["mean_claim"] = estimate_json(r.claim);
  j["initial_value"] = r.initial_value;
  j["min_excess"] = r.min_excess;
  j["cap_events"] = r.cap_events;
  j["extrapolations"] = r.extrapolations;
  if (pstar) {
    j["pstar_mean_X_tilde_half"] = estimate_json(pstar->wealth_half);
    j["pstar_mean_X_tilde_T"] = estimate_json(pstar->wealth_terminal);
  }
  return dump(j);
}

std::string utility_record(const UtilityEvaluation& e) {
  Json j;
  j["E_utility"] = e.utility.value;
  j["stderr"] = e.utility.std_error;
  j["breach_count"] = e.breaches;
  j["breach_rate"] = e.breach_rate;
  j["valid"] = e.valid;
  j["mean_X_tilde_T"] = e.terminal_wealth.value;
  return dump(j);
}

CalibrationArtifact read_calibration(const std::string& path) {
  const Json j = parse(read_text(path), path);
  CalibrationArtifact a;
  try {
    a.lambda_hat = require(j, "lambda_hat").get<double>();
    a.fingerprint = std::stoull(require(j, "fingerprint").get<std::string>(), nullptr, 16);
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return a;
}

void write_value_file(const PDESolution& sol, const std::string& path) {
  if (sol.solver != SolverKind::FD) throw DomainError("only grid solutions have a value file");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path);
  os.write("DRIFTV01", 8);
  put<std::uint64_t>(os, sol.x1.size());
  put<std::uint64_t>(os, sol.x2.size());
  put<std::uint64_t>(os, sol.snapshot_times.size());
  put(os, sol.grid.x1_lo);
  put(os, sol.grid.x1_hi);
  put(os, sol.grid.x2_lo);
  put(os, sol.grid.x2_hi);
  for (double v : sol.x1) put(os, v);
  for (double v : sol.x2) put(os, v);
  for (double v : sol.snapshot_times) put(os, v);
  for (const auto& s : sol.snapshots)
    os.write(reinterpret_cast<const char*>(s.data()), std::streamsize(s.size() * sizeof(double)));
  if (!os) throw ConfigError("failed writing " + path);
}

PDESolution read_value_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, "DRIFTV01", 8) != 0)
    throw ConfigError(path + " is not a value file");
  PDESolution sol;
  sol.solver = SolverKind::FD;
  const auto n1 = get<std::uint64_t>(is), n2 = get<std::uint64_t>(is), ns = get<std::uint64_t>(is);
  if (n1 < 2 || n2 < 2 || ns < 2 || n1 * n2 > (1ull << 32)) throw ConfigError(path + ": bad sizes");
  sol.grid.x1_lo = get<double>(is);
  sol.grid.x1_hi = get<double>(is);
  sol.grid.x2_lo = get<double>(is);
  sol.grid.x2_hi = get<double>(is);
  sol.grid.nx1 = n1;
  sol.grid.nx2 = n2;
  sol.x1.resize(n1);
  sol.x2.resize(n2);
  sol.snapshot_times.resize(ns);
  for (auto& v : sol.x1) v = get<double>(is);
  for (auto& v : sol.x2) v = get<double>(is);
  for (auto& v : sol.snapshot_times) v = get<double>(is);
  sol.snapshots.assign(ns, std::vector<double>(n1 * n2));
  for (auto& s : sol.snapshots)
    if (!is.read(reinterpret_cast<char*>(s.data()), std::streamsize(s.size() * sizeof(double))))
      throw ConfigError("truncated value file");
  return sol;
}

void write_diagnostics_csv(std::ostream& os, const std::vector<DiagnosticRow>& rows) {
  os << "t,quantity,min_eigenvalue,margin\n";
  for (const auto& r : rows)
    os << format_number(r.t) << ',' << r.quantity << ',' << format_number(r.min_eigenvalue) << ','
       << format_number(r.margin) << '\n';
}

void write_value_slice_csv(std::ostream& os, const PDESolution& sol, double t) {
  os << "a_hat,y,V\n";
  for (double a : sol.x1)
    for (double y : sol.x2) {
      Vec x(2);
      x << a, y;
      os << format_number(a) << ',' << format_number(y) << ',' << format_number(sol.value(x, t))
         << '\n';
    }
}

void write_probes_csv(std::ostream& os, const PDESolution& sol) {
  if (sol.probes.empty()) return;
  const Eigen::Index d = sol.probes.front().x.size();
  for (Eigen::Index k = 0; k < d; ++k) os << "x_" << k + 1 << ',';
  os << "t,V,stderr";
  for (Eigen::Index k = 0; k < d; ++k) os << ",dV_" << k + 1;
  for (Eigen::Index k = 0; k < d; ++k) os << ",dV_" << k + 1 << "_stderr";
  os << ",bad\n";
  for (const auto& p : sol.probes) {
    for (Eigen::Index k = 0; k < d; ++k) os << format_number(p.x(k)) << ',';
    os << format_number(p.t) << ',' << format_number(p.value) << ',' << format_number(p.std_error);
    for (Eigen::Index k = 0; k < d; ++k) os << ',' << format_number(p.gradient(k));
    for (Eigen::Index k = 0; k < d; ++k) os << ',' << format_number(p.gradient_std_error(k));
    os << ',' << p.bad << '\n';
  }
}

void write_wealth_csv(std::ostream& os, const std::vector<WealthPath>& paths) {
  if (paths.empty()) return;
  const Eigen::Index n = paths.front().pi.cols();
  os << "path,t,X,X_tilde";
  for (Eigen::Index i = 0; i < n; ++i) os << ",pi_" << i + 1;
  os << ",pi0\n";
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const WealthPath& w = paths[p];
    for (std::size_t k = 0; k < w.times.size(); ++k) {
      os << p << ',' << format_number(w.times[k]) << ',' << format_number(w.X[k]) << ','
         << format_number(w.X_tilde[k]);
      const bool held = k + 1 < w.times.size();
      for (Eigen::Index i = 0; i < n; ++i)
        os << ',' << (held ? format_number(w.pi(Eigen::Index(k), i)) : std::string());
      os << ',' << (held ? format_number(w.pi0[k]) : std::string()) << '\n';
    }
  }
}

void write_filter_csv(std::ostream& os, const PathBundle& path, const MarketModel& model) {
  const int n = model.n();
  os << "t";
  for (int i = 0; i < n; ++i) os << ",a_hat_" << i + 1;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) os << ",gamma_" << i + 1 << k + 1;
  os << ",y_extra,Zbar";
  if (path.has_drift())
    for (int i = 0; i < n; ++i) os << ",a_tilde_" << i + 1;
  os << '\n';
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    os << format_number(path.times[k]);
    for (int i = 0; i < n; ++i) os << ',' << format_number(path.a_hat(Eigen::Index(k), i));
    const Mat& g = (*path.gamma)[k];
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < n; ++c) os << ',' << format_number(g(i, c));
    os << ',' << format_number(path.y_extra[k]) << ',' << format_number(std::exp(path.y_extra[k]));
    if (path.has_drift())
      for (int i = 0; i < n; ++i) os << ',' << format_number(path.a_tilde(Eigen::Index(k), i));
    os << '\n';
  }
}

}  // namespace driftopt
