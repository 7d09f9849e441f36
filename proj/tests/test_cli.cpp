// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult run(const std::string& args) {
  const std::string cmd = std::string("\"") + DRIFTOPT_CLI_PATH + "\" " + args + " 2>&1";
  CliResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  while (std::fgets(buf.data(), int(buf.size()), pipe)) r.out += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("driftopt_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const std::string& model, const std::string& extra = "") {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << R"({"model": )" << model << R"(, "utility": {"kind": "log"},
      "solver": {"kind": "fd", "nx1": 31, "nx2": 31, "nt": 50, "pilot": 200},
      "mc": {"paths": 2000, "dt": 0.02)" << extra << R"(},
      "replication": {"paths": 20, "dt": 0.02, "saved_paths": 2},
      "compare": {"paths": 200, "dt": 0.02}})";
  return p;
}

std::string model(double gamma0, double b = 0.0, double sigma = 0.2) {
  return R"({"horizon": 1.0, "sigma": )" + std::to_string(sigma) +
         R"(, "alpha": 1.0, "beta": 0.1, "b": )" + std::to_string(b) +
         R"(, "delta": [0.05], "r": 0.02, "m0": [0.05], "gamma0": )" + std::to_string(gamma0) + "}";
}

TEST(Cli, ValidateShippedConfig) {
  const CliResult r = run(std::string("validate --config ") + DRIFTOPT_CONFIG_DIR + "/log.json --out " +
                    scratch("validate").string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("valid"), std::string::npos);
}

TEST(Cli, NonPsdCovarianceIsValidationFailure) {
  const fs::path dir = scratch("gamma");
  const CliResult r = run("validate --config " + write_config(dir, model(-0.04), R"(, "seed": 1)").string());
  EXPECT_EQ(r.code, 2) << r.out;
}

TEST(Cli, MissingSeedIsUsageError) {
  const fs::path dir = scratch("seed");
  const CliResult r = run("validate --config " + write_config(dir, model(0.04)).string());
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_NE(r.out.find("seed"), std::string::npos);
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("solve").code, 1);
}

TEST(Cli, LargeFeedbackWarnsWithMarginTable) {
  const fs::path dir = scratch("cov1");
  const fs::path cfg = write_config(dir, model(0.04, 1.0, 1.0), R"(, "seed": 1)");
  const CliResult r = run("validate --config " + cfg.string() + " --out " + (dir / "out").string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("warning: margins below zero"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir / "out" / "diagnostics.csv"));
  // solve refuses to calibrate on such a model.
  EXPECT_EQ(run("solve --config " + cfg.string() + " --out " + (dir / "out").string()).code, 3);
}

TEST(Cli, PipelineWritesArtifacts) {
  const fs::path dir = scratch("pipeline");
  const fs::path cfg = write_config(dir, model(0.04), R"(, "seed": 5)");
  const std::string common = " --config " + cfg.string() + " --out " + (dir / "out").string();
  for (const char* cmd : {"solve", "replicate", "compare", "filter-demo"}) {
    const CliResult r = run(cmd + common);
    EXPECT_EQ(r.code, 0) << cmd << ": " << r.out;
  }
  for (const char* f : {"calibration.json", "quadr.json", "value_function.bin", "value_t0.csv",
                        "replication.json", "wealth_paths.csv", "comparison.csv", "filter_path.csv"})
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
}

TEST(Cli, ReplicateRejectsStaleSolution) {
  const fs::path dir = scratch("stale");
  const fs::path cfg = write_config(dir, model(0.04), R"(, "seed": 5)");
  const std::string out = " --out " + (dir / "out").string();
  ASSERT_EQ(run("solve --config " + cfg.string() + out).code, 0);
  EXPECT_NE(run("replicate --config " + cfg.string() + out + " --seed 6").code, 0);
}

TEST(Cli, MonteCarloSolver) {
  const fs::path dir = scratch("mc");
  const fs::path cfg = write_config(dir, model(0.04), R"(, "seed": 5)");
  const CliResult r = run("solve --solver mc --paths 2000 --config " + cfg.string() + " --out " +
                    (dir / "out").string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(dir / "out" / "probes.csv"));
}

}  // namespace
