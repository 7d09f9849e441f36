// Copyright 2026 The driftopt Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference path simulation against the OpenMP kernel, plus the
// streaming estimators built on the kernel.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "driftopt/claim.hpp"
#include "driftopt/simulate.hpp"

namespace {

using namespace driftopt;

MarketModel bench_model() {
  CoefficientNode c;
  c.sigma = Mat::Constant(1, 1, 0.2);
  c.alpha = Mat::Constant(1, 1, 1.0);
  c.beta = Mat::Constant(1, 1, 0.1);
  c.b = Mat::Zero(1, 1);
  c.delta = Vec::Constant(1, 0.05);
  c.r = 0.02;
  return MarketModel::constant(1.0, c, Vec::Constant(1, 0.05), Mat::Constant(1, 1, 0.04),
                               Vec::Ones(1));
}

void BM_SimulateReference(benchmark::State& state) {
  const MarketModel m = bench_model();
  for (auto _ : state)
    benchmark::DoNotOptimize(
        simulate_paths_reference(m, std::size_t(state.range(0)), 1e-3, Measure::P, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 1000);
}

void BM_SimulateParallel(benchmark::State& state) {
  const MarketModel m = bench_model();
  omp_set_num_threads(int(state.range(1)));
  for (auto _ : state)
    benchmark::DoNotOptimize(simulate_paths(m, std::size_t(state.range(0)), 1e-3, Measure::P, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 1000);
}

void BM_TerminalLogZbar(benchmark::State& state) {
  const MarketModel m = bench_model();
  omp_set_num_threads(int(state.range(1)));
  for (auto _ : state)
    benchmark::DoNotOptimize(terminal_log_zbar(m, std::size_t(state.range(0)), 1e-3, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 1000);
}

BENCHMARK(BM_SimulateReference)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateParallel)
    ->ArgsProduct({{1000}, {1, 2, 4, 8}})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();
BENCHMARK(BM_TerminalLogZbar)
    ->ArgsProduct({{10000}, {1, 2, 4, 8}})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
