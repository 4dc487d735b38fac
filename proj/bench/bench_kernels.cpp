// Serial reference kernels against their OpenMP versions.
// Arg(0) = serial, Arg(1) = parallel; threads come from OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "metastab/kernels.hpp"
#include "metastab/transfer_operator.hpp"
#include "metastab/trajectory_sim.hpp"

using namespace metastab;

namespace {

kernels::Exec exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? kernels::Exec::serial : kernels::Exec::parallel;
}

void label(benchmark::State& state) {
  state.SetLabel(state.range(0) == 0 ? "serial" : "openmp x" + std::to_string(kernels::max_threads()));
}

void BM_UlamRows(benchmark::State& state) {
  const auto family = two_cell();
  const auto n = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) {
    auto op = build_ulam(family, 0.01, n, OperatorKind::full, -1, exec_of(state));
    benchmark::DoNotOptimize(op.matrix().val.data());
  }
  label(state);
}
BENCHMARK(BM_UlamRows)->ArgsProduct({{0, 1}, {4096, 65536}})->Unit(benchmark::kMillisecond);

void BM_Histogram(benchmark::State& state) {
  const auto family = two_cell();
  EmpiricalDensityOptions o;
  o.burn_in = 100;
  o.chunks = 16;
  o.exec = exec_of(state);
  for (auto _ : state) {
    auto d = empirical_density(family, 0.01, 512, 2'000'000, 7, std::nullopt, std::nullopt, o);
    benchmark::DoNotOptimize(d.interval_masses.data());
  }
  state.SetItemsProcessed(state.iterations() * 2'000'000);
  label(state);
}
BENCHMARK(BM_Histogram)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_SimulateJumps(benchmark::State& state) {
  const auto family = two_cell();
  SimConfig cfg;
  cfg.eps = 0.01;
  cfg.n_traj = 2000;
  cfg.horizon_S = 10.0;
  cfg.seed = 11;
  cfg.initial_law = InitialLaw::mu_j;
  cfg.exec = exec_of(state);
  for (auto _ : state) {
    auto sim = simulate_jumps(family, cfg, 3);
    benchmark::DoNotOptimize(sim.records.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.n_traj));
  label(state);
}
BENCHMARK(BM_SimulateJumps)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
