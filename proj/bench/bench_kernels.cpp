#include <benchmark/benchmark.h>

#include <vector>

#include "mfchaos/kernels.hpp"
#include "mfchaos/oracle.hpp"
#include "mfchaos/particles.hpp"
#include "mfchaos/random.hpp"

namespace {

using namespace mfchaos;

std::vector<double> positions(int n, int dim) {
  const CounterRng rng(42, 0);
  std::vector<double> x(static_cast<std::size_t>(n) * dim);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(0, 0, i);
  return x;
}

void BM_ForcesSerial(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto x = positions(n, 1);
  const KernelSpec k = KernelSpec::sine(1.0);
  for (auto _ : state) benchmark::DoNotOptimize(pairwise_forces(x, 1, k));
  state.SetItemsProcessed(state.iterations() * n * (n - 1) / 2);
}

void BM_ForcesParallel(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto x = positions(n, 1);
  const KernelSpec k = KernelSpec::sine(1.0);
  for (auto _ : state) benchmark::DoNotOptimize(pairwise_forces_parallel(x, 1, k));
  state.SetItemsProcessed(state.iterations() * n * (n - 1) / 2);
}

void BM_VortexForces(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto x = positions(n, 2);
  const KernelSpec k = mollify(KernelSpec::biot_savart(), 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(pairwise_forces_parallel(x, 2, k));
  state.SetItemsProcessed(state.iterations() * n * (n - 1) / 2);
}

const DiscreteGenerator& generator() {
  static const DiscreteGenerator gen(PhaseGrid::spatial(1, 16), KernelSpec::sine(0.6), 0.05, 4);
  return gen;
}

void BM_GeneratorMatvecSerial(benchmark::State& state) {
  const SparseMatrix& a = generator().forward();
  std::vector<double> x(a.cols(), 1.0), y(a.rows());
  for (auto _ : state) {
    a.multiply(x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(a.nonzeros()));
}

void BM_GeneratorMatvecParallel(benchmark::State& state) {
  const SparseMatrix& a = generator().forward();
  std::vector<double> x(a.cols(), 1.0), y(a.rows());
  for (auto _ : state) {
    a.multiply_parallel(x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(a.nonzeros()));
}

void BM_Ensemble(benchmark::State& state) {
  SimConfig cfg;
  cfg.particles = 32;
  cfg.order = Order::Second;
  cfg.dt = 0.01;
  cfg.t_end = 0.2;
  const DensityField f0 = DensityField::uniform(PhaseGrid::kinetic(1, 16, 16, 6.0));
  EnsembleOptions options;
  options.replicas = 64;
  options.parallel = state.range(0) != 0;
  const Observer mean_v{"v0", [](const ParticleState& s) { return s.velocity(0)[0]; }};
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_ensemble(cfg, KernelSpec::sine(1.0), f0, options, std::span(&mean_v, 1)));
  }
}

}  // namespace

BENCHMARK(BM_ForcesSerial)->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_ForcesParallel)->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_VortexForces)->Arg(256)->Arg(1024);
BENCHMARK(BM_GeneratorMatvecSerial);
BENCHMARK(BM_GeneratorMatvecParallel);
BENCHMARK(BM_Ensemble)->Arg(0)->Arg(1)->ArgName("parallel");

BENCHMARK_MAIN();
