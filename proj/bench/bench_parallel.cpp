// Serial reference against the OpenMP map on per-realization kernels.
//
//   ./alloy_bench --benchmark_counters_tabular=true
//
// Arg(0) is map_serial; Arg(n > 0) is par::map with n workers.

#include <benchmark/benchmark.h>

#include <cmath>
#include <omp.h>

#include "alloy/parallel.hpp"
#include "alloy/spectral.hpp"

using namespace alloy;

namespace {

const AlloyModel& model() {
  static const AlloyModel m{SingleSitePotential::build(1, {{Site{0}, 1.0}, {Site{1}, 0.5}}),
                            CouplingMeasure::uniform(0.0, 1.0), 4.0};
  return m;
}

template <class F>
double reduce(int workers, std::size_t n, F&& f) {
  par::set_workers(workers > 0 ? workers : 1);
  const auto xs = workers > 0 ? par::map(n, f) : par::map_serial(n, f);
  double s = 0.0;
  for (double x : xs) s += x;
  return s;
}

void threads(benchmark::internal::Benchmark* b) {
  b->Arg(0);
  for (int w = 1; w <= omp_get_max_threads(); w *= 2) b->Arg(w);
  b->Unit(benchmark::kMillisecond)->UseRealTime();
}

void BM_green_chain(benchmark::State& state) {
  const OperatorSampler sampler(model(), FiniteVolume::box(1, 200));
  const std::size_t n = 256;
  for (auto _ : state) {
    benchmark::DoNotOptimize(reduce(static_cast<int>(state.range(0)), n, [&](std::size_t i) {
      const auto H = sampler.sample(1, i);
      return std::pow(std::abs(green(H, cplx(1.0, 1e-3), Site{0}, Site{20})), 0.5);
    }));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_green_chain)->Apply(threads);

void BM_eigenvalues_chain(benchmark::State& state) {
  const OperatorSampler sampler(model(), FiniteVolume::box(1, 250));
  const std::size_t n = 64;
  for (auto _ : state) {
    benchmark::DoNotOptimize(reduce(static_cast<int>(state.range(0)), n, [&](std::size_t i) {
      return eigenvalues(sampler.sample(2, i)).front();
    }));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_eigenvalues_chain)->Apply(threads);

void BM_count_square(benchmark::State& state) {
  const OperatorSampler sampler(AlloyModel{SingleSitePotential::delta(2), CouplingMeasure::uniform(0.0, 1.0), 4.0},
                                FiniteVolume::box(2, 10));
  const std::size_t n = 64;
  for (auto _ : state) {
    benchmark::DoNotOptimize(reduce(static_cast<int>(state.range(0)), n, [&](std::size_t i) {
      return static_cast<double>(sampler.sample(3, i).count_below(2.0));
    }));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_count_square)->Apply(threads);

// Whole estimator: workers set through the library switch.
void BM_wegner_estimator(benchmark::State& state) {
  const AlloyModel m{SingleSitePotential::delta(1), CouplingMeasure::uniform(0.0, 1.0), 2.0};
  par::set_workers(std::max<int>(1, static_cast<int>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(wegner_count(m, 10, 0.5, 1.0, 32, 4).averaged->value);
  par::set_workers(0);
}
BENCHMARK(BM_wegner_estimator)->Apply(threads);

}  // namespace

BENCHMARK_MAIN();
