// Raster kernels: serial reference against the OpenMP path.

#include <benchmark/benchmark.h>

#include <random>

#include "amflow/vision.hpp"
#include "support/vision_oracle.hpp"

namespace {

using am::Exec;

am::vision::Mask sample_mask(int side) {
  std::mt19937_64 rng(7);
  return am::testing::random_mask(rng, side, side, 0.2);
}

template <Exec E>
void BM_Dilate(benchmark::State& state) {
  const auto m = sample_mask(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(am::vision::dilate(m, 2, E));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.bits.size()));
}

template <Exec E>
void BM_Components(benchmark::State& state) {
  const auto m = sample_mask(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    int count = 0;
    benchmark::DoNotOptimize(am::vision::connected_components(m, count, E));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.bits.size()));
}

}  // namespace

BENCHMARK(BM_Dilate<Exec::Serial>)->Arg(256)->Arg(1024);
BENCHMARK(BM_Dilate<Exec::Parallel>)->Arg(256)->Arg(1024);
BENCHMARK(BM_Components<Exec::Serial>)->Arg(256)->Arg(1024);
BENCHMARK(BM_Components<Exec::Parallel>)->Arg(256)->Arg(1024);

BENCHMARK_MAIN();
