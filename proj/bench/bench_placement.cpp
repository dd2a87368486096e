// Independent annealing restarts, serial loop against OpenMP.

#include <benchmark/benchmark.h>

#include "amflow/placement.hpp"
#include "support/reasoning_fixtures.hpp"

namespace {

using am::Exec;

template <Exec E>
void BM_AnnealRestarts(benchmark::State& state) {
  const auto inst = am::placement::instance_from_netlist(am::testing::amp5t(), 2.0);
  am::placement::Schedule s;
  s.moves_per_temperature = 60;
  const auto restarts = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(am::placement::anneal_restarts(inst, s, 1, restarts, E));
}

}  // namespace

BENCHMARK(BM_AnnealRestarts<Exec::Serial>)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AnnealRestarts<Exec::Parallel>)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
