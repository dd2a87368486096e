// Per-net Steiner root candidates, evaluated serially or with OpenMP.

#include <benchmark/benchmark.h>

#include "amflow/placement.hpp"
#include "amflow/routing.hpp"
#include "support/reasoning_fixtures.hpp"

namespace {

using am::Exec;

const am::routing::RoutingGrid& amplifier_grid() {
  static const am::routing::RoutingGrid grid = [] {
    const auto inst = am::placement::instance_from_netlist(am::testing::amp5t(), 2.0);
    const auto placed = am::placement::anneal(inst, {}, 3);
    return am::routing::build_grid(placed.placement, inst);
  }();
  return grid;
}

template <Exec E>
void BM_RouteAll(benchmark::State& state) {
  am::routing::RouteOptions opt;
  opt.candidates = static_cast<std::size_t>(state.range(0));
  opt.exec = E;
  const auto& base = amplifier_grid();
  for (auto _ : state) {
    auto g = base;
    benchmark::DoNotOptimize(am::routing::route_all(g, {}, opt));
  }
}

}  // namespace

BENCHMARK(BM_RouteAll<Exec::Serial>)->Arg(1)->Arg(4)->Arg(8);
BENCHMARK(BM_RouteAll<Exec::Parallel>)->Arg(1)->Arg(4)->Arg(8);

BENCHMARK_MAIN();
