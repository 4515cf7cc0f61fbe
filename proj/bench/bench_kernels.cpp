#include <benchmark/benchmark.h>

#include <cmath>

#include "thinobs/monitors.hpp"
#include "thinobs/scenarios.hpp"
#include "thinobs/solver.hpp"

using namespace thinobs;

namespace {

SweepOrder order_of(std::int64_t k) { return k ? SweepOrder::red_black : SweepOrder::lexicographic; }

// Arg 0: nodes per axis, arg 1: 0 serial lexicographic, 1 red-black OpenMP.
void BM_Solve2D(benchmark::State& state) {
  const Scenario sc = make_scenario({"laplace-exact", 2, static_cast<int>(state.range(0))});
  SolverParams p{1.9};
  p.order = order_of(state.range(1));
  int sweeps = 0;
  for (auto _ : state) {
    const SignoriniSolution u = solve(sc.spec, p);
    sweeps = u.sweeps;
    benchmark::DoNotOptimize(u.energy);
  }
  state.counters["sweeps"] = sweeps;
}
BENCHMARK(BM_Solve2D)->Args({65, 0})->Args({65, 1})->Args({129, 0})->Args({129, 1})
    ->Unit(benchmark::kMillisecond);

void BM_Solve3D(benchmark::State& state) {
  const Scenario sc = make_scenario({"laplace-exact-3d", 3, static_cast<int>(state.range(0))});
  SolverParams p{1.9};
  p.order = order_of(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(solve(sc.spec, p).energy);
}
BENCHMARK(BM_Solve3D)->Args({33, 0})->Args({33, 1})->Unit(benchmark::kMillisecond);

Execution exec_of(std::int64_t k) { return k ? Execution::parallel : Execution::serial; }

void BM_BallQuadrature(benchmark::State& state) {
  const Grid g = Grid::build(static_cast<int>(state.range(0)), 65);
  const BallQuadrature q(g);
  const std::vector<double> radii = geometric_ladder(0.9, 0.93, 0.1);
  auto f = [](const Vec& x) { return std::exp(x[0]) * std::cos(x[1] + x[2]); };
  for (auto _ : state) benchmark::DoNotOptimize(q.integrate(radii, f, exec_of(state.range(1))));
}
BENCHMARK(BM_BallQuadrature)->Args({2, 0})->Args({2, 1})->Args({3, 0})->Args({3, 1})
    ->Unit(benchmark::kMillisecond);

void BM_Profile(benchmark::State& state) {
  const Scenario sc = make_scenario({"laplace-exact", 2, 129});
  GridField v = GridField::sample(sc.spec.grid, sc.closed_form);
  v.attach_one_sided_layers();
  MonitorParams p;
  p.exec = exec_of(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(compute_profile(v, sc.spec.field, {}, p).N.back());
}
BENCHMARK(BM_Profile)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Sample(benchmark::State& state) {
  const Grid g = Grid::build(3, 65);
  auto f = [](const Vec& x) { return std::sin(x[0]) * std::cosh(x[1]) * x[2]; };
  for (auto _ : state)
    benchmark::DoNotOptimize(GridField::sample(g, f, exec_of(state.range(0))).max_abs());
}
BENCHMARK(BM_Sample)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
