#include <benchmark/benchmark.h>

#include "mapkit/fluctuation.hpp"
#include "mapkit/linalg.hpp"
#include "mapkit/sim.hpp"
#include "mapkit/solvers.hpp"
#include "mapkit/taboo.hpp"
#include "mapkit/verify.hpp"

using namespace mapkit;

namespace {

LatticeModel bench_model(uint64_t seed) { return random_lattice_model(seed); }

void BM_SolveG(benchmark::State& state) {
  const LatticeModel model = bench_model(static_cast<uint64_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_G_lattice(model, {}));
  }
}
BENCHMARK(BM_SolveG)->Arg(1002)->Arg(1046);

void BM_Fundamentals(benchmark::State& state) {
  const LatticeModel model = bench_model(static_cast<uint64_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_fundamentals(model, {}));
  }
}
BENCHMARK(BM_Fundamentals)->Arg(1002)->Arg(1046);

void BM_TabooTables(benchmark::State& state) {
  const LatticeModel model = bench_model(1046);
  const Fundamentals fund = compute_fundamentals(model, {});
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_taboo_tables(model, fund, static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_TabooTables)->Arg(16)->Arg(64);

void BM_MmbmG(benchmark::State& state) {
  Vector a(2), s2(2);
  a << -0.2, 0.08;
  s2 << 1.6, 1.3;
  Matrix q(2, 2);
  q << -0.21, 0.16, 0.2, -0.24;
  const MmbmModel model = MmbmModel::create(a, s2, q);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_G_mmbm(model, {}));
  }
}
BENCHMARK(BM_MmbmG);

void BM_Expm(benchmark::State& state) {
  const LatticeModel model = bench_model(1002);
  const Matrix q = model.conservative_generator();
  for (auto _ : state) {
    benchmark::DoNotOptimize(expm(q));
  }
}
BENCHMARK(BM_Expm);

void BM_SimExitPaths(benchmark::State& state) {
  const LatticeModel model = bench_model(1002);
  SimTarget target{SimTarget::Kind::Exit};
  target.a = 1;
  target.b = 2;
  SimConfig config;
  config.n_paths = state.range(0);
  config.seed = 5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim_lattice(model, target, config));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * model.phases());
}
BENCHMARK(BM_SimExitPaths)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
