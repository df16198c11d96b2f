#include <benchmark/benchmark.h>

#include "qcl/montecarlo.hpp"
#include "qcl/parallel.hpp"
#include "qcl/spectral.hpp"
#include "qcl/ulam.hpp"

using namespace qcl;

namespace {

MapFamily standard_maps() {
  const Matrix2i cat{2, 1, 1, 1};
  return {HyperbolicMap::anosov(cat), HyperbolicMap::anosov(cat, {ShearTerm{{1, 0}, 0.03, {1.0, 0.0}}}, 0.1)};
}

Observable standard_observable() {
  return Observable({TrigPolynomial({TrigTerm{{1, 0}, 1.0, 0.0}}),
                     TrigPolynomial({TrigTerm{{1, 0}, 1.0, 0.0}, TrigTerm{{0, 1}, 0.0, 0.5}})});
}

void BM_UlamBuild(benchmark::State& state) {
  set_worker_count(1);
  const auto maps = standard_maps();
  const UlamGrid grid(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_ulam(maps[1], 1, grid, UlamSampling{1, 16}));
  state.SetItemsProcessed(state.iterations() * grid.size() * 16);
}
BENCHMARK(BM_UlamBuild)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_CocyclePushForward(benchmark::State& state) {
  set_worker_count(1);
  const auto maps = standard_maps();
  const UlamGrid grid(static_cast<int>(state.range(0)));
  const auto coc = make_transfer_cocycle(maps, grid, UlamSampling{1, 16});
  const OmegaPath omega(3, {0.5, 0.5});
  std::vector<double> h = DensityVector::uniform(grid).weights;
  for (auto _ : state) {
    push_along(coc, omega, 50, h);
    benchmark::DoNotOptimize(h.data());
  }
  state.SetItemsProcessed(state.iterations() * 50);
}
BENCHMARK(BM_CocyclePushForward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_TwistedFiberEigen(benchmark::State& state) {
  set_worker_count(1);
  const auto maps = standard_maps();
  const OperatorModel model{maps, standard_observable(), UlamGrid(64), UlamSampling{1, 16}, 50};
  const OmegaPath omega(3, {0.5, 0.5});
  for (auto _ : state) benchmark::DoNotOptimize(lambda_fiber_eigen(model, omega, Complex{0.2, 0.0}));
}
BENCHMARK(BM_TwistedFiberEigen)->Unit(benchmark::kMillisecond);

void BM_OrbitThroughput(benchmark::State& state) {
  set_worker_count(1);
  const auto maps = standard_maps();
  const auto g = standard_observable();
  const OmegaPath omega(3, {0.5, 0.5});
  SamplePlan plan;
  plan.seed = 5;
  plan.samples = 1000;
  plan.burn_in = 0;
  plan.batches = 10;
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate_sums(maps, g, omega, plan, {n}));
  state.SetItemsProcessed(state.iterations() * plan.samples * n);
}
BENCHMARK(BM_OrbitThroughput)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
