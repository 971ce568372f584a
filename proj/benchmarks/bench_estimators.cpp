#include <benchmark/benchmark.h>

#include <cstddef>
#include <span>

#include "cellsense/gp.hpp"
#include "fixture.hpp"

namespace {

using namespace cellsense;

// Cycles through the test trace so every iteration sees a different window.
class Windows {
 public:
  explicit Windows(std::size_t n) : n_(n) {}
  ScanWindow next() {
    const auto& test = bench::rural_fixture().data.test;
    const std::size_t end = n_ + (i_++ % (test.size() - n_ + 1));
    return ScanWindow(std::span<const ScanVector>(test).subspan(end - n_, n_));
  }

 private:
  std::size_t n_;
  std::size_t i_ = 0;
};

void BM_CellSense(benchmark::State& state) {
  const auto& f = bench::rural_fixture();
  const CellSenseEstimator est(f.map, {});
  Windows windows(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(est.locate(windows.next(), 2));
  state.counters["cells"] = static_cast<double>(f.map.cells.size());
}
BENCHMARK(BM_CellSense)->Arg(1)->Arg(4)->Arg(8)->Arg(14);

void BM_Hybrid(benchmark::State& state) {
  const auto& f = bench::rural_fixture();
  const HybridEstimator est(f.map, {});
  Windows windows(1);
  for (auto _ : state) benchmark::DoNotOptimize(est.locate(windows.next(), 1));
}
BENCHMARK(BM_Hybrid);

void BM_Deterministic(benchmark::State& state) {
  const auto& f = bench::rural_fixture();
  const DeterministicEstimator est(f.map);
  Windows windows(8);
  for (auto _ : state) benchmark::DoNotOptimize(est.locate(windows.next(), 8));
}
BENCHMARK(BM_Deterministic);

void BM_CellId(benchmark::State& state) {
  const auto& f = bench::rural_fixture();
  Windows windows(1);
  for (auto _ : state) benchmark::DoNotOptimize(cellid_locate(f.map, windows.next().back()));
}
BENCHMARK(BM_CellId);

void BM_GaussianProcess(benchmark::State& state) {
  const auto& f = bench::rural_fixture();
  static const PrecomputedGrid grid = [&] {
    GpFitOptions fit;
    fit.max_points = 200;
    const auto models = fit_tower_models(f.map, fit);
    const Rect bounds = training_bounds(f.map);
    return gp_build_grid(models, bounds, spacing_for_point_count(bounds, 1019), f.map.origin);
  }();
  Windows windows(4);
  for (auto _ : state) benchmark::DoNotOptimize(gp_locate(grid, windows.next()));
  state.counters["grid_points"] = static_cast<double>(grid.points.size());
}
BENCHMARK(BM_GaussianProcess);

}  // namespace

BENCHMARK_MAIN();
