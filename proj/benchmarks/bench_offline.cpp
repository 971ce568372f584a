#include <benchmark/benchmark.h>

#include "cellsense/gp.hpp"
#include "cellsense/map_io.hpp"
#include "fixture.hpp"

namespace {

using namespace cellsense;

void BM_BuildRadioMap(benchmark::State& state) {
  const auto& f = bench::rural_fixture();
  const double g = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_radio_map(f.data.training, g));
}
BENCHMARK(BM_BuildRadioMap)->Arg(70)->Arg(200)->Arg(600)->Unit(benchmark::kMillisecond);

void BM_MapJsonRoundTrip(benchmark::State& state) {
  const auto& f = bench::rural_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(radio_map_from_json(radio_map_to_json(f.map)));
}
BENCHMARK(BM_MapJsonRoundTrip)->Unit(benchmark::kMillisecond);

void BM_GpFitOneTower(benchmark::State& state) {
  const auto& f = bench::rural_fixture();
  GpTrainingSet data = tower_training_set(f.map, 0);
  GpFitOptions fit;
  fit.max_points = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(GpTowerModel::fit(data, fit));
}
BENCHMARK(BM_GpFitOneTower)->Arg(100)->Arg(250)->Unit(benchmark::kMillisecond);

void BM_GenerateTrace(benchmark::State& state) {
  const Preset preset = make_preset("rural", 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_trace(preset.world, preset.test_route, 7));
  }
}
BENCHMARK(BM_GenerateTrace)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
