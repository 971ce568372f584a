#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "cellsense/error.hpp"
#include "cellsense/eval.hpp"
#include "cellsense/synth.hpp"
#include "generators.hpp"

using namespace cellsense;

namespace {

struct SmallWorld {
  Dataset data;
  RadioMap map;
};

// 600 m square, 12 towers, a lawn-mower training drive and a diagonal test drive.
SmallWorld small_world(std::uint64_t seed) {
  testing::Rng rng(seed);
  std::vector<SynthTower> towers;
  for (int i = 0; i < 12; ++i) {
    towers.push_back({testing::tower_name(i),
                      {testing::uniform_real(rng, 0, 600), testing::uniform_real(rng, 0, 600)},
                      -30.0});
  }
  const SynthWorld world({0, 0, 600, 600}, towers, PathLossParams{}, seed);
  Route train;
  train.speed = 10.0;
  for (int row = 0; row <= 6; ++row) {
    const double y = row * 100.0;
    if (row % 2 == 0) {
      train.waypoints.push_back({0, y});
      train.waypoints.push_back({600, y});
    } else {
      train.waypoints.push_back({600, y});
      train.waypoints.push_back({0, y});
    }
  }
  const Route test{{{0, 0}, {600, 600}, {0, 600}}, 8.0};
  SmallWorld out;
  out.data.training = generate_trace(world, train, seed + 1);
  out.data.test = generate_trace(world, test, seed + 2, 10000.0);
  out.data.tower_locations = world.tower_locations();
  out.map = build_radio_map(out.data.training, 70.0);
  attach_tower_locations(out.map, out.data.tower_locations);
  return out;
}

EstimatorParams params(int ns, int k) {
  EstimatorParams p;
  p.n_samples = ns;
  p.k = k;
  return p;
}

}  // namespace

TEST_CASE("percentile order statistics") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(percentile(v, 0.5) == doctest::Approx(50.5));
  CHECK(percentile(v, 0.95) == doctest::Approx(95.05));
  CHECK(percentile(v, 0.0) == 1.0);
  CHECK(percentile(v, 1.0) == 100.0);
  CHECK(percentile(std::vector<double>{7.0}, 0.3) == 7.0);
  CHECK_THROWS_AS(percentile(std::vector<double>{}, 0.5), PreconditionError);
}

TEST_CASE("a perfect estimator scores zero error") {
  const SmallWorld w = small_world(1);
  const Projection frame = w.map.projection();
  EvalOptions opts;
  opts.n_samples = 3;
  const auto report = evaluate_estimator(
      "oracle",
      [&](ScanWindow win) {
        LocationEstimate e;
        e.location = frame.project(*win.back().truth);
        return e;
      },
      frame, w.data.test, opts);
  CHECK(report.estimates == w.data.test.size());
  CHECK(report.median_error_m == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(report.p95_error_m < 1e-9);
}

TEST_CASE("evaluation windows slide with stride one and start short") {
  const SmallWorld w = small_world(2);
  std::vector<std::size_t> sizes;
  EvalOptions opts;
  opts.n_samples = 4;
  opts.timing_repetitions = 1;
  (void)evaluate_estimator(
      "probe",
      [&](ScanWindow win) {
        sizes.push_back(win.size());
        return LocationEstimate{};
      },
      w.map.projection(), w.data.test, opts);
  REQUIRE(sizes.size() == w.data.test.size());
  CHECK(sizes[0] == 1);
  CHECK(sizes[1] == 2);
  CHECK(sizes[2] == 3);
  for (std::size_t i = 3; i < sizes.size(); ++i) CHECK(sizes[i] == 4);
}

TEST_CASE("report invariants and CSV output") {
  const SmallWorld w = small_world(3);
  const RadioMap before = w.map;
  for (auto t : {Technique::cellsense, Technique::hybrid, Technique::deterministic, Technique::cellid}) {
    const auto r = evaluate(w.map, nullptr, w.data.test, t, params(t == Technique::hybrid ? 1 : 3, 2), 1);
    CHECK(r.technique == to_string(t));
    CHECK(r.p95_error_m >= r.median_error_m);
    REQUIRE(r.error_cdf.size() == r.estimates);
    CHECK(r.error_cdf.back().second == 1.0);
    for (std::size_t i = 1; i < r.error_cdf.size(); ++i) {
      CHECK(r.error_cdf[i].first >= r.error_cdf[i - 1].first);
      CHECK(r.error_cdf[i].second > r.error_cdf[i - 1].second);
    }
    // The median is recoverable from the CDF within one sample step.
    std::size_t i = 0;
    while (r.error_cdf[i].second < 0.5) ++i;
    CHECK(r.median_error_m >= r.error_cdf[i > 0 ? i - 1 : 0].first);
    CHECK(r.median_error_m <= r.error_cdf[std::min(i + 1, r.error_cdf.size() - 1)].first);
    CHECK(r.mean_time_per_estimate_ms >= 0.0);
  }
  CHECK(w.map == before);

  const auto r = evaluate(w.map, nullptr, w.data.test, Technique::cellsense, params(3, 2), 1);
  std::ostringstream report;
  write_report_csv(report, std::vector<EvalReport>{r});
  CHECK(report.str().rfind(std::string(kReportHeader) + "\n", 0) == 0);
  CHECK(report.str().find("cellsense,70,3,2,") != std::string::npos);
  std::ostringstream cdf;
  write_cdf_csv(cdf, r);
  CHECK(cdf.str().rfind("error_m,cum_frac\n", 0) == 0);
  std::size_t lines = 0;
  for (char c : cdf.str()) lines += c == '\n';
  CHECK(lines == r.estimates + 1);
}

TEST_CASE("truth handling in evaluation") {
  const SmallWorld w = small_world(4);
  auto test = w.data.test;
  test[5].truth.reset();
  CHECK_THROWS_AS(evaluate(w.map, nullptr, test, Technique::cellsense, params(2, 2), 1), DataError);
  EvalOptions opts;
  opts.truth_required = false;
  opts.timing_repetitions = 1;
  const CellSenseEstimator est(w.map, {});
  const auto r = evaluate_estimator("cs", [&](ScanWindow win) { return est.locate(win, 2); },
                                    w.map.projection(), test, opts);
  CHECK(r.estimates == test.size() - 1);
  CHECK_THROWS_AS(evaluate(w.map, nullptr, std::vector<ScanVector>{}, Technique::cellsense,
                           params(2, 2), 1),
                  DataError);
  CHECK_THROWS_AS(evaluate(w.map, nullptr, w.data.test, Technique::gp, params(2, 2), 1),
                  PreconditionError);
}

TEST_CASE("error statistics are reproducible") {
  const SmallWorld a = small_world(5);
  const SmallWorld b = small_world(5);
  const auto ra = evaluate(a.map, nullptr, a.data.test, Technique::cellsense, params(3, 2), 1);
  const auto rb = evaluate(b.map, nullptr, b.data.test, Technique::cellsense, params(3, 2), 1);
  CHECK(ra.median_error_m == rb.median_error_m);
  CHECK(ra.p95_error_m == rb.p95_error_m);
  CHECK(ra.error_cdf == rb.error_cdf);
}

TEST_CASE("tower ablation") {
  const SmallWorld w = small_world(6);
  CHECK(ablate_towers(w.map, 0.0, 1) == w.map);

  testing::Rng rng(7);
  testing::MapShape shape;
  shape.max_towers = 10;
  RadioMap ten;
  do {
    ten = testing::random_map(rng, shape);
  } while (ten.towers.size() != 10);
  const RadioMap half = ablate_towers(ten, 0.5, 3);
  CHECK(half.towers.size() == 5);
  CHECK_NOTHROW(validate(half));
  const auto dropped = choose_towers_to_drop(ten.towers, 0.5, 3);
  CHECK(dropped.size() == 5);
  for (const auto& cell : half.cells) {
    for (const auto& p : cell.points) CHECK_FALSE(p.readings.empty());
  }
  CHECK(ablate_towers(ten, 0.5, 3) == half);
  CHECK_THROWS_AS(ablate_towers(ten, 1.0, 3), PreconditionError);
  CHECK_THROWS_AS(ablate_towers(ten, 0.99, 3), PreconditionError);

  const auto scans = remove_towers(w.data.test, dropped);
  for (const auto& s : scans) CHECK_FALSE(s.readings.empty());
}

TEST_CASE("ablation removes every trace of the dropped towers (property)") {
  testing::Rng rng(8);
  for (int iter = 0; iter < 200; ++iter) {
    const RadioMap map = testing::random_map(rng);
    if (map.towers.size() < 2) continue;
    const double fraction = testing::uniform_real(rng, 0.0, 0.5);
    const auto dropped = choose_towers_to_drop(map.towers, fraction, rng());
    const RadioMap out = remove_towers(map, dropped);
    CHECK_NOTHROW(validate(out));
    CHECK(out.towers.size() == map.towers.size() - dropped.size());
    for (const auto& id : out.towers) CHECK(dropped.count(id) == 0);
    std::size_t kept_readings = 0;
    for (const auto& cell : map.cells) {
      for (const auto& p : cell.points) {
        for (const auto& [t, a] : p.readings) kept_readings += dropped.count(map.towers[t]) == 0;
      }
    }
    std::size_t readings = 0;
    for (const auto& cell : out.cells) {
      for (const auto& p : cell.points) readings += p.readings.size();
    }
    CHECK(readings == kept_readings);
  }
}

TEST_CASE("fingerprint thinning") {
  std::vector<ScanVector> scans(1000);
  for (std::size_t i = 0; i < scans.size(); ++i) scans[i].timestamp = static_cast<double>(i);
  CHECK(thin_fingerprint(scans, 1.0, 1) == scans);
  const auto kept = thin_fingerprint(scans, 0.4, 1);
  CHECK(kept.size() == 400);
  for (std::size_t i = 1; i < kept.size(); ++i) CHECK(kept[i - 1].timestamp < kept[i].timestamp);
  CHECK(thin_fingerprint(scans, 0.4, 1) == kept);
  CHECK(thin_fingerprint(scans, 0.4, 2) != kept);
  CHECK_THROWS_AS(thin_fingerprint(scans, 0.0, 1), PreconditionError);
  CHECK_THROWS_AS(thin_fingerprint(scans, 1.5, 1), PreconditionError);
}

TEST_CASE("a single-value sweep equals a plain evaluation") {
  const SmallWorld w = small_world(9);
  SweepSetup setup;
  setup.training = w.data.training;
  setup.test = w.data.test;
  setup.tower_locations = w.data.tower_locations;
  setup.params = params(3, 2);
  setup.timing_repetitions = 1;
  const std::vector<double> g{70.0};
  const auto rows = sweep_grid_length(setup, g);
  REQUIRE(rows.size() == 1);
  const auto plain = evaluate(w.map, nullptr, w.data.test, Technique::cellsense, params(3, 2), 1);
  CHECK(rows[0].median_error_m == plain.median_error_m);
  CHECK(rows[0].error_cdf == plain.error_cdf);
  CHECK(rows[0].grid_m == 70.0);

  const std::vector<int> ks{1, 2, 4};
  const auto krows = sweep_k(setup, ks);
  REQUIRE(krows.size() == 3);
  CHECK(krows[2].params.k == 4);
  const std::vector<double> drops{0.5};
  CHECK(sweep_towers(setup, drops)[0].technique == "cellsense[drop=0.5]");
  const std::vector<double> keeps{0.4};
  CHECK(sweep_density(setup, keeps)[0].technique == "cellsense[keep=0.4]");
  CHECK_THROWS_AS(sweep_ns(setup, std::vector<int>{}), PreconditionError);
}
