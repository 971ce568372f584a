#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cellsense/error.hpp"
#include "cellsense/gp.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace cellsense;

TEST_CASE("kernel examples") {
  const GpHyperparams h{1.0, 1.0, 100.0};
  CHECK(kernel({3, 4}, {3, 4}, h) == 1.0);
  CHECK(kernel({3, 4}, {3, 4}, {7.5, 1.0, 10.0}) == 7.5);
  const double d = 100.0 * std::sqrt(2.0);
  CHECK(kernel({0, 0}, {d, 0}, h) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(kernel({0, 0}, {d, 0}, h) == doctest::Approx(0.3679).epsilon(1e-4));
  double prev = kernel({0, 0}, {0, 0}, h);
  for (double r = 10.0; r < 5000.0; r *= 1.5) {
    const double k = kernel({0, 0}, {r, 0}, h);
    CHECK(k < prev);
    prev = k;
  }
  CHECK(prev < 1e-100);
}

TEST_CASE("hyperparameter grid defaults") {
  const HyperparameterGrid grid;
  CHECK(grid.candidates().size() == 45);
  CHECK(grid.length_scale == std::vector<double>{50, 100, 200, 400, 800});
  CHECK(grid.sigma_f2 == std::vector<double>{25, 100, 400});
  CHECK(grid.sigma_n2 == std::vector<double>{1, 4, 16});
}

TEST_CASE("posterior matches the dense-solve oracle within 1e-8") {
  testing::Rng rng(301);
  for (int iter = 0; iter < 60; ++iter) {
    const auto data = testing::random_gp_data(rng, testing::uniform_int(rng, 2, 50));
    const auto hyper = testing::random_hyper(rng);
    const auto model = GpTowerModel::fit(data, hyper);
    CHECK(model.jitter() == 0.0);
    for (int q = 0; q < 10; ++q) {
      const PlanarPoint p{testing::uniform_real(rng, -100, 500), testing::uniform_real(rng, -100, 500)};
      const auto got = model.predict(p);
      const auto want = oracle::gp_predict(data, hyper, p);
      CHECK(std::abs(got.mean - want.mean) <= 1e-8);
      CHECK(std::abs(got.variance - std::max(0.0, want.variance)) <= 1e-8);
      CHECK(got.variance >= 0.0);
      CHECK(got.variance <= hyper.sigma_f2 + hyper.sigma_n2);
    }
  }
}

TEST_CASE("log marginal likelihood matches the dense oracle within 1e-6") {
  testing::Rng rng(302);
  for (int iter = 0; iter < 60; ++iter) {
    const auto data = testing::random_gp_data(rng, testing::uniform_int(rng, 2, 50));
    const auto hyper = testing::random_hyper(rng);
    CHECK(std::abs(log_marginal_likelihood(data, hyper) -
                   oracle::gp_log_marginal_likelihood(data, hyper)) <= 1e-6);
  }
}

TEST_CASE("fit selects the grid-maximal log marginal likelihood") {
  testing::Rng rng(303);
  for (int iter = 0; iter < 20; ++iter) {
    const auto data = testing::random_gp_data(rng, testing::uniform_int(rng, 2, 40));
    const auto model = GpTowerModel::fit(data);
    const auto scores = score_hyperparameters(data, HyperparameterGrid{});
    for (const auto& s : scores) CHECK(model.log_marginal_likelihood() >= s.log_marginal_likelihood);
    CHECK(model.log_marginal_likelihood() == doctest::Approx(
                                                  oracle::gp_log_marginal_likelihood(data, model.hyper()))
                                                  .epsilon(1e-9));
  }
}

TEST_CASE("interpolation sanity") {
  // Constant field plus tiny noise: posterior mean stays within sigma_n of the data.
  testing::Rng rng(304);
  GpTrainingSet flat;
  for (int i = 0; i < 30; ++i) {
    flat.locations.push_back({testing::uniform_real(rng, 0, 300), testing::uniform_real(rng, 0, 300)});
    flat.values.push_back(17.0 + testing::uniform_real(rng, -0.01, 0.01));
  }
  const auto model = GpTowerModel::fit(flat);
  for (std::size_t i = 0; i < flat.values.size(); ++i) {
    CHECK(std::abs(model.predict(flat.locations[i]).mean - flat.values[i]) <=
          std::sqrt(model.hyper().sigma_n2));
  }

  // Noiseless smooth field at 50 points, smallest noise in the grid.
  GpTrainingSet smooth;
  for (int i = 0; i < 50; ++i) {
    const PlanarPoint p{testing::uniform_real(rng, 0, 1000), testing::uniform_real(rng, 0, 1000)};
    smooth.locations.push_back(p);
    smooth.values.push_back(15.0 + 8.0 * std::sin(p.x / 300.0) * std::cos(p.y / 400.0));
  }
  GpFitOptions opts;
  opts.grid.sigma_n2 = {1e-6};
  const auto fitted = GpTowerModel::fit(smooth, opts);
  for (std::size_t i = 0; i < smooth.values.size(); ++i) {
    CHECK(std::abs(fitted.predict(smooth.locations[i]).mean - smooth.values[i]) <= 1e-3);
  }
}

TEST_CASE("far queries revert to the prior") {
  testing::Rng rng(305);
  const auto data = testing::random_gp_data(rng, 20);
  const GpHyperparams h{50.0, 2.0, 100.0};
  const auto model = GpTowerModel::fit(data, h);
  const auto far = model.predict({1e6, 1e6});
  CHECK(far.mean == doctest::Approx(model.mean_offset()).epsilon(1e-12));
  CHECK(far.variance == doctest::Approx(h.sigma_f2).epsilon(1e-12));
}

TEST_CASE("fit preconditions") {
  GpTrainingSet one;
  one.locations = {{0, 0}};
  one.values = {3};
  CHECK_THROWS_AS(GpTowerModel::fit(one), PreconditionError);
  GpTrainingSet two;
  two.locations = {{0, 0}, {1, 1}};
  two.values = {3, 4};
  CHECK_THROWS_AS(GpTowerModel::fit(two, GpHyperparams{0.0, 1.0, 1.0}), PreconditionError);
  // Duplicate locations still factorize thanks to the noise term.
  GpTrainingSet dup;
  dup.locations = {{5, 5}, {5, 5}, {5, 5}};
  dup.values = {1, 2, 3};
  CHECK_NOTHROW(GpTowerModel::fit(dup));
}

TEST_CASE("subsampling caps the training set and is seeded") {
  testing::Rng rng(306);
  const auto data = testing::random_gp_data(rng, 120);
  GpFitOptions opts;
  opts.max_points = 40;
  opts.grid.length_scale = {100.0};
  opts.grid.sigma_f2 = {100.0};
  opts.grid.sigma_n2 = {4.0};
  const auto a = GpTowerModel::fit(data, opts);
  const auto b = GpTowerModel::fit(data, opts);
  CHECK(a.training().locations.size() == 40);
  CHECK(a.training().locations == b.training().locations);
  opts.seed = 99;
  CHECK(GpTowerModel::fit(data, opts).training().locations != a.training().locations);
}

TEST_CASE("lattice counts") {
  CHECK(lattice({0, 0, 1000, 1000}, 50.0).size() == 441);
  CHECK(lattice({0, 0, 0, 0}, 10.0).size() == 1);
  const auto pts = lattice({-10, 5, 90, 55}, 25.0);
  CHECK(pts.size() == 5 * 3);
  CHECK(pts.front() == PlanarPoint{-10, 5});
  CHECK(pts.back() == PlanarPoint{90, 55});
  CHECK_THROWS_AS(lattice({0, 0, 10, 10}, 0.0), PreconditionError);
  const Rect r{0, 0, 1400, 1400};
  const auto n = lattice(r, spacing_for_point_count(r, 1019)).size();
  CHECK(n >= 900);
  CHECK(n <= 1100);
}

TEST_CASE("precomputed grid stores one field per tower") {
  testing::Rng rng(307);
  std::map<TowerId, GpTowerModel> models;
  models.emplace("A", GpTowerModel::fit(testing::random_gp_data(rng, 10), GpHyperparams{}));
  const auto grid = gp_build_grid(models, {0, 0, 400, 400}, 50.0);
  CHECK(grid.points.size() == 81);
  REQUIRE(grid.towers.size() == 1);
  CHECK(grid.towers[0].mean.size() == 81);
  CHECK(grid.towers[0].noise_variance == GpHyperparams{}.sigma_n2);
  for (double v : grid.towers[0].variance) CHECK(v >= 0.0);
  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    const auto p = models.at("A").predict(grid.points[i]);
    CHECK(grid.towers[0].mean[i] == doctest::Approx(p.mean).epsilon(1e-12));
    CHECK(std::abs(grid.towers[0].variance[i] - p.variance) <= 1e-9);
  }
}

TEST_CASE("gp_locate examples") {
  PrecomputedGrid one;
  one.points = {{12, 34}};
  one.towers = {{"A", 4.0, {10.0}, {1.0}}};
  ScanVector s;
  s.readings.emplace("A", RssiAsu(25));
  CHECK(gp_locate(one, s).location == PlanarPoint{12, 34});

  PrecomputedGrid two;
  two.points = {{0, 0}, {100, 50}};
  two.towers = {{"A", 4.0, {10.0, 20.0}, {1.0, 1.0}}};
  s.readings["A"] = RssiAsu(15);
  const auto mid = gp_locate(two, s).location;
  CHECK(mid.x == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(mid.y == doctest::Approx(25.0).epsilon(1e-12));

  ScanVector unknown;
  unknown.readings.emplace("Z", RssiAsu(3));
  CHECK_THROWS_AS(gp_locate(two, unknown), DataError);
}

TEST_CASE("gp_locate matches the probability-domain oracle and stays in the grid box") {
  testing::Rng rng(308);
  int compared = 0;
  for (int iter = 0; iter < 500; ++iter) {
    const auto grid = testing::random_gp_grid(rng, 9);
    const auto window = testing::random_gp_window(rng, grid);
    const auto got = gp_locate(grid, ScanWindow(window)).location;
    const auto want = oracle::gp_locate(grid, window);
    if (std::isnan(want.x)) continue;
    ++compared;
    CHECK(std::abs(got.x - want.x) <= 1e-9);
    CHECK(std::abs(got.y - want.y) <= 1e-9);
    const Rect box = bounding_box(grid.points);
    CHECK(got.x >= box.min_x - 1e-9);
    CHECK(got.x <= box.max_x + 1e-9);
    CHECK(got.y >= box.min_y - 1e-9);
    CHECK(got.y <= box.max_y + 1e-9);
  }
  CHECK(compared >= 250);
}

TEST_CASE("fit_tower_models is independent of thread scheduling") {
  testing::Rng rng(309);
  testing::MapShape shape;
  shape.max_cells = 10;
  shape.max_points = 10;
  const RadioMap map = testing::random_map(rng, shape);
  GpFitOptions opts;
  opts.max_points = 15;
  const auto a = fit_tower_models(map, opts);
  const auto b = fit_tower_models(map, opts);
  REQUIRE(a.size() == b.size());
  for (const auto& [id, m] : a) {
    CHECK(m.hyper() == b.at(id).hyper());
    CHECK(m.training().locations == b.at(id).training().locations);
    CHECK(tower_training_set(map, *map.tower_index(id)).values.size() >= 2);
  }
}
