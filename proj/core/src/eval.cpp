#include "cellsense/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <ostream>
#include <random>

#include "cellsense/error.hpp"
#include "cellsense/seeding.hpp"
#include "cellsense/trace_io.hpp"

namespace cellsense {

namespace {

std::vector<std::size_t> seeded_sample(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double elapsed_ms(std::chrono::steady_clock::time_point from) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - from).count();
}

}  // namespace

double percentile(std::span<const double> sorted, double fraction) {
  if (sorted.empty()) throw PreconditionError("percentile of an empty sample");
  const double pos = std::clamp(fraction, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double f = pos - static_cast<double>(lo);
  return sorted[lo] + f * (sorted[hi] - sorted[lo]);
}

EvalReport evaluate_estimator(std::string technique, const EstimateFn& estimate,
                              const Projection& frame, std::span<const ScanVector> test,
                              const EvalOptions& options) {
  if (test.empty()) throw DataError("evaluation needs a non-empty test trace");
  if (options.n_samples < 1) throw PreconditionError("n_samples must be at least 1");
  const int reps = std::max(1, options.timing_repetitions);

  std::vector<double> errors;
  double total_ms = 0.0;
  std::vector<double> times(static_cast<std::size_t>(reps));
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (!test[i].truth) {
      if (options.truth_required) {
        throw DataError("test scan at t=" + format_double(test[i].timestamp) +
                        " has no ground truth");
      }
      continue;
    }
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(options.n_samples), i + 1);
    const ScanWindow window(test.subspan(i + 1 - n, n));
    std::optional<LocationEstimate> est;
    for (int r = 0; r < reps; ++r) {
      const auto start = std::chrono::steady_clock::now();
      est = estimate(window);
      times[static_cast<std::size_t>(r)] = elapsed_ms(start);
    }
    std::sort(times.begin(), times.end());
    total_ms += times[times.size() / 2];
    errors.push_back(distance(est->location, frame.project(*test[i].truth)));
  }
  if (errors.empty()) throw DataError("no test scan carries ground truth");

  EvalReport report;
  report.technique = std::move(technique);
  report.params.n_samples = options.n_samples;
  report.estimates = errors.size();
  double sum = 0.0;
  for (double e : errors) sum += e;
  report.mean_error_m = sum / static_cast<double>(errors.size());
  report.mean_time_per_estimate_ms = total_ms / static_cast<double>(errors.size());
  std::sort(errors.begin(), errors.end());
  report.median_error_m = percentile(errors, 0.5);
  report.p95_error_m = percentile(errors, 0.95);
  report.error_cdf.reserve(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    report.error_cdf.emplace_back(errors[i],
                                  static_cast<double>(i + 1) / static_cast<double>(errors.size()));
  }
  return report;
}

EvalReport evaluate(const RadioMap& map, const PrecomputedGrid* gp,
                    std::span<const ScanVector> test, Technique technique,
                    const EstimatorParams& params, int timing_repetitions) {
  params.validate();
  if (map.cells.empty()) throw PreconditionError("radio map has no cells");
  EvalOptions options;
  options.n_samples = params.n_samples;
  options.timing_repetitions = timing_repetitions;
  const Projection frame = map.projection();
  const std::string name(to_string(technique));

  EvalReport report;
  switch (technique) {
    case Technique::cellsense: {
      const CellSenseEstimator est(map, params.smoothing);
      report = evaluate_estimator(name, [&](ScanWindow w) { return est.locate(w, params.k); },
                                  frame, test, options);
      break;
    }
    case Technique::hybrid: {
      const HybridEstimator est(map, params.smoothing);
      report = evaluate_estimator(name, [&](ScanWindow w) { return est.locate(w, params.k); },
                                  frame, test, options);
      break;
    }
    case Technique::deterministic: {
      const DeterministicEstimator est(map);
      report = evaluate_estimator(name, [&](ScanWindow w) { return est.locate(w, params.k); },
                                  frame, test, options);
      break;
    }
    case Technique::gp: {
      if (gp == nullptr) throw PreconditionError("GP evaluation needs a precomputed grid");
      report = evaluate_estimator(name, [&](ScanWindow w) { return gp_locate(*gp, w); }, frame,
                                  test, options);
      break;
    }
    case Technique::cellid: {
      report = evaluate_estimator(name, [&](ScanWindow w) { return cellid_locate(map, w.back()); },
                                  frame, test, options);
      break;
    }
  }
  report.params = params;
  report.grid_m = map.grid_length;
  return report;
}

std::set<TowerId> choose_towers_to_drop(const std::vector<TowerId>& towers, double drop_fraction,
                                        std::uint64_t seed) {
  if (!(drop_fraction >= 0.0 && drop_fraction < 1.0)) {
    throw PreconditionError("drop fraction must lie in [0, 1)");
  }
  const auto count = static_cast<std::size_t>(
      std::llround(drop_fraction * static_cast<double>(towers.size())));
  if (count >= towers.size() && !towers.empty()) {
    throw PreconditionError("dropping " + std::to_string(count) + " of " +
                            std::to_string(towers.size()) + " towers leaves none");
  }
  std::set<TowerId> dropped;
  for (auto i : seeded_sample(towers.size(), count, seed)) dropped.insert(towers[i]);
  return dropped;
}

RadioMap remove_towers(const RadioMap& map, const std::set<TowerId>& dropped) {
  if (dropped.empty()) return map;
  RadioMap out;
  out.origin = map.origin;
  out.grid_length = map.grid_length;
  out.anchor = map.anchor;
  out.has_points = map.has_points;
  std::vector<std::optional<TowerIndex>> remap(map.towers.size());
  for (std::size_t t = 0; t < map.towers.size(); ++t) {
    if (dropped.contains(map.towers[t])) continue;
    remap[t] = static_cast<TowerIndex>(out.towers.size());
    out.towers.push_back(map.towers[t]);
  }
  if (out.towers.empty()) throw PreconditionError("all towers dropped");
  for (const auto& [id, p] : map.tower_locations) {
    if (!dropped.contains(id)) out.tower_locations.emplace(id, p);
  }
  for (const auto& cell : map.cells) {
    GridCell c;
    c.index = cell.index;
    c.centroid = cell.centroid;
    c.point_count = cell.point_count;
    for (const auto& [tower, hist] : cell.histograms) {
      if (remap[tower]) c.histograms.emplace_back(*remap[tower], hist);
    }
    if (c.histograms.empty()) continue;
    bool lost_points = false;
    for (const auto& p : cell.points) {
      FingerprintPoint fp;
      fp.location = p.location;
      for (const auto& [tower, asu] : p.readings) {
        if (remap[tower]) fp.readings.emplace_back(*remap[tower], asu);
      }
      if (fp.readings.empty()) {
        lost_points = true;
        continue;
      }
      c.points.push_back(std::move(fp));
    }
    if (lost_points) {
      double sx = 0.0;
      double sy = 0.0;
      for (const auto& p : c.points) {
        sx += p.location.x;
        sy += p.location.y;
      }
      c.point_count = c.points.size();
      c.centroid = {sx / static_cast<double>(c.point_count), sy / static_cast<double>(c.point_count)};
    }
    out.cells.push_back(std::move(c));
  }
  return out;
}

RadioMap ablate_towers(const RadioMap& map, double drop_fraction, std::uint64_t seed) {
  return remove_towers(map, choose_towers_to_drop(map.towers, drop_fraction, seed));
}

std::vector<ScanVector> remove_towers(std::span<const ScanVector> scans,
                                      const std::set<TowerId>& dropped) {
  std::vector<ScanVector> out;
  out.reserve(scans.size());
  for (const auto& s : scans) {
    ScanVector kept{s.timestamp, {}, s.truth};
    for (const auto& [id, asu] : s.readings) {
      if (!dropped.contains(id)) kept.readings.emplace(id, asu);
    }
    if (!kept.readings.empty()) out.push_back(std::move(kept));
  }
  return out;
}

std::vector<ScanVector> thin_fingerprint(std::span<const ScanVector> scans, double keep_fraction,
                                         std::uint64_t seed) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw PreconditionError("keep fraction must lie in (0, 1]");
  }
  const auto count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(keep_fraction * static_cast<double>(scans.size()))));
  if (count >= scans.size()) return {scans.begin(), scans.end()};
  std::vector<ScanVector> out;
  out.reserve(count);
  for (auto i : seeded_sample(scans.size(), count, seed)) out.push_back(scans[i]);
  return out;
}

EvalReport run_configuration(const SweepSetup& setup, const SweepPoint& point,
                             std::size_t config_index) {
  const std::uint64_t seed = derive_seed(setup.seed, config_index);
  const auto training = thin_fingerprint(setup.training, point.keep_fraction, derive_seed(seed, 1));
  BuildOptions build;
  build.grid_length = point.grid_length;
  RadioMap map = build_radio_map(training, build);
  attach_tower_locations(map, setup.tower_locations);
  const auto dropped = choose_towers_to_drop(map.towers, point.drop_fraction, derive_seed(seed, 2));
  map = remove_towers(map, dropped);
  const auto test = remove_towers(setup.test, dropped);

  std::optional<PrecomputedGrid> grid;
  if (setup.technique == Technique::gp) {
    GpFitOptions fit = setup.gp_fit;
    fit.seed = derive_seed(seed, 3);
    const auto models = fit_tower_models(map, fit);
    const Rect bounds = training_bounds(map);
    grid = gp_build_grid(models, bounds, spacing_for_point_count(bounds, setup.gp_grid_points),
                         map.origin);
  }
  EvalReport report = evaluate(map, grid ? &*grid : nullptr, test, setup.technique, point.params,
                               setup.timing_repetitions);
  if (!point.label.empty()) report.technique += "[" + point.label + "]";
  return report;
}

std::vector<EvalReport> sweep_grid_length(const SweepSetup& setup, std::span<const double> values) {
  if (values.empty()) throw PreconditionError("sweep needs at least one value");
  std::vector<EvalReport> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.push_back(run_configuration(setup, {values[i], setup.params, 0.0, 1.0, {}}, i));
  }
  return out;
}

std::vector<EvalReport> sweep_ns(const SweepSetup& setup, std::span<const int> values) {
  if (values.empty()) throw PreconditionError("sweep needs at least one value");
  std::vector<EvalReport> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    EstimatorParams p = setup.params;
    p.n_samples = values[i];
    out.push_back(run_configuration(setup, {setup.grid_length, p, 0.0, 1.0, {}}, i));
  }
  return out;
}

std::vector<EvalReport> sweep_k(const SweepSetup& setup, std::span<const int> values) {
  if (values.empty()) throw PreconditionError("sweep needs at least one value");
  std::vector<EvalReport> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    EstimatorParams p = setup.params;
    p.k = values[i];
    out.push_back(run_configuration(setup, {setup.grid_length, p, 0.0, 1.0, {}}, i));
  }
  return out;
}

std::vector<EvalReport> sweep_towers(const SweepSetup& setup, std::span<const double> drop_fractions) {
  if (drop_fractions.empty()) throw PreconditionError("sweep needs at least one value");
  std::vector<EvalReport> out;
  for (std::size_t i = 0; i < drop_fractions.size(); ++i) {
    out.push_back(run_configuration(
        setup,
        {setup.grid_length, setup.params, drop_fractions[i], 1.0,
         "drop=" + format_double(drop_fractions[i])},
        i));
  }
  return out;
}

std::vector<EvalReport> sweep_density(const SweepSetup& setup, std::span<const double> keep_fractions) {
  if (keep_fractions.empty()) throw PreconditionError("sweep needs at least one value");
  std::vector<EvalReport> out;
  for (std::size_t i = 0; i < keep_fractions.size(); ++i) {
    out.push_back(run_configuration(
        setup,
        {setup.grid_length, setup.params, 0.0, keep_fractions[i],
         "keep=" + format_double(keep_fractions[i])},
        i));
  }
  return out;
}

void write_report_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << kReportHeader << '\n';
  for (const auto& r : reports) {
    out << r.technique << ',' << format_double(r.grid_m) << ',' << r.params.n_samples << ','
        << r.params.k << ',' << format_double(r.median_error_m) << ','
        << format_double(r.p95_error_m) << ',' << format_double(r.mean_time_per_estimate_ms)
        << '\n';
  }
}

void write_cdf_csv(std::ostream& out, const EvalReport& report) {
  out << kCdfHeader << '\n';
  for (const auto& [e, f] : report.error_cdf) {
    out << format_double(e) << ',' << format_double(f) << '\n';
  }
}

}  // namespace cellsense
