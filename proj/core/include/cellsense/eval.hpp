#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cellsense/estimators.hpp"
#include "cellsense/gp.hpp"
#include "cellsense/radio_map.hpp"

namespace cellsense {

struct EvalReport {
  std::string technique;
  EstimatorParams params;
  double grid_m = 0.0;
  std::size_t estimates = 0;
  double median_error_m = 0.0;
  double p95_error_m = 0.0;
  double mean_error_m = 0.0;
  double mean_time_per_estimate_ms = 0.0;
  // Sorted errors with the fraction of estimates at or below each.
  std::vector<std::pair<double, double>> error_cdf;
};

// Linear interpolation between order statistics; `sorted` must be ascending.
double percentile(std::span<const double> sorted, double fraction);

using EstimateFn = std::function<LocationEstimate(ScanWindow)>;

struct EvalOptions {
  int n_samples = 1;
  int timing_repetitions = 3;   // each estimate is timed this often; the median counts
  bool truth_required = true;   // otherwise scans without truth are skipped
};

// Slides a window of up to n_samples consecutive scans (stride 1) over the
// test trace and scores each estimate against the truth of the window's last
// scan, in the planar frame of `frame`.
EvalReport evaluate_estimator(std::string technique, const EstimateFn& estimate,
                              const Projection& frame, std::span<const ScanVector> test,
                              const EvalOptions& options);

// Evaluates one of the built-in techniques. `gp` is required for
// Technique::gp and ignored otherwise.
EvalReport evaluate(const RadioMap& map, const PrecomputedGrid* gp,
                    std::span<const ScanVector> test, Technique technique,
                    const EstimatorParams& params, int timing_repetitions = 3);

// Seeded random subset of round(fraction * q) tower ids.
std::set<TowerId> choose_towers_to_drop(const std::vector<TowerId>& towers, double drop_fraction,
                                        std::uint64_t seed);

// Removes the chosen towers from every histogram, point and registry entry.
// Points left without readings and cells left without towers disappear.
RadioMap ablate_towers(const RadioMap& map, double drop_fraction, std::uint64_t seed);
RadioMap remove_towers(const RadioMap& map, const std::set<TowerId>& dropped);
std::vector<ScanVector> remove_towers(std::span<const ScanVector> scans,
                                      const std::set<TowerId>& dropped);

// Seeded uniform subsample of round(keep_fraction * n) scans, order kept.
std::vector<ScanVector> thin_fingerprint(std::span<const ScanVector> scans, double keep_fraction,
                                         std::uint64_t seed);

struct SweepSetup {
  std::vector<ScanVector> training;
  std::vector<ScanVector> test;
  std::map<TowerId, GeoPoint> tower_locations;
  Technique technique = Technique::cellsense;
  EstimatorParams params;
  double grid_length = 70.0;
  std::uint64_t seed = 1;
  int timing_repetitions = 3;
  std::size_t gp_grid_points = 1019;
  GpFitOptions gp_fit;
};

// One configuration: thin the training set, build the map, drop towers, then
// evaluate. Seeded randomness is derived from (setup.seed, config_index).
struct SweepPoint {
  double grid_length = 70.0;
  EstimatorParams params;
  double drop_fraction = 0.0;
  double keep_fraction = 1.0;
  std::string label;
};
EvalReport run_configuration(const SweepSetup& setup, const SweepPoint& point,
                             std::size_t config_index);

std::vector<EvalReport> sweep_grid_length(const SweepSetup& setup, std::span<const double> values);
std::vector<EvalReport> sweep_ns(const SweepSetup& setup, std::span<const int> values);
std::vector<EvalReport> sweep_k(const SweepSetup& setup, std::span<const int> values);
std::vector<EvalReport> sweep_towers(const SweepSetup& setup, std::span<const double> drop_fractions);
std::vector<EvalReport> sweep_density(const SweepSetup& setup, std::span<const double> keep_fractions);

inline constexpr const char* kReportHeader = "technique,grid_m,ns,k,median_err_m,p95_err_m,mean_ms";
inline constexpr const char* kCdfHeader = "error_m,cum_frac";

void write_report_csv(std::ostream& out, std::span<const EvalReport> reports);
void write_cdf_csv(std::ostream& out, const EvalReport& report);

}  // namespace cellsense
