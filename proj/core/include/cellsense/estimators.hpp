#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cellsense/estimate.hpp"
#include "cellsense/radio_map.hpp"

namespace cellsense {

enum class Technique { cellsense, hybrid, deterministic, gp, cellid };
enum class Testbed { rural, urban };

std::string_view to_string(Technique t);
Technique parse_technique(std::string_view name);  // throws PreconditionError
std::string_view to_string(Testbed t);
Testbed parse_testbed(std::string_view name);

struct EstimatorParams {
  int n_samples = 4;   // successive scans per estimate (N_s)
  int k = 2;           // cells (or neighbours) averaged into the estimate
  SmoothingParams smoothing;

  void validate() const;
  bool operator==(const EstimatorParams&) const = default;
};

// Best-accuracy settings per technique and testbed. Hybrid and cell-ID use a
// single scan per estimate.
EstimatorParams default_params(Technique technique, Testbed testbed);
double default_grid_length(Technique technique, Testbed testbed);

// Sparse signal vector sorted by tower index. Indices >= the map's tower
// count stand for towers the map has never heard.
using SignalVector = std::vector<std::pair<TowerIndex, double>>;

// Euclidean distance in ASU space over the union of towers; a tower missing
// on one side counts as ASU 0.
double rssi_distance(const SignalVector& a, const SignalVector& b);
double rssi_distance(const std::map<TowerId, double>& a, const std::map<TowerId, double>& b);
double rssi_distance(const std::map<TowerId, RssiAsu>& a, const std::map<TowerId, RssiAsu>& b);

// Translates tower ids to map indices. Unknown towers get indices past the
// registry, assigned in id order.
SignalVector to_signal(const RadioMap& map, const std::map<TowerId, double>& readings);
SignalVector to_signal(const RadioMap& map, const std::map<TowerId, RssiAsu>& readings);
SignalVector to_signal(const Readings& readings);

// Probabilistic estimator over a fixed map. Per-cell log likelihood tables
// are built once at construction; the map must outlive the estimator.
class CellSenseEstimator {
 public:
  CellSenseEstimator(const RadioMap& map, SmoothingParams smoothing);

  // Log P(window | cell) for every cell, aligned with map().cells.
  std::vector<double> log_posterior(ScanWindow window) const;
  // Posterior-weighted centroid of the k most probable cells.
  LocationEstimate locate(ScanWindow window, int k) const;

  const RadioMap& map() const { return *map_; }

 private:
  struct Observation {
    std::int32_t tower;  // -1 when the map has never heard the tower
    std::int32_t asu;
  };
  std::vector<Observation> observations(ScanWindow window) const;
  std::vector<double> log_posterior(std::span<const Observation> obs) const;

  friend class HybridEstimator;

  const RadioMap* map_;
  SmoothingParams smoothing_;
  std::size_t tower_count_;
  // Tower-major layout so one observation scans memory sequentially:
  // slots_[tower * cells + cell] is the cell's position among the cells that
  // heard the tower (-1 if none), and that tower's block of log_table_ holds
  // log P(asu | cell) at offsets_[tower] + asu * heard_[tower] + position.
  std::vector<std::int32_t> slots_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> heard_;
  std::vector<double> log_table_;
  double log_floor_;
};

// Two-phase estimator: single-scan MAP cell, then nearest fingerprint points
// inside that cell.
class HybridEstimator {
 public:
  HybridEstimator(const RadioMap& map, SmoothingParams smoothing);

  LocationEstimate locate(ScanWindow window, int k_refine) const;

 private:
  CellSenseEstimator coarse_;
  std::vector<std::vector<SignalVector>> point_signals_;  // per cell, per point
};

// KNN over per-cell mean signal vectors with inverse-distance weights.
class DeterministicEstimator {
 public:
  explicit DeterministicEstimator(const RadioMap& map);

  LocationEstimate locate(ScanWindow window, int k) const;

 private:
  const RadioMap* map_;
  std::vector<SignalVector> cell_means_;
};

inline constexpr double kInverseDistanceEpsilon = 1.0e-6;

// Per-cell log posterior (uniform prior) over the most recent n_samples scans,
// aligned with map.cells.
std::vector<double> cell_log_posterior(const RadioMap& map, ScanWindow window,
                                       const EstimatorParams& params);

LocationEstimate cellsense_locate(const RadioMap& map, ScanWindow window,
                                  const EstimatorParams& params);
// Uses only the first scan of the window.
LocationEstimate hybrid_locate(const RadioMap& map, ScanWindow window, int k_refine,
                               const SmoothingParams& smoothing = {});
LocationEstimate deterministic_locate(const RadioMap& map, ScanWindow window,
                                      const EstimatorParams& params);
// Location of the strongest tower in the scan; ties go to the smallest id.
LocationEstimate cellid_locate(const RadioMap& map, const ScanVector& scan);

}  // namespace cellsense
