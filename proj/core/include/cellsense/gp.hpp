#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "cellsense/estimate.hpp"
#include "cellsense/geo.hpp"
#include "cellsense/radio_map.hpp"

namespace cellsense {

struct GpHyperparams {
  double sigma_f2 = 100.0;     // signal variance, ASU^2
  double sigma_n2 = 4.0;       // observation noise variance, ASU^2
  double length_scale = 200.0; // meters

  bool valid() const;
  bool operator==(const GpHyperparams&) const = default;
};

// Squared-exponential kernel sigma_f2 * exp(-|p - q|^2 / (2 l^2)).
double kernel(const PlanarPoint& p, const PlanarPoint& q, const GpHyperparams& hyper);

struct HyperparameterGrid {
  std::vector<double> length_scale{50.0, 100.0, 200.0, 400.0, 800.0};
  std::vector<double> sigma_f2{25.0, 100.0, 400.0};
  std::vector<double> sigma_n2{1.0, 4.0, 16.0};

  std::vector<GpHyperparams> candidates() const;
};

struct GpTrainingSet {
  std::vector<PlanarPoint> locations;
  std::vector<double> values;  // ASU
};

struct GpFitOptions {
  HyperparameterGrid grid;
  std::size_t max_points = 500;  // larger sets are subsampled uniformly
  std::uint64_t seed = 1;
};

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;  // latent posterior variance, excludes sigma_n2
};

// Log marginal likelihood of the mean-centred values under a zero-mean GP.
// Returns -infinity when K + sigma_n2 I cannot be factorized even with jitter.
double log_marginal_likelihood(const GpTrainingSet& data, const GpHyperparams& hyper);

struct HyperparameterScore {
  GpHyperparams hyper;
  double log_marginal_likelihood = 0.0;
};

// Evaluates every grid candidate in candidates() order.
std::vector<HyperparameterScore> score_hyperparameters(const GpTrainingSet& data,
                                                       const HyperparameterGrid& grid);

// Single-tower GP regression from location to ASU. Values are centred on
// their training mean, which is added back at prediction.
class GpTowerModel {
 public:
  // Grid search over the log marginal likelihood.
  static GpTowerModel fit(GpTrainingSet data, const GpFitOptions& options = {});
  static GpTowerModel fit(GpTrainingSet data, const GpHyperparams& hyper);

  GpPrediction predict(const PlanarPoint& p) const;
  std::vector<GpPrediction> predict(std::span<const PlanarPoint> points) const;

  const GpHyperparams& hyper() const { return hyper_; }
  double log_marginal_likelihood() const { return lml_; }
  double mean_offset() const { return offset_; }
  const GpTrainingSet& training() const { return data_; }
  double jitter() const { return jitter_; }

 private:
  GpTowerModel() = default;
  void factorize();

  GpTrainingSet data_;
  GpHyperparams hyper_;
  double offset_ = 0.0;
  double jitter_ = 0.0;
  double lml_ = 0.0;
  std::vector<double> cholesky_;  // lower factor of K + (sigma_n2 + jitter) I, column-major
  std::vector<double> alpha_;     // (K + sigma_n2 I)^-1 (y - offset)
};

// Training data for one tower: every fingerprint point that heard it.
GpTrainingSet tower_training_set(const RadioMap& map, TowerIndex tower);

// Fits one model per tower heard at two or more points. Towers are fitted
// concurrently; each tower's subsampling seed depends only on (seed, tower).
std::map<TowerId, GpTowerModel> fit_tower_models(const RadioMap& map,
                                                 const GpFitOptions& options = {});

struct GpTowerField {
  TowerId id;
  double noise_variance = 0.0;
  std::vector<double> mean;      // per grid point
  std::vector<double> variance;  // per grid point, latent

  bool operator==(const GpTowerField&) const = default;
};

// Dense lattice of precomputed posterior means/variances, one field per tower.
struct PrecomputedGrid {
  GeoPoint origin;
  std::vector<PlanarPoint> points;
  std::vector<GpTowerField> towers;  // sorted by id

  const GpTowerField* find(std::string_view id) const;
  bool operator==(const PrecomputedGrid&) const = default;
};

// Regular lattice from the lower-left corner at the given spacing, covering
// the rectangle inclusively.
std::vector<PlanarPoint> lattice(const Rect& bounds, double spacing);
// Spacing whose lattice over `bounds` has roughly `target` points.
double spacing_for_point_count(const Rect& bounds, std::size_t target);
// Bounding box of the map's fingerprint locations (cell centroids if stripped).
Rect training_bounds(const RadioMap& map);

PrecomputedGrid gp_build_grid(const std::map<TowerId, GpTowerModel>& models, const Rect& bounds,
                              double spacing, const GeoPoint& origin = {});

// Likelihood-weighted average of every grid point. Each observed reading
// contributes log N(asu; mean, variance + noise_variance); unmodelled towers
// are skipped.
LocationEstimate gp_locate(const PrecomputedGrid& grid, ScanWindow window);

}  // namespace cellsense
