#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "cellsense/estimators.hpp"
#include "cellsense/geo.hpp"

namespace cellsense {

struct PathLossParams {
  double p0_db = 30.0;                 // loss at the reference distance
  double d0_m = 10.0;                  // reference distance
  double exponent = 3.0;               // path-loss exponent n, in [2, 5]
  double shadow_sigma_db = 6.0;        // static shadowing standard deviation
  double shadow_grid_spacing_m = 50.0; // shadowing lattice spacing
  double noise_sigma_db = 2.0;         // per-reading measurement noise

  void validate() const;
};

struct SynthTower {
  TowerId id;
  PlanarPoint location;
  double tx_power_dbm = 0.0;
};

// Static synthetic RF environment. Shadowing comes from a per-tower seeded
// lattice with bilinear interpolation, so every location always sees the same
// mean field.
class SynthWorld {
 public:
  SynthWorld(Rect bounds, std::vector<SynthTower> towers, PathLossParams pathloss,
             std::uint64_t seed, GeoPoint geo_origin = kDefaultGeoOrigin);

  static constexpr GeoPoint kDefaultGeoOrigin{30.0, 31.0};

  const Rect& bounds() const { return bounds_; }
  const std::vector<SynthTower>& towers() const { return towers_; }
  const PathLossParams& pathloss() const { return pathloss_; }
  std::uint64_t seed() const { return seed_; }
  Projection projection() const { return Projection(geo_origin_); }

  double path_loss_db(double distance_m) const;
  double shadowing_db(std::size_t tower, const PlanarPoint& p) const;
  // Mean received power (no measurement noise).
  double received_dbm(std::size_t tower, const PlanarPoint& p) const;

  // Copy with one tower's transmit power changed; the shadowing field is kept.
  SynthWorld with_tx_power(std::size_t tower, double tx_power_dbm) const;

  std::map<TowerId, GeoPoint> tower_locations() const;

 private:
  Rect bounds_;
  std::vector<SynthTower> towers_;
  PathLossParams pathloss_;
  std::uint64_t seed_;
  GeoPoint geo_origin_;
  PlanarPoint lattice_origin_;
  std::size_t lattice_nx_ = 0;
  std::size_t lattice_ny_ = 0;
  std::vector<std::vector<double>> shadow_;  // per tower, row-major ny x nx
};

// I.i.d. Normal(0, sigma^2) dB perturbation per reading.
class MeasurementNoise {
 public:
  MeasurementNoise(double sigma_db, std::uint64_t seed) : sigma_(sigma_db), rng_(seed) {}
  double draw();

 private:
  double sigma_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline constexpr double kSensitivityDbm = -113.0;

// Scan at p: towers at or above the sensitivity floor, strongest 7, quantized
// to ASU. With `noise`, one draw is consumed per tower (audible or not) in
// tower order. Returns nullopt when nothing is audible.
std::optional<ScanVector> try_scan_at(const SynthWorld& world, const PlanarPoint& p, double t,
                                      MeasurementNoise* noise = nullptr);
// Same, but throws DataError when nothing is audible.
ScanVector scan_at(const SynthWorld& world, const PlanarPoint& p, double t,
                   MeasurementNoise* noise = nullptr);

struct Route {
  std::vector<PlanarPoint> waypoints;
  double speed = 10.0;  // m/s

  void validate() const;
  double length() const;
  PlanarPoint at(double arc_length) const;
};

// One scan per simulated second while moving along the route; the final scan
// is taken at the last waypoint. Silent positions are skipped.
std::vector<ScanVector> generate_trace(const SynthWorld& world, const Route& route,
                                       std::uint64_t trace_seed, double start_time = 0.0);

struct PresetConfig {
  Testbed testbed = Testbed::rural;
  Rect bounds;
  std::size_t tower_count = 0;
  double tower_margin = 0.0;        // towers are placed over bounds grown by this much
  double tx_power_dbm = 0.0;
  double tx_power_spread_db = 0.0;  // per-tower Normal(0, spread^2) offset
  PathLossParams pathloss;
  double speed = 10.0;
  double street_spacing = 200.0;
  std::size_t training_scans = 0;
  std::size_t test_scans = 0;
};

PresetConfig preset_config(Testbed testbed);

struct Preset {
  PresetConfig config;
  SynthWorld world;
  Route training_route;  // serpentine over every street of the lattice
  Route test_route;      // seeded random walk on the same streets
};

Preset make_preset(const PresetConfig& config, std::uint64_t seed);
Preset make_preset(std::string_view name, std::uint64_t seed);

struct Dataset {
  std::vector<ScanVector> training;
  std::vector<ScanVector> test;
  std::map<TowerId, GeoPoint> tower_locations;
};

// Independent training and test traces (separate noise seeds) plus the
// tower registry.
Dataset generate_dataset(const Preset& preset, std::uint64_t seed);

}  // namespace cellsense
