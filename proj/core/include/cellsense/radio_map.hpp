#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "cellsense/geo.hpp"

namespace cellsense {

// Position of a tower id in RadioMap::towers.
using TowerIndex = std::uint32_t;

// Per-tower readings of one fingerprint point, sorted by tower index.
using Readings = std::vector<std::pair<TowerIndex, RssiAsu>>;

struct SmoothingParams {
  double alpha = 0.5;     // Laplace pseudo-count added to each of the 32 ASU bins
  double floor = 1.0e-4;  // likelihood of a tower the cell has never heard
};

struct TowerHistogram {
  std::array<std::uint32_t, RssiAsu::kLevels> counts{};
  std::uint32_t total = 0;

  void add(RssiAsu asu) {
    ++counts[static_cast<std::size_t>(asu.value())];
    ++total;
  }
  double mean() const;
  bool operator==(const TowerHistogram&) const = default;
};

struct FingerprintPoint {
  PlanarPoint location;
  Readings readings;

  bool operator==(const FingerprintPoint&) const = default;
};

struct CellIndex {
  std::int32_t row = 0;
  std::int32_t col = 0;

  auto operator<=>(const CellIndex&) const = default;
};

struct GridCell {
  CellIndex index;
  PlanarPoint centroid;     // center of mass of the member points
  std::size_t point_count = 0;
  std::vector<FingerprintPoint> points;  // empty once stripped
  std::vector<std::pair<TowerIndex, TowerHistogram>> histograms;  // sorted by tower

  const TowerHistogram* histogram(TowerIndex tower) const;
  bool operator==(const GridCell&) const = default;
};

// Gridded probabilistic fingerprint. All planar coordinates are in the
// equirectangular frame about `origin`; cell (r, c) covers
// [anchor.x + c*G, anchor.x + (c+1)*G) x [anchor.y + r*G, anchor.y + (r+1)*G).
struct RadioMap {
  GeoPoint origin;
  double grid_length = 0.0;
  PlanarPoint anchor;
  std::vector<TowerId> towers;          // sorted, unique
  std::vector<GridCell> cells;          // sorted by index, non-empty cells only
  std::map<TowerId, PlanarPoint> tower_locations;
  bool has_points = true;

  std::optional<TowerIndex> tower_index(std::string_view id) const;
  const GridCell* find_cell(CellIndex index) const;
  CellIndex cell_of(const PlanarPoint& p) const;
  Projection projection() const { return Projection(origin); }
  std::size_t point_count() const;

  bool operator==(const RadioMap&) const = default;
};

struct BuildOptions {
  double grid_length = 70.0;
  std::optional<GeoPoint> origin;  // defaults to the centroid of the training truth
  bool keep_points = true;
};

// Offline phase: one fingerprint point per scan, bucketed into square cells
// with per-tower ASU histograms. Every scan must carry ground truth.
RadioMap build_radio_map(std::span<const ScanVector> scans, const BuildOptions& options);
RadioMap build_radio_map(std::span<const ScanVector> scans, double grid_length);

// P(asu | cell) for one tower: Laplace-smoothed histogram frequency, or the
// floor probability when the cell never heard the tower.
double cell_likelihood(const GridCell& cell, std::optional<TowerIndex> tower, RssiAsu asu,
                       const SmoothingParams& smoothing);
double cell_likelihood(const RadioMap& map, const GridCell& cell, std::string_view tower,
                       RssiAsu asu, const SmoothingParams& smoothing);

// Drops raw fingerprint points; histograms and centroids are kept.
RadioMap strip_points(RadioMap map);

// Projects known tower positions into the map frame (needed for cell-ID).
void attach_tower_locations(RadioMap& map, const std::map<TowerId, GeoPoint>& locations);

// Throws DataError when a structural invariant does not hold.
void validate(const RadioMap& map);

}  // namespace cellsense
