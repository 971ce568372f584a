#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cellsense/geo.hpp"
#include "cellsense/radio_map.hpp"

namespace cellsense {

struct LocationEstimate {
  PlanarPoint location;
  // Unnormalized log posterior of the winning cell (or point), when the
  // technique has one.
  std::optional<double> log_score;
  // Cells that were averaged into the location and their weights.
  std::vector<std::pair<CellIndex, double>> contributing_cells;

  bool operator==(const LocationEstimate&) const = default;
};

// Non-empty run of scans with strictly increasing timestamps. Does not own
// the scans.
class ScanWindow {
 public:
  explicit ScanWindow(std::span<const ScanVector> scans);
  ScanWindow(const ScanVector& scan) : ScanWindow(std::span<const ScanVector>(&scan, 1)) {}

  std::span<const ScanVector> scans() const { return scans_; }
  std::size_t size() const { return scans_.size(); }
  const ScanVector& front() const { return scans_.front(); }
  const ScanVector& back() const { return scans_.back(); }
  auto begin() const { return scans_.begin(); }
  auto end() const { return scans_.end(); }

  // The most recent n scans (all of them when n >= size()).
  ScanWindow last(std::size_t n) const;
  ScanWindow first(std::size_t n) const;

 private:
  std::span<const ScanVector> scans_;
};

}  // namespace cellsense
