#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cellsense {

using TowerId = std::string;

// GSM "Active Set Update" signal strength unit, 0..31.
class RssiAsu {
 public:
  static constexpr int kMin = 0;
  static constexpr int kMax = 31;
  static constexpr int kLevels = kMax - kMin + 1;

  constexpr RssiAsu() = default;
  constexpr explicit RssiAsu(int value) : value_(value) {
    if (value < kMin || value > kMax) {
      throw std::domain_error("ASU value out of range [0, 31]: " + std::to_string(value));
    }
  }

  constexpr int value() const { return value_; }
  constexpr auto operator<=>(const RssiAsu&) const = default;

 private:
  int value_ = 0;
};

double asu_to_dbm(RssiAsu asu);
double asu_to_dbm(int asu);  // throws std::domain_error outside [0, 31]
RssiAsu dbm_to_asu(double dbm);

struct GeoPoint {
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees

  bool valid() const;
  bool operator==(const GeoPoint&) const = default;
};

// Meters east (x) and north (y) of a projection origin.
struct PlanarPoint {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const PlanarPoint&) const = default;
};

double distance(const PlanarPoint& a, const PlanarPoint& b);

// Axis-aligned rectangle in planar meters.
struct Rect {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  double area() const { return width() * height(); }
  bool contains(const PlanarPoint& p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
  bool operator==(const Rect&) const = default;
};

// Smallest rectangle holding every point; points must be non-empty.
Rect bounding_box(std::span<const PlanarPoint> points);

inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kProjectionRangeM = 10'000.0;

// Local equirectangular projection about a fixed origin. Accurate to well
// under 0.1 m within kProjectionRangeM of the origin.
class Projection {
 public:
  explicit Projection(GeoPoint origin);

  const GeoPoint& origin() const { return origin_; }
  PlanarPoint project(const GeoPoint& p) const;
  GeoPoint unproject(const PlanarPoint& p) const;

  // Warning text when p lies outside the accurate range, nullopt otherwise.
  std::optional<std::string> range_warning(const GeoPoint& p) const;

 private:
  GeoPoint origin_;
  double meters_per_rad_lon_;
};

PlanarPoint project(const GeoPoint& origin, const GeoPoint& p);
GeoPoint unproject(const GeoPoint& origin, const PlanarPoint& p);

// Mean latitude/longitude of a non-empty point set.
GeoPoint centroid(std::span<const GeoPoint> points);

struct ScanRow {
  double timestamp = 0.0;  // seconds
  TowerId tower_id;
  RssiAsu asu;
  std::optional<GeoPoint> truth;
};

inline constexpr std::size_t kMaxReadingsPerScan = 7;

// All tower readings taken at one instant: the serving cell plus up to six
// neighbours.
struct ScanVector {
  double timestamp = 0.0;
  std::map<TowerId, RssiAsu> readings;
  std::optional<GeoPoint> truth;

  bool operator==(const ScanVector&) const = default;
};

// Throws DataError if the vector is empty, oversized, or has an empty id.
void validate(const ScanVector& scan);

// Merges rows sharing a timestamp into one scan. Rows must be sorted by
// timestamp. A tower repeated within one timestamp keeps its last reading.
std::vector<ScanVector> group_rows_into_scans(std::span<const ScanRow> rows);

// Inverse of group_rows_into_scans; rows come out in tower-id order per scan.
std::vector<ScanRow> flatten_scans(std::span<const ScanVector> scans);

}  // namespace cellsense
