#include "cellsense/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "cellsense/error.hpp"

namespace cellsense {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

std::string format_timestamp(double t) {
  std::ostringstream os;
  os.precision(15);
  os << t;
  return os.str();
}

}  // namespace

double asu_to_dbm(RssiAsu asu) { return 2.0 * asu.value() - 113.0; }

double asu_to_dbm(int asu) { return asu_to_dbm(RssiAsu(asu)); }

RssiAsu dbm_to_asu(double dbm) {
  if (std::isnan(dbm)) {
    return RssiAsu(RssiAsu::kMin);
  }
  // std::round rounds halves away from zero.
  const double level = std::round((dbm + 113.0) / 2.0);
  const double clamped = std::clamp(level, double(RssiAsu::kMin), double(RssiAsu::kMax));
  return RssiAsu(static_cast<int>(clamped));
}

bool GeoPoint::valid() const {
  return std::isfinite(lat) && std::isfinite(lon) && std::abs(lat) <= 90.0 &&
         std::abs(lon) <= 180.0;
}

double distance(const PlanarPoint& a, const PlanarPoint& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

Rect bounding_box(std::span<const PlanarPoint> points) {
  if (points.empty()) {
    throw PreconditionError("bounding box of an empty point set");
  }
  Rect r{points[0].x, points[0].y, points[0].x, points[0].y};
  for (const auto& p : points) {
    r.min_x = std::min(r.min_x, p.x);
    r.min_y = std::min(r.min_y, p.y);
    r.max_x = std::max(r.max_x, p.x);
    r.max_y = std::max(r.max_y, p.y);
  }
  return r;
}

Projection::Projection(GeoPoint origin)
    : origin_(origin), meters_per_rad_lon_(kEarthRadiusM * std::cos(origin.lat * kDegToRad)) {
  if (!origin.valid()) {
    throw PreconditionError("projection origin is not a valid geographic point");
  }
}

PlanarPoint Projection::project(const GeoPoint& p) const {
  return {meters_per_rad_lon_ * (p.lon - origin_.lon) * kDegToRad,
          kEarthRadiusM * (p.lat - origin_.lat) * kDegToRad};
}

GeoPoint Projection::unproject(const PlanarPoint& p) const {
  return {origin_.lat + (p.y / kEarthRadiusM) * kRadToDeg,
          origin_.lon + (p.x / meters_per_rad_lon_) * kRadToDeg};
}

std::optional<std::string> Projection::range_warning(const GeoPoint& p) const {
  const PlanarPoint q = project(p);
  const double d = std::hypot(q.x, q.y);
  if (d <= kProjectionRangeM) {
    return std::nullopt;
  }
  std::ostringstream os;
  os << "point (" << p.lat << ", " << p.lon << ") is " << static_cast<long long>(d)
     << " m from the projection origin; planar distances lose accuracy beyond "
     << static_cast<long long>(kProjectionRangeM) << " m";
  return os.str();
}

PlanarPoint project(const GeoPoint& origin, const GeoPoint& p) {
  return Projection(origin).project(p);
}

GeoPoint unproject(const GeoPoint& origin, const PlanarPoint& p) {
  return Projection(origin).unproject(p);
}

GeoPoint centroid(std::span<const GeoPoint> points) {
  if (points.empty()) {
    throw PreconditionError("centroid of an empty point set");
  }
  double lat = 0.0;
  double lon = 0.0;
  for (const auto& p : points) {
    lat += p.lat;
    lon += p.lon;
  }
  const auto n = static_cast<double>(points.size());
  return {lat / n, lon / n};
}

void validate(const ScanVector& scan) {
  if (scan.readings.empty()) {
    throw DataError("scan at t=" + format_timestamp(scan.timestamp) + " has no readings");
  }
  if (scan.readings.size() > kMaxReadingsPerScan) {
    throw DataError("scan at t=" + format_timestamp(scan.timestamp) + " has " +
                    std::to_string(scan.readings.size()) + " readings; at most 7 allowed");
  }
  for (const auto& [id, asu] : scan.readings) {
    if (id.empty()) {
      throw DataError("scan at t=" + format_timestamp(scan.timestamp) + " has an empty tower id");
    }
  }
  if (scan.truth && !scan.truth->valid()) {
    throw DataError("scan at t=" + format_timestamp(scan.timestamp) +
                    " has an out-of-range ground truth");
  }
}

std::vector<ScanVector> group_rows_into_scans(std::span<const ScanRow> rows) {
  std::vector<ScanVector> scans;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ScanRow& row = rows[i];
    if (row.tower_id.empty()) {
      throw DataError("row " + std::to_string(i) + " has an empty tower id");
    }
    if (!scans.empty() && row.timestamp < scans.back().timestamp) {
      throw PreconditionError("rows are not sorted by timestamp (row " + std::to_string(i) +
                              ", t=" + format_timestamp(row.timestamp) + ")");
    }
    if (scans.empty() || row.timestamp != scans.back().timestamp) {
      scans.push_back(ScanVector{row.timestamp, {}, row.truth});
    }
    ScanVector& scan = scans.back();
    scan.readings.insert_or_assign(row.tower_id, row.asu);
    if (!scan.truth && row.truth) {
      scan.truth = row.truth;
    }
  }
  for (const auto& scan : scans) {
    validate(scan);
  }
  return scans;
}

std::vector<ScanRow> flatten_scans(std::span<const ScanVector> scans) {
  std::vector<ScanRow> rows;
  for (const auto& scan : scans) {
    for (const auto& [id, asu] : scan.readings) {
      rows.push_back(ScanRow{scan.timestamp, id, asu, scan.truth});
    }
  }
  return rows;
}

}  // namespace cellsense
