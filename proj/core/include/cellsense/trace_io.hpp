#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cellsense/geo.hpp"

namespace cellsense {

// Trace CSV: header "timestamp,lat,lon,tower_id,asu", one row per tower per
// scan. Empty lat/lon means no ground truth.
inline constexpr const char* kTraceHeader = "timestamp,lat,lon,tower_id,asu";
// Tower registry CSV used by the cell-ID baseline.
inline constexpr const char* kTowerHeader = "tower_id,lat,lon";

std::vector<ScanRow> read_trace_rows(std::istream& in, const std::string& source = "<stream>");
std::vector<ScanVector> read_trace(std::istream& in, const std::string& source = "<stream>");
std::vector<ScanVector> read_trace(const std::filesystem::path& path);

void write_trace(std::ostream& out, std::span<const ScanVector> scans);
void write_trace(const std::filesystem::path& path, std::span<const ScanVector> scans);

std::map<TowerId, GeoPoint> read_tower_locations(std::istream& in,
                                                 const std::string& source = "<stream>");
std::map<TowerId, GeoPoint> read_tower_locations(const std::filesystem::path& path);

void write_tower_locations(std::ostream& out, const std::map<TowerId, GeoPoint>& towers);
void write_tower_locations(const std::filesystem::path& path,
                           const std::map<TowerId, GeoPoint>& towers);

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

}  // namespace cellsense
