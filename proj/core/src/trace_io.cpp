#include "cellsense/trace_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>
#include <system_error>

#include "cellsense/error.hpp"

namespace cellsense {

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string where(const std::string& source, std::size_t line_no) {
  return source + ":" + std::to_string(line_no);
}

double parse_double(std::string_view text, const std::string& field, const std::string& at) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw DataError(at + ": cannot parse " + field + " '" + std::string(text) + "'");
  }
  return v;
}

int parse_int(std::string_view text, const std::string& field, const std::string& at) {
  int v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw DataError(at + ": cannot parse " + field + " '" + std::string(text) + "'");
  }
  return v;
}

std::optional<GeoPoint> parse_geo(std::string_view lat, std::string_view lon, const std::string& at) {
  if (lat.empty() && lon.empty()) {
    return std::nullopt;
  }
  if (lat.empty() || lon.empty()) {
    throw DataError(at + ": ground truth needs both lat and lon");
  }
  GeoPoint p{parse_double(lat, "lat", at), parse_double(lon, "lon", at)};
  if (!p.valid()) {
    throw DataError(at + ": lat/lon out of range");
  }
  return p;
}

void expect_header(std::istream& in, const char* header, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError(source + ": empty file, expected header '" + header + "'");
  }
  if (trim(line) != header) {
    throw DataError(source + ": bad header '" + std::string(trim(line)) + "', expected '" +
                    header + "'");
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<ScanRow> read_trace_rows(std::istream& in, const std::string& source) {
  expect_header(in, kTraceHeader, source);
  std::vector<ScanRow> rows;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    const std::string at = where(source, line_no);
    const auto fields = split_csv(line);
    if (fields.size() != 5) {
      throw DataError(at + ": expected 5 fields, found " + std::to_string(fields.size()));
    }
    ScanRow row;
    row.timestamp = parse_double(trim(fields[0]), "timestamp", at);
    row.truth = parse_geo(trim(fields[1]), trim(fields[2]), at);
    row.tower_id = std::string(trim(fields[3]));
    if (row.tower_id.empty()) {
      throw DataError(at + ": empty tower_id");
    }
    const int asu = parse_int(trim(fields[4]), "asu", at);
    if (asu < RssiAsu::kMin || asu > RssiAsu::kMax) {
      throw DataError(at + ": asu " + std::to_string(asu) + " outside [0, 31]");
    }
    row.asu = RssiAsu(asu);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ScanVector> read_trace(std::istream& in, const std::string& source) {
  const auto rows = read_trace_rows(in, source);
  try {
    return group_rows_into_scans(rows);
  } catch (const PreconditionError& e) {
    throw DataError(source + ": " + e.what());
  }
}

std::vector<ScanVector> read_trace(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_trace(in, path.string());
}

void write_trace(std::ostream& out, std::span<const ScanVector> scans) {
  out << kTraceHeader << '\n';
  for (const auto& row : flatten_scans(scans)) {
    out << format_double(row.timestamp) << ',';
    if (row.truth) {
      out << format_double(row.truth->lat) << ',' << format_double(row.truth->lon);
    } else {
      out << ',';
    }
    out << ',' << row.tower_id << ',' << row.asu.value() << '\n';
  }
}

void write_trace(const std::filesystem::path& path, std::span<const ScanVector> scans) {
  auto out = open_out(path);
  write_trace(out, scans);
}

std::map<TowerId, GeoPoint> read_tower_locations(std::istream& in, const std::string& source) {
  expect_header(in, kTowerHeader, source);
  std::map<TowerId, GeoPoint> towers;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    const std::string at = where(source, line_no);
    const auto fields = split_csv(line);
    if (fields.size() != 3) {
      throw DataError(at + ": expected 3 fields, found " + std::to_string(fields.size()));
    }
    std::string id(trim(fields[0]));
    if (id.empty()) {
      throw DataError(at + ": empty tower_id");
    }
    auto p = parse_geo(trim(fields[1]), trim(fields[2]), at);
    if (!p) {
      throw DataError(at + ": tower " + id + " has no location");
    }
    towers.insert_or_assign(std::move(id), *p);
  }
  return towers;
}

std::map<TowerId, GeoPoint> read_tower_locations(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_tower_locations(in, path.string());
}

void write_tower_locations(std::ostream& out, const std::map<TowerId, GeoPoint>& towers) {
  out << kTowerHeader << '\n';
  for (const auto& [id, p] : towers) {
    out << id << ',' << format_double(p.lat) << ',' << format_double(p.lon) << '\n';
  }
}

void write_tower_locations(const std::filesystem::path& path,
                           const std::map<TowerId, GeoPoint>& towers) {
  auto out = open_out(path);
  write_tower_locations(out, towers);
}

}  // namespace cellsense
