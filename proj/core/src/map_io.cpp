#include "cellsense/map_io.hpp"

#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cellsense/error.hpp"

namespace cellsense {

namespace {

using nlohmann::json;

json point_json(const PlanarPoint& p) { return {{"x", p.x}, {"y", p.y}}; }

PlanarPoint point_from(const json& j) { return {j.at("x").get<double>(), j.at("y").get<double>()}; }

void check_envelope(const json& doc, const char* kind, int version) {
  if (!doc.is_object()) {
    throw DataError("document is not a JSON object");
  }
  const auto k = doc.at("kind").get<std::string>();
  if (k != kind) {
    throw DataError("expected a '" + std::string(kind) + "' document, found '" + k + "'");
  }
  const json& v = doc.at("version");
  if (!v.is_number_integer()) {
    throw DataError("version field must be an integer");
  }
  if (v.get<long long>() != version) {
    throw DataError("unsupported " + std::string(kind) + " version " +
                    std::to_string(v.get<long long>()) + " (this build reads version " +
                    std::to_string(version) + ")");
  }
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spill(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

template <typename Fn>
auto parse_guarded(const std::string& text, const char* what, Fn&& fn) {
  try {
    return fn(json::parse(text));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed ") + what + " file: " + e.what());
  }
}

}  // namespace

std::string radio_map_to_json(const RadioMap& map) {
  json doc;
  doc["kind"] = kRadioMapKind;
  doc["version"] = kRadioMapFormatVersion;
  doc["origin"] = {{"lat", map.origin.lat}, {"lon", map.origin.lon}};
  doc["grid_length_m"] = map.grid_length;
  doc["anchor"] = point_json(map.anchor);
  doc["towers"] = map.towers;
  doc["has_points"] = map.has_points;
  json locations = json::object();
  for (const auto& [id, p] : map.tower_locations) locations[id] = point_json(p);
  doc["tower_locations"] = std::move(locations);

  json cells = json::array();
  for (const auto& cell : map.cells) {
    json c;
    c["row"] = cell.index.row;
    c["col"] = cell.index.col;
    c["centroid"] = point_json(cell.centroid);
    c["point_count"] = cell.point_count;
    json hist = json::object();
    for (const auto& [tower, h] : cell.histograms) hist[map.towers[tower]] = h.counts;
    c["histograms"] = std::move(hist);
    if (map.has_points) {
      json points = json::array();
      for (const auto& p : cell.points) {
        json readings = json::object();
        for (const auto& [tower, asu] : p.readings) readings[map.towers[tower]] = asu.value();
        points.push_back({{"x", p.location.x}, {"y", p.location.y}, {"readings", readings}});
      }
      c["points"] = std::move(points);
    }
    cells.push_back(std::move(c));
  }
  doc["cells"] = std::move(cells);
  return doc.dump();
}

RadioMap radio_map_from_json(const std::string& text) {
  return parse_guarded(text, "radio map", [](const json& doc) {
    check_envelope(doc, kRadioMapKind, kRadioMapFormatVersion);
    RadioMap map;
    map.origin = {doc.at("origin").at("lat").get<double>(), doc.at("origin").at("lon").get<double>()};
    map.grid_length = doc.at("grid_length_m").get<double>();
    map.anchor = point_from(doc.at("anchor"));
    map.towers = doc.at("towers").get<std::vector<TowerId>>();
    map.has_points = doc.at("has_points").get<bool>();
    for (const auto& [id, p] : doc.at("tower_locations").items()) {
      map.tower_locations.emplace(id, point_from(p));
    }
    auto index_of = [&map](const std::string& id) {
      const auto idx = map.tower_index(id);
      if (!idx) throw DataError("radio map references unregistered tower '" + id + "'");
      return *idx;
    };
    for (const auto& c : doc.at("cells")) {
      GridCell cell;
      cell.index = {c.at("row").get<std::int32_t>(), c.at("col").get<std::int32_t>()};
      cell.centroid = point_from(c.at("centroid"));
      cell.point_count = c.at("point_count").get<std::size_t>();
      for (const auto& [id, counts] : c.at("histograms").items()) {
        if (!counts.is_array() || counts.size() != RssiAsu::kLevels) {
          throw DataError("histogram for tower '" + id + "' must hold 32 counts");
        }
        TowerHistogram h;
        for (std::size_t a = 0; a < RssiAsu::kLevels; ++a) {
          if (!counts[a].is_number_unsigned()) {
            throw DataError("histogram counts must be non-negative integers");
          }
          h.counts[a] = counts[a].get<std::uint32_t>();
          h.total += h.counts[a];
        }
        cell.histograms.emplace_back(index_of(id), h);
      }
      std::sort(cell.histograms.begin(), cell.histograms.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      if (map.has_points) {
        for (const auto& p : c.at("points")) {
          FingerprintPoint fp;
          fp.location = point_from(p);
          for (const auto& [id, asu] : p.at("readings").items()) {
            const int v = asu.get<int>();
            if (v < RssiAsu::kMin || v > RssiAsu::kMax) {
              throw DataError("fingerprint reading outside [0, 31]");
            }
            fp.readings.emplace_back(index_of(id), RssiAsu(v));
          }
          std::sort(fp.readings.begin(), fp.readings.end(),
                    [](const auto& a, const auto& b) { return a.first < b.first; });
          cell.points.push_back(std::move(fp));
        }
      }
      map.cells.push_back(std::move(cell));
    }
    validate(map);
    return map;
  });
}

void save_radio_map(const RadioMap& map, const std::filesystem::path& path) {
  spill(path, radio_map_to_json(map));
}

RadioMap load_radio_map(const std::filesystem::path& path) {
  try {
    return radio_map_from_json(slurp(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string gp_grid_to_json(const PrecomputedGrid& grid) {
  json doc;
  doc["kind"] = kGpGridKind;
  doc["version"] = kGpGridFormatVersion;
  doc["origin"] = {{"lat", grid.origin.lat}, {"lon", grid.origin.lon}};
  json points = json::array();
  for (const auto& p : grid.points) points.push_back(json::array({p.x, p.y}));
  doc["points"] = std::move(points);
  json towers = json::array();
  for (const auto& f : grid.towers) {
    towers.push_back({{"id", f.id},
                      {"noise_variance", f.noise_variance},
                      {"mean", f.mean},
                      {"variance", f.variance}});
  }
  doc["towers"] = std::move(towers);
  return doc.dump();
}

PrecomputedGrid gp_grid_from_json(const std::string& text) {
  return parse_guarded(text, "GP grid", [](const json& doc) {
    check_envelope(doc, kGpGridKind, kGpGridFormatVersion);
    PrecomputedGrid grid;
    grid.origin = {doc.at("origin").at("lat").get<double>(), doc.at("origin").at("lon").get<double>()};
    for (const auto& p : doc.at("points")) {
      if (!p.is_array() || p.size() != 2) throw DataError("GP grid point must be [x, y]");
      grid.points.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    if (grid.points.empty()) throw DataError("GP grid has no points");
    for (const auto& t : doc.at("towers")) {
      GpTowerField f;
      f.id = t.at("id").get<std::string>();
      f.noise_variance = t.at("noise_variance").get<double>();
      f.mean = t.at("mean").get<std::vector<double>>();
      f.variance = t.at("variance").get<std::vector<double>>();
      if (f.mean.size() != grid.points.size() || f.variance.size() != grid.points.size()) {
        throw DataError("GP field for tower '" + f.id + "' does not match the point count");
      }
      if (!(f.noise_variance > 0.0)) throw DataError("GP noise variance must be positive");
      for (double v : f.variance) {
        if (!(v >= 0.0)) throw DataError("GP variance must be non-negative");
      }
      grid.towers.push_back(std::move(f));
    }
    std::sort(grid.towers.begin(), grid.towers.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    return grid;
  });
}

void save_gp_grid(const PrecomputedGrid& grid, const std::filesystem::path& path) {
  spill(path, gp_grid_to_json(grid));
}

PrecomputedGrid load_gp_grid(const std::filesystem::path& path) {
  try {
    return gp_grid_from_json(slurp(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace cellsense
