#include "cellsense/radio_map.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cellsense/error.hpp"

namespace cellsense {

namespace {

std::int32_t bucket(double offset, double grid_length) {
  auto i = static_cast<std::int64_t>(std::floor(offset / grid_length));
  // Guard against the quotient rounding across a cell boundary.
  if (static_cast<double>(i) * grid_length > offset) --i;
  if (static_cast<double>(i + 1) * grid_length <= offset) ++i;
  return static_cast<std::int32_t>(i);
}

std::string timestamp_text(double t) {
  std::ostringstream os;
  os.precision(15);
  os << t;
  return os.str();
}

}  // namespace

double TowerHistogram::mean() const {
  if (total == 0) {
    return 0.0;
  }
  double sum = 0.0;
  for (std::size_t a = 0; a < counts.size(); ++a) {
    sum += static_cast<double>(a) * counts[a];
  }
  return sum / total;
}

const TowerHistogram* GridCell::histogram(TowerIndex tower) const {
  auto it = std::lower_bound(histograms.begin(), histograms.end(), tower,
                             [](const auto& entry, TowerIndex t) { return entry.first < t; });
  if (it == histograms.end() || it->first != tower) {
    return nullptr;
  }
  return &it->second;
}

std::optional<TowerIndex> RadioMap::tower_index(std::string_view id) const {
  auto it = std::lower_bound(towers.begin(), towers.end(), id);
  if (it == towers.end() || *it != id) {
    return std::nullopt;
  }
  return static_cast<TowerIndex>(it - towers.begin());
}

const GridCell* RadioMap::find_cell(CellIndex index) const {
  auto it = std::lower_bound(cells.begin(), cells.end(), index,
                             [](const GridCell& c, CellIndex i) { return c.index < i; });
  if (it == cells.end() || it->index != index) {
    return nullptr;
  }
  return &*it;
}

CellIndex RadioMap::cell_of(const PlanarPoint& p) const {
  return {bucket(p.y - anchor.y, grid_length), bucket(p.x - anchor.x, grid_length)};
}

std::size_t RadioMap::point_count() const {
  std::size_t n = 0;
  for (const auto& c : cells) n += c.point_count;
  return n;
}

RadioMap build_radio_map(std::span<const ScanVector> scans, const BuildOptions& options) {
  if (scans.empty()) {
    throw DataError("cannot build a radio map from an empty trace");
  }
  if (!(options.grid_length > 0.0) || !std::isfinite(options.grid_length)) {
    throw PreconditionError("grid length must be a positive number of meters");
  }
  std::vector<GeoPoint> truths;
  truths.reserve(scans.size());
  for (const auto& scan : scans) {
    validate(scan);
    if (!scan.truth) {
      throw DataError("training scan at t=" + timestamp_text(scan.timestamp) +
                      " has no ground-truth location");
    }
    truths.push_back(*scan.truth);
  }

  RadioMap map;
  map.origin = options.origin.value_or(centroid(truths));
  map.grid_length = options.grid_length;
  map.has_points = options.keep_points;
  const Projection projection(map.origin);

  for (const auto& scan : scans) {
    for (const auto& [id, asu] : scan.readings) map.towers.push_back(id);
  }
  std::sort(map.towers.begin(), map.towers.end());
  map.towers.erase(std::unique(map.towers.begin(), map.towers.end()), map.towers.end());

  std::vector<PlanarPoint> locations;
  locations.reserve(truths.size());
  for (const auto& g : truths) locations.push_back(projection.project(g));
  map.anchor = locations.front();
  for (const auto& p : locations) {
    map.anchor.x = std::min(map.anchor.x, p.x);
    map.anchor.y = std::min(map.anchor.y, p.y);
  }

  struct Accumulator {
    std::vector<FingerprintPoint> points;
    std::map<TowerIndex, TowerHistogram> histograms;
    double sum_x = 0.0;
    double sum_y = 0.0;
    std::size_t n = 0;
  };
  std::map<CellIndex, Accumulator> buckets;

  for (std::size_t i = 0; i < scans.size(); ++i) {
    FingerprintPoint point;
    point.location = locations[i];
    point.readings.reserve(scans[i].readings.size());
    // std::map iteration is id-ordered, so indices come out sorted.
    for (const auto& [id, asu] : scans[i].readings) {
      point.readings.emplace_back(*map.tower_index(id), asu);
    }
    Accumulator& acc = buckets[map.cell_of(point.location)];
    for (const auto& [tower, asu] : point.readings) acc.histograms[tower].add(asu);
    acc.sum_x += point.location.x;
    acc.sum_y += point.location.y;
    ++acc.n;
    acc.points.push_back(std::move(point));
  }

  map.cells.reserve(buckets.size());
  for (auto& [index, acc] : buckets) {
    GridCell cell;
    cell.index = index;
    cell.point_count = acc.n;
    cell.centroid = {acc.sum_x / static_cast<double>(acc.n), acc.sum_y / static_cast<double>(acc.n)};
    cell.histograms.assign(acc.histograms.begin(), acc.histograms.end());
    if (options.keep_points) cell.points = std::move(acc.points);
    map.cells.push_back(std::move(cell));
  }
  return map;
}

RadioMap build_radio_map(std::span<const ScanVector> scans, double grid_length) {
  BuildOptions options;
  options.grid_length = grid_length;
  return build_radio_map(scans, options);
}

double cell_likelihood(const GridCell& cell, std::optional<TowerIndex> tower, RssiAsu asu,
                       const SmoothingParams& smoothing) {
  const TowerHistogram* h = tower ? cell.histogram(*tower) : nullptr;
  if (h == nullptr) {
    return smoothing.floor;
  }
  return (h->counts[static_cast<std::size_t>(asu.value())] + smoothing.alpha) /
         (h->total + RssiAsu::kLevels * smoothing.alpha);
}

double cell_likelihood(const RadioMap& map, const GridCell& cell, std::string_view tower,
                       RssiAsu asu, const SmoothingParams& smoothing) {
  return cell_likelihood(cell, map.tower_index(tower), asu, smoothing);
}

RadioMap strip_points(RadioMap map) {
  for (auto& cell : map.cells) {
    cell.points.clear();
    cell.points.shrink_to_fit();
  }
  map.has_points = false;
  return map;
}

void attach_tower_locations(RadioMap& map, const std::map<TowerId, GeoPoint>& locations) {
  const Projection projection(map.origin);
  for (const auto& [id, g] : locations) {
    map.tower_locations.insert_or_assign(id, projection.project(g));
  }
}

void validate(const RadioMap& map) {
  if (!(map.grid_length > 0.0) || !std::isfinite(map.grid_length)) {
    throw DataError("radio map grid length must be positive");
  }
  if (!map.origin.valid()) {
    throw DataError("radio map origin is not a valid geographic point");
  }
  for (std::size_t i = 0; i < map.towers.size(); ++i) {
    if (map.towers[i].empty()) throw DataError("radio map has an empty tower id");
    if (i > 0 && !(map.towers[i - 1] < map.towers[i])) {
      throw DataError("radio map tower registry is not sorted and unique");
    }
  }
  const auto q = static_cast<TowerIndex>(map.towers.size());
  for (std::size_t i = 0; i < map.cells.size(); ++i) {
    const GridCell& cell = map.cells[i];
    const std::string name = "cell (" + std::to_string(cell.index.row) + ", " +
                             std::to_string(cell.index.col) + ")";
    if (i > 0 && !(map.cells[i - 1].index < cell.index)) {
      throw DataError("radio map cells are not sorted and unique at " + name);
    }
    if (cell.point_count == 0) throw DataError(name + " has no fingerprint points");
    if (cell.histograms.empty()) throw DataError(name + " has no tower histograms");
    for (std::size_t h = 0; h < cell.histograms.size(); ++h) {
      const auto& [tower, hist] = cell.histograms[h];
      if (tower >= q) throw DataError(name + " references an unknown tower");
      if (h > 0 && !(cell.histograms[h - 1].first < tower)) {
        throw DataError(name + " histograms are not sorted by tower");
      }
      std::uint64_t sum = 0;
      for (auto c : hist.counts) sum += c;
      if (sum != hist.total || hist.total == 0) {
        throw DataError(name + " has an inconsistent histogram for tower " + map.towers[tower]);
      }
    }
    if (map.has_points) {
      if (cell.points.size() != cell.point_count) {
        throw DataError(name + " point count does not match its stored points");
      }
      for (const auto& p : cell.points) {
        if (p.readings.empty() || p.readings.size() > kMaxReadingsPerScan) {
          throw DataError(name + " has a fingerprint point with an invalid reading count");
        }
        for (std::size_t r = 0; r < p.readings.size(); ++r) {
          if (p.readings[r].first >= q ||
              (r > 0 && !(p.readings[r - 1].first < p.readings[r].first))) {
            throw DataError(name + " has a fingerprint point with invalid tower references");
          }
        }
        if (map.cell_of(p.location) != cell.index) {
          throw DataError(name + " holds a point that lies outside the cell");
        }
      }
    } else if (!cell.points.empty()) {
      throw DataError(name + " stores points in a map marked as stripped");
    }
  }
}

}  // namespace cellsense
