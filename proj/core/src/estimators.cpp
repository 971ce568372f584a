#include "cellsense/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cellsense/error.hpp"

namespace cellsense {

namespace {

// Indices of the k best entries under `better`, best first. `better` must be
// a strict total order so the result is deterministic.
template <typename Better>
std::vector<std::size_t> top_k(std::size_t n, std::size_t k, Better better) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  k = std::min(k, n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    better);
  order.resize(k);
  return order;
}

void require_cells(const RadioMap& map) {
  if (map.cells.empty()) {
    throw PreconditionError("radio map has no cells");
  }
}

template <typename Value>
SignalVector to_signal_impl(const RadioMap& map, const std::map<TowerId, Value>& readings,
                            double (*value_of)(const Value&)) {
  SignalVector out;
  out.reserve(readings.size());
  auto next_unknown = static_cast<TowerIndex>(map.towers.size());
  for (const auto& [id, v] : readings) {
    const auto idx = map.tower_index(id);
    out.emplace_back(idx ? *idx : next_unknown++, value_of(v));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

double asu_value(const RssiAsu& a) { return a.value(); }
double plain_value(const double& d) { return d; }

SignalVector average_window(const RadioMap& map, ScanWindow window) {
  std::map<TowerId, std::pair<double, int>> sums;
  for (const auto& scan : window) {
    for (const auto& [id, asu] : scan.readings) {
      auto& [sum, n] = sums[id];
      sum += asu.value();
      ++n;
    }
  }
  std::map<TowerId, double> mean;
  for (const auto& [id, s] : sums) mean.emplace(id, s.first / s.second);
  return to_signal(map, mean);
}

}  // namespace

std::string_view to_string(Technique t) {
  switch (t) {
    case Technique::cellsense: return "cellsense";
    case Technique::hybrid: return "hybrid";
    case Technique::deterministic: return "deterministic";
    case Technique::gp: return "gp";
    case Technique::cellid: return "cellid";
  }
  return "unknown";
}

Technique parse_technique(std::string_view name) {
  for (auto t : {Technique::cellsense, Technique::hybrid, Technique::deterministic, Technique::gp,
                 Technique::cellid}) {
    if (name == to_string(t)) return t;
  }
  throw PreconditionError("unknown technique '" + std::string(name) + "'");
}

std::string_view to_string(Testbed t) { return t == Testbed::rural ? "rural" : "urban"; }

Testbed parse_testbed(std::string_view name) {
  if (name == "rural") return Testbed::rural;
  if (name == "urban") return Testbed::urban;
  throw PreconditionError("unknown preset '" + std::string(name) + "'");
}

void EstimatorParams::validate() const {
  if (n_samples < 1) throw PreconditionError("n_samples must be at least 1");
  if (k < 1) throw PreconditionError("k must be at least 1");
  if (!(smoothing.alpha >= 0.0)) throw PreconditionError("smoothing alpha must be >= 0");
  if (!(smoothing.floor > 0.0 && smoothing.floor <= 1.0)) {
    throw PreconditionError("likelihood floor must lie in (0, 1]");
  }
}

EstimatorParams default_params(Technique technique, Testbed testbed) {
  const bool rural = testbed == Testbed::rural;
  EstimatorParams p;
  switch (technique) {
    case Technique::cellsense:
      p.n_samples = rural ? 4 : 8;
      p.k = 2;
      break;
    case Technique::hybrid:
      p.n_samples = 1;
      p.k = 1;
      break;
    case Technique::deterministic:
      p.n_samples = rural ? 8 : 14;
      p.k = rural ? 8 : 6;
      break;
    case Technique::gp:
      p.n_samples = rural ? 4 : 8;
      p.k = 1;
      break;
    case Technique::cellid:
      p.n_samples = 1;
      p.k = 1;
      break;
  }
  return p;
}

double default_grid_length(Technique technique, Testbed testbed) {
  if (technique == Technique::deterministic && testbed == Testbed::urban) return 90.0;
  return 70.0;
}

double rssi_distance(const SignalVector& a, const SignalVector& b) {
  double sum = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() || j < b.size()) {
    double d = 0.0;
    if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
      d = a[i++].second;
    } else if (i == a.size() || b[j].first < a[i].first) {
      d = b[j++].second;
    } else {
      d = a[i++].second - b[j++].second;
    }
    sum += d * d;
  }
  return std::sqrt(sum);
}

double rssi_distance(const std::map<TowerId, double>& a, const std::map<TowerId, double>& b) {
  double sum = 0.0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    double d = 0.0;
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      d = (ia++)->second;
    } else if (ia == a.end() || ib->first < ia->first) {
      d = (ib++)->second;
    } else {
      d = (ia++)->second - (ib++)->second;
    }
    sum += d * d;
  }
  return std::sqrt(sum);
}

double rssi_distance(const std::map<TowerId, RssiAsu>& a, const std::map<TowerId, RssiAsu>& b) {
  std::map<TowerId, double> da;
  std::map<TowerId, double> db;
  for (const auto& [id, v] : a) da.emplace(id, v.value());
  for (const auto& [id, v] : b) db.emplace(id, v.value());
  return rssi_distance(da, db);
}

SignalVector to_signal(const RadioMap& map, const std::map<TowerId, double>& readings) {
  return to_signal_impl<double>(map, readings, &plain_value);
}

SignalVector to_signal(const RadioMap& map, const std::map<TowerId, RssiAsu>& readings) {
  return to_signal_impl<RssiAsu>(map, readings, &asu_value);
}

SignalVector to_signal(const Readings& readings) {
  SignalVector out;
  out.reserve(readings.size());
  for (const auto& [tower, asu] : readings) out.emplace_back(tower, asu.value());
  return out;
}

// --- CellSense ---------------------------------------------------------------

CellSenseEstimator::CellSenseEstimator(const RadioMap& map, SmoothingParams smoothing)
    : map_(&map),
      smoothing_(smoothing),
      tower_count_(map.towers.size()),
      log_floor_(std::log(smoothing.floor)) {
  const std::size_t n_cells = map.cells.size();
  slots_.assign(tower_count_ * n_cells, -1);
  heard_.assign(tower_count_, 0);
  for (std::size_t c = 0; c < n_cells; ++c) {
    for (const auto& [tower, hist] : map.cells[c].histograms) {
      slots_[tower * n_cells + c] = static_cast<std::int32_t>(heard_[tower]++);
    }
  }
  offsets_.assign(tower_count_, 0);
  std::size_t total = 0;
  for (std::size_t t = 0; t < tower_count_; ++t) {
    offsets_[t] = total;
    total += heard_[t] * RssiAsu::kLevels;
  }
  log_table_.assign(total, 0.0);
  for (std::size_t c = 0; c < n_cells; ++c) {
    for (const auto& [tower, hist] : map.cells[c].histograms) {
      const auto pos = static_cast<std::size_t>(slots_[tower * n_cells + c]);
      const double denom = hist.total + RssiAsu::kLevels * smoothing.alpha;
      for (std::size_t a = 0; a < hist.counts.size(); ++a) {
        log_table_[offsets_[tower] + a * heard_[tower] + pos] =
            std::log((hist.counts[a] + smoothing.alpha) / denom);
      }
    }
  }
}

std::vector<CellSenseEstimator::Observation> CellSenseEstimator::observations(
    ScanWindow window) const {
  std::vector<Observation> obs;
  for (const auto& scan : window) {
    for (const auto& [id, asu] : scan.readings) {
      const auto idx = map_->tower_index(id);
      obs.push_back({idx ? static_cast<std::int32_t>(*idx) : -1, asu.value()});
    }
  }
  return obs;
}

std::vector<double> CellSenseEstimator::log_posterior(ScanWindow window) const {
  return log_posterior(observations(window));
}

std::vector<double> CellSenseEstimator::log_posterior(std::span<const Observation> obs) const {
  const std::size_t n_cells = map_->cells.size();
  std::vector<double> scores(n_cells, 0.0);
  for (const auto& o : obs) {
    if (o.tower < 0) {
      for (auto& s : scores) s += log_floor_;
      continue;
    }
    const auto t = static_cast<std::size_t>(o.tower);
    const std::int32_t* slots = slots_.data() + t * n_cells;
    const double* column = log_table_.data() + offsets_[t] + static_cast<std::size_t>(o.asu) * heard_[t];
    for (std::size_t c = 0; c < n_cells; ++c) {
      scores[c] += slots[c] < 0 ? log_floor_ : column[slots[c]];
    }
  }
  return scores;
}

LocationEstimate CellSenseEstimator::locate(ScanWindow window, int k) const {
  require_cells(*map_);
  if (k < 1) throw PreconditionError("k must be at least 1");
  const auto scores = log_posterior(window);
  const auto best = top_k(scores.size(), static_cast<std::size_t>(k),
                          [&](std::size_t a, std::size_t b) {
                            return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                          });
  const double top = scores[best.front()];
  std::vector<double> weights;
  weights.reserve(best.size());
  double total = 0.0;
  for (auto i : best) {
    weights.push_back(std::exp(scores[i] - top));
    total += weights.back();
  }
  LocationEstimate est;
  est.log_score = top;
  for (std::size_t j = 0; j < best.size(); ++j) {
    const double w = weights[j] / total;
    const GridCell& cell = map_->cells[best[j]];
    est.location.x += w * cell.centroid.x;
    est.location.y += w * cell.centroid.y;
    est.contributing_cells.emplace_back(cell.index, w);
  }
  return est;
}

// --- Hybrid ------------------------------------------------------------------

HybridEstimator::HybridEstimator(const RadioMap& map, SmoothingParams smoothing)
    : coarse_(map, smoothing) {
  if (!map.has_points) {
    throw PreconditionError("hybrid estimation needs a radio map that retains its points");
  }
  point_signals_.reserve(map.cells.size());
  for (const auto& cell : map.cells) {
    auto& signals = point_signals_.emplace_back();
    signals.reserve(cell.points.size());
    for (const auto& p : cell.points) signals.push_back(to_signal(p.readings));
  }
}

LocationEstimate HybridEstimator::locate(ScanWindow window, int k_refine) const {
  const RadioMap& map = coarse_.map();
  require_cells(map);
  if (k_refine < 1) throw PreconditionError("k_refine must be at least 1");

  const auto obs = coarse_.observations(ScanWindow(window.front()));
  const auto scores = coarse_.log_posterior(obs);
  const auto best = static_cast<std::size_t>(
      std::max_element(scores.begin(), scores.end()) - scores.begin());
  const GridCell& cell = map.cells[best];
  const auto& signals = point_signals_[best];

  // Same indexing as to_signal: unknown towers follow the registry in id order.
  SignalVector query;
  query.reserve(obs.size());
  auto next_unknown = static_cast<TowerIndex>(map.towers.size());
  for (const auto& o : obs) {
    query.emplace_back(o.tower < 0 ? next_unknown++ : static_cast<TowerIndex>(o.tower),
                       static_cast<double>(o.asu));
  }
  std::sort(query.begin(), query.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> dist(signals.size());
  for (std::size_t i = 0; i < signals.size(); ++i) dist[i] = rssi_distance(query, signals[i]);
  const auto nearest = top_k(dist.size(), static_cast<std::size_t>(k_refine),
                             [&](std::size_t a, std::size_t b) {
                               return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
                             });
  LocationEstimate est;
  est.log_score = scores[best];
  for (auto i : nearest) {
    est.location.x += cell.points[i].location.x;
    est.location.y += cell.points[i].location.y;
  }
  est.location.x /= static_cast<double>(nearest.size());
  est.location.y /= static_cast<double>(nearest.size());
  est.contributing_cells.emplace_back(cell.index, 1.0);
  return est;
}

// --- Deterministic -----------------------------------------------------------

DeterministicEstimator::DeterministicEstimator(const RadioMap& map) : map_(&map) {
  cell_means_.reserve(map.cells.size());
  for (const auto& cell : map.cells) {
    auto& mean = cell_means_.emplace_back();
    mean.reserve(cell.histograms.size());
    for (const auto& [tower, hist] : cell.histograms) mean.emplace_back(tower, hist.mean());
  }
}

LocationEstimate DeterministicEstimator::locate(ScanWindow window, int k) const {
  require_cells(*map_);
  if (k < 1) throw PreconditionError("k must be at least 1");
  const SignalVector query = average_window(*map_, window);
  std::vector<double> dist(cell_means_.size());
  for (std::size_t c = 0; c < cell_means_.size(); ++c) {
    dist[c] = rssi_distance(query, cell_means_[c]);
  }
  const auto nearest = top_k(dist.size(), static_cast<std::size_t>(k),
                             [&](std::size_t a, std::size_t b) {
                               return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
                             });
  std::vector<double> weights;
  double total = 0.0;
  for (auto c : nearest) {
    weights.push_back(1.0 / (dist[c] + kInverseDistanceEpsilon));
    total += weights.back();
  }
  LocationEstimate est;
  for (std::size_t j = 0; j < nearest.size(); ++j) {
    const double w = weights[j] / total;
    const GridCell& cell = map_->cells[nearest[j]];
    est.location.x += w * cell.centroid.x;
    est.location.y += w * cell.centroid.y;
    est.contributing_cells.emplace_back(cell.index, w);
  }
  return est;
}

// --- Free functions ------------------------------------------------------------

std::vector<double> cell_log_posterior(const RadioMap& map, ScanWindow window,
                                       const EstimatorParams& params) {
  params.validate();
  return CellSenseEstimator(map, params.smoothing)
      .log_posterior(window.last(static_cast<std::size_t>(params.n_samples)));
}

LocationEstimate cellsense_locate(const RadioMap& map, ScanWindow window,
                                  const EstimatorParams& params) {
  params.validate();
  require_cells(map);
  return CellSenseEstimator(map, params.smoothing)
      .locate(window.last(static_cast<std::size_t>(params.n_samples)), params.k);
}

LocationEstimate hybrid_locate(const RadioMap& map, ScanWindow window, int k_refine,
                               const SmoothingParams& smoothing) {
  require_cells(map);
  return HybridEstimator(map, smoothing).locate(window, k_refine);
}

LocationEstimate deterministic_locate(const RadioMap& map, ScanWindow window,
                                      const EstimatorParams& params) {
  params.validate();
  require_cells(map);
  return DeterministicEstimator(map).locate(window.last(static_cast<std::size_t>(params.n_samples)),
                                            params.k);
}

LocationEstimate cellid_locate(const RadioMap& map, const ScanVector& scan) {
  if (scan.readings.empty()) {
    throw PreconditionError("cell-ID estimation needs a non-empty scan");
  }
  if (map.tower_locations.empty()) {
    throw PreconditionError("radio map has no tower locations; cell-ID needs a tower registry");
  }
  auto strongest = scan.readings.begin();
  for (auto it = scan.readings.begin(); it != scan.readings.end(); ++it) {
    if (it->second > strongest->second) strongest = it;
  }
  const auto loc = map.tower_locations.find(strongest->first);
  if (loc == map.tower_locations.end()) {
    throw DataError("strongest tower '" + strongest->first + "' has no known location");
  }
  LocationEstimate est;
  est.location = loc->second;
  return est;
}

// --- ScanWindow ----------------------------------------------------------------

ScanWindow::ScanWindow(std::span<const ScanVector> scans) : scans_(scans) {
  if (scans_.empty()) {
    throw PreconditionError("scan window must hold at least one scan");
  }
  for (std::size_t i = 1; i < scans_.size(); ++i) {
    if (!(scans_[i - 1].timestamp < scans_[i].timestamp)) {
      throw PreconditionError("scan window timestamps must be strictly increasing");
    }
  }
}

ScanWindow ScanWindow::last(std::size_t n) const {
  n = std::max<std::size_t>(1, std::min(n, scans_.size()));
  return ScanWindow(scans_.subspan(scans_.size() - n));
}

ScanWindow ScanWindow::first(std::size_t n) const {
  n = std::max<std::size_t>(1, std::min(n, scans_.size()));
  return ScanWindow(scans_.first(n));
}

}  // namespace cellsense
