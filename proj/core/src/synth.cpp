#include "cellsense/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cellsense/error.hpp"
#include "cellsense/seeding.hpp"

namespace cellsense {

namespace {

std::vector<double> street_positions(double lo, double hi, double spacing) {
  const double span = hi - lo;
  const auto n = static_cast<std::size_t>(std::floor(span / spacing)) + 1;
  const double margin = (span - static_cast<double>(n - 1) * spacing) / 2.0;
  std::vector<double> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = lo + margin + static_cast<double>(i) * spacing;
  return pos;
}

Route truncate_route(const std::vector<PlanarPoint>& path, double target_length, double speed) {
  Route out;
  out.speed = speed;
  out.waypoints.push_back(path.front());
  double walked = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const double seg = distance(path[i - 1], path[i]);
    if (walked + seg >= target_length) {
      const double f = (target_length - walked) / seg;
      out.waypoints.push_back({path[i - 1].x + f * (path[i].x - path[i - 1].x),
                               path[i - 1].y + f * (path[i].y - path[i - 1].y)});
      return out;
    }
    walked += seg;
    out.waypoints.push_back(path[i]);
  }
  return out;
}

// Every horizontal street in serpentine order, then every vertical street;
// repeated back and forth until the target length is covered.
Route serpentine_route(const std::vector<double>& xs, const std::vector<double>& ys,
                       double target_length, double speed) {
  std::vector<PlanarPoint> lap;
  for (std::size_t j = 0; j < ys.size(); ++j) {
    const bool forward = j % 2 == 0;
    lap.push_back({forward ? xs.front() : xs.back(), ys[j]});
    lap.push_back({forward ? xs.back() : xs.front(), ys[j]});
  }
  const bool at_right = lap.back().x == xs.back();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const std::size_t col = at_right ? xs.size() - 1 - i : i;
    const bool down = i % 2 == 0;
    lap.push_back({xs[col], down ? ys.back() : ys.front()});
    lap.push_back({xs[col], down ? ys.front() : ys.back()});
  }
  std::vector<PlanarPoint> path;
  double length = 0.0;
  bool reverse = false;
  while (length < target_length) {
    std::vector<PlanarPoint> leg = lap;
    if (reverse) std::reverse(leg.begin(), leg.end());
    for (const auto& p : leg) {
      if (!path.empty()) {
        const double d = distance(path.back(), p);
        if (d == 0.0) continue;
        length += d;
      }
      path.push_back(p);
    }
    reverse = !reverse;
  }
  return truncate_route(path, target_length, speed);
}

// Random walk between street intersections, no immediate U-turns.
Route random_walk_route(const std::vector<double>& xs, const std::vector<double>& ys,
                        double target_length, double speed, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&rng](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };
  std::size_t i = pick(xs.size());
  std::size_t j = pick(ys.size());
  std::size_t prev_i = i;
  std::size_t prev_j = j;
  std::vector<PlanarPoint> path{{xs[i], ys[j]}};
  double length = 0.0;
  while (length < target_length) {
    std::vector<std::pair<std::size_t, std::size_t>> next;
    if (i > 0) next.emplace_back(i - 1, j);
    if (i + 1 < xs.size()) next.emplace_back(i + 1, j);
    if (j > 0) next.emplace_back(i, j - 1);
    if (j + 1 < ys.size()) next.emplace_back(i, j + 1);
    if (next.size() > 1) {
      std::erase_if(next, [&](const auto& n) { return n.first == prev_i && n.second == prev_j; });
    }
    const auto [ni, nj] = next[pick(next.size())];
    prev_i = i;
    prev_j = j;
    i = ni;
    j = nj;
    path.push_back({xs[i], ys[j]});
    length += distance(path[path.size() - 2], path.back());
  }
  return truncate_route(path, target_length, speed);
}

}  // namespace

void PathLossParams::validate() const {
  if (!(exponent >= 2.0 && exponent <= 5.0)) {
    throw PreconditionError("path-loss exponent must lie in [2, 5]");
  }
  if (!(shadow_sigma_db >= 0.0)) throw PreconditionError("shadowing sigma must be >= 0");
  if (!(noise_sigma_db >= 0.0)) throw PreconditionError("measurement noise sigma must be >= 0");
  if (!(d0_m > 0.0)) throw PreconditionError("reference distance must be positive");
  if (!(shadow_grid_spacing_m > 0.0)) {
    throw PreconditionError("shadowing lattice spacing must be positive");
  }
}

SynthWorld::SynthWorld(Rect bounds, std::vector<SynthTower> towers, PathLossParams pathloss,
                       std::uint64_t seed, GeoPoint geo_origin)
    : bounds_(bounds),
      towers_(std::move(towers)),
      pathloss_(pathloss),
      seed_(seed),
      geo_origin_(geo_origin) {
  pathloss_.validate();
  if (!(bounds_.width() > 0.0 && bounds_.height() > 0.0)) {
    throw PreconditionError("synthetic world bounds must have positive area");
  }
  if (std::none_of(towers_.begin(), towers_.end(),
                   [&](const SynthTower& t) { return bounds_.contains(t.location); })) {
    throw PreconditionError("synthetic world needs at least one tower inside its bounds");
  }
  const double s = pathloss_.shadow_grid_spacing_m;
  lattice_origin_ = {bounds_.min_x - s, bounds_.min_y - s};
  lattice_nx_ = static_cast<std::size_t>(std::ceil((bounds_.width() + 2 * s) / s)) + 1;
  lattice_ny_ = static_cast<std::size_t>(std::ceil((bounds_.height() + 2 * s) / s)) + 1;
  shadow_.resize(towers_.size());
  for (std::size_t t = 0; t < towers_.size(); ++t) {
    std::mt19937_64 rng(derive_seed(seed_, t));
    std::normal_distribution<double> normal(0.0, 1.0);
    auto& field = shadow_[t];
    field.resize(lattice_nx_ * lattice_ny_);
    for (auto& v : field) v = normal(rng) * pathloss_.shadow_sigma_db;
  }
}

double SynthWorld::path_loss_db(double distance_m) const {
  const double d = std::max(distance_m, pathloss_.d0_m);
  return pathloss_.p0_db + 10.0 * pathloss_.exponent * std::log10(d / pathloss_.d0_m);
}

double SynthWorld::shadowing_db(std::size_t tower, const PlanarPoint& p) const {
  if (pathloss_.shadow_sigma_db == 0.0) return 0.0;
  const double s = pathloss_.shadow_grid_spacing_m;
  const double gx = std::clamp((p.x - lattice_origin_.x) / s, 0.0, double(lattice_nx_ - 1));
  const double gy = std::clamp((p.y - lattice_origin_.y) / s, 0.0, double(lattice_ny_ - 1));
  const auto i0 = std::min(static_cast<std::size_t>(gx), lattice_nx_ - 2);
  const auto j0 = std::min(static_cast<std::size_t>(gy), lattice_ny_ - 2);
  const double fx = gx - static_cast<double>(i0);
  const double fy = gy - static_cast<double>(j0);
  const auto& f = shadow_[tower];
  auto at = [&](std::size_t i, std::size_t j) { return f[j * lattice_nx_ + i]; };
  return (1 - fx) * (1 - fy) * at(i0, j0) + fx * (1 - fy) * at(i0 + 1, j0) +
         (1 - fx) * fy * at(i0, j0 + 1) + fx * fy * at(i0 + 1, j0 + 1);
}

double SynthWorld::received_dbm(std::size_t tower, const PlanarPoint& p) const {
  const SynthTower& t = towers_.at(tower);
  return t.tx_power_dbm - path_loss_db(distance(t.location, p)) + shadowing_db(tower, p);
}

SynthWorld SynthWorld::with_tx_power(std::size_t tower, double tx_power_dbm) const {
  SynthWorld copy = *this;
  copy.towers_.at(tower).tx_power_dbm = tx_power_dbm;
  return copy;
}

std::map<TowerId, GeoPoint> SynthWorld::tower_locations() const {
  const Projection proj(geo_origin_);
  std::map<TowerId, GeoPoint> out;
  for (const auto& t : towers_) out.emplace(t.id, proj.unproject(t.location));
  return out;
}

double MeasurementNoise::draw() {
  const double z = normal_(rng_);
  return sigma_ * z;
}

std::optional<ScanVector> try_scan_at(const SynthWorld& world, const PlanarPoint& p, double t,
                                      MeasurementNoise* noise) {
  std::vector<std::pair<double, std::size_t>> audible;
  for (std::size_t i = 0; i < world.towers().size(); ++i) {
    double dbm = world.received_dbm(i, p);
    if (noise != nullptr) dbm += noise->draw();
    if (dbm >= kSensitivityDbm) audible.emplace_back(dbm, i);
  }
  if (audible.empty()) return std::nullopt;
  std::sort(audible.begin(), audible.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  if (audible.size() > kMaxReadingsPerScan) audible.resize(kMaxReadingsPerScan);
  ScanVector scan;
  scan.timestamp = t;
  for (const auto& [dbm, i] : audible) {
    scan.readings.emplace(world.towers()[i].id, dbm_to_asu(dbm));
  }
  scan.truth = world.projection().unproject(p);
  return scan;
}

ScanVector scan_at(const SynthWorld& world, const PlanarPoint& p, double t,
                   MeasurementNoise* noise) {
  auto scan = try_scan_at(world, p, t, noise);
  if (!scan) {
    throw DataError("no tower is audible at (" + std::to_string(p.x) + ", " +
                    std::to_string(p.y) + ")");
  }
  return std::move(*scan);
}

void Route::validate() const {
  if (waypoints.size() < 2) throw PreconditionError("route needs at least two waypoints");
  if (!(speed > 0.0)) throw PreconditionError("route speed must be positive");
}

double Route::length() const {
  double total = 0.0;
  for (std::size_t i = 1; i < waypoints.size(); ++i) total += distance(waypoints[i - 1], waypoints[i]);
  return total;
}

PlanarPoint Route::at(double arc_length) const {
  if (arc_length <= 0.0) return waypoints.front();
  double walked = 0.0;
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const double seg = distance(waypoints[i - 1], waypoints[i]);
    if (seg > 0.0 && walked + seg >= arc_length) {
      const double f = (arc_length - walked) / seg;
      return {waypoints[i - 1].x + f * (waypoints[i].x - waypoints[i - 1].x),
              waypoints[i - 1].y + f * (waypoints[i].y - waypoints[i - 1].y)};
    }
    walked += seg;
  }
  return waypoints.back();
}

std::vector<ScanVector> generate_trace(const SynthWorld& world, const Route& route,
                                       std::uint64_t trace_seed, double start_time) {
  route.validate();
  MeasurementNoise noise(world.pathloss().noise_sigma_db, trace_seed);
  const double length = route.length();
  const double duration = length / route.speed;
  const auto whole_seconds = static_cast<std::size_t>(std::floor(duration + 1e-9));
  std::vector<ScanVector> trace;
  trace.reserve(whole_seconds + 2);
  for (std::size_t s = 0; s <= whole_seconds; ++s) {
    const double along = std::min(length, route.speed * static_cast<double>(s));
    const PlanarPoint p = s == whole_seconds && along >= length ? route.waypoints.back()
                                                                : route.at(along);
    if (auto scan = try_scan_at(world, p, start_time + static_cast<double>(s), &noise)) {
      trace.push_back(std::move(*scan));
    }
  }
  if (static_cast<double>(whole_seconds) * route.speed < length - 1e-9) {
    if (auto scan = try_scan_at(world, route.waypoints.back(),
                                start_time + static_cast<double>(whole_seconds + 1), &noise)) {
      trace.push_back(std::move(*scan));
    }
  }
  return trace;
}

PresetConfig preset_config(Testbed testbed) {
  PresetConfig c;
  c.testbed = testbed;
  if (testbed == Testbed::rural) {
    const double side = std::sqrt(1.958e6);
    c.bounds = {0.0, 0.0, side, side};
    c.tower_count = 51;
    c.tower_margin = 1000.0;
    c.tx_power_dbm = -30.7;
    c.pathloss.exponent = 3.0;
    c.pathloss.shadow_sigma_db = 6.0;
    c.speed = 12.0;
    c.street_spacing = 200.0;
    c.training_scans = 1599;
    c.test_scans = 573;
  } else {
    const double side = std::sqrt(5.45e6);
    c.bounds = {0.0, 0.0, side, side};
    c.tower_count = 137;
    c.tower_margin = 250.0;
    c.tx_power_dbm = -31.5;
    c.pathloss.exponent = 3.5;
    c.pathloss.shadow_sigma_db = 8.0;
    c.speed = 6.0;
    c.street_spacing = 600.0;
    c.training_scans = 3090;
    c.test_scans = 1239;
  }
  return c;
}

Preset make_preset(const PresetConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0));
  // The world spans the tower placement region; routes stay on the streets
  // inside config.bounds.
  const Rect region{config.bounds.min_x - config.tower_margin,
                    config.bounds.min_y - config.tower_margin,
                    config.bounds.max_x + config.tower_margin,
                    config.bounds.max_y + config.tower_margin};
  std::uniform_real_distribution<double> ux(region.min_x, region.max_x);
  std::uniform_real_distribution<double> uy(region.min_y, region.max_y);
  std::mt19937_64 power_rng(derive_seed(seed, 3));
  std::normal_distribution<double> power_offset(0.0, 1.0);
  std::vector<SynthTower> towers;
  towers.reserve(config.tower_count);
  const int mnc = config.testbed == Testbed::rural ? 1 : 2;
  for (std::size_t i = 0; i < config.tower_count; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "602-%02d-%05zu", mnc, 10001 + i);
    const double x = ux(rng);
    const double y = uy(rng);
    const double tx = config.tx_power_dbm + config.tx_power_spread_db * power_offset(power_rng);
    towers.push_back({id, {x, y}, tx});
  }
  SynthWorld world(region, std::move(towers), config.pathloss, derive_seed(seed, 1));

  const auto xs = street_positions(config.bounds.min_x, config.bounds.max_x, config.street_spacing);
  const auto ys = street_positions(config.bounds.min_y, config.bounds.max_y, config.street_spacing);
  Route training = serpentine_route(
      xs, ys, static_cast<double>(config.training_scans - 1) * config.speed, config.speed);
  Route test = random_walk_route(xs, ys, static_cast<double>(config.test_scans - 1) * config.speed,
                                 config.speed, derive_seed(seed, 2));
  return Preset{config, std::move(world), std::move(training), std::move(test)};
}

Preset make_preset(std::string_view name, std::uint64_t seed) {
  return make_preset(preset_config(parse_testbed(name)), seed);
}

Dataset generate_dataset(const Preset& preset, std::uint64_t seed) {
  Dataset d;
  d.training = generate_trace(preset.world, preset.training_route, derive_seed(seed, 11));
  d.test = generate_trace(preset.world, preset.test_route, derive_seed(seed, 12), 100000.0);
  d.tower_locations = preset.world.tower_locations();
  return d;
}

}  // namespace cellsense
