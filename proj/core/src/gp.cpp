#include "cellsense/gp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <thread>

#include "cellsense/error.hpp"
#include "cellsense/seeding.hpp"

namespace cellsense {

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)
constexpr int kJitterRetries = 3;

Matrix squared_distances(const std::vector<PlanarPoint>& a, const std::vector<PlanarPoint>& b) {
  Matrix d(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t j = 0; j < b.size(); ++j) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double dx = a[i].x - b[j].x;
      const double dy = a[i].y - b[j].y;
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = dx * dx + dy * dy;
    }
  }
  return d;
}

Matrix kernel_matrix(const Matrix& sq_dist, const GpHyperparams& hyper) {
  const double scale = -0.5 / (hyper.length_scale * hyper.length_scale);
  return (sq_dist.array() * scale).exp().matrix() * hyper.sigma_f2;
}

struct Factorization {
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;
};

// Cholesky of K + sigma_n2 I, retrying with growing diagonal jitter.
std::optional<Factorization> factorize_with_jitter(const Matrix& k, const GpHyperparams& hyper) {
  double jitter = 0.0;
  for (int attempt = 0; attempt <= kJitterRetries; ++attempt) {
    Matrix a = k;
    a.diagonal().array() += hyper.sigma_n2 + jitter;
    Factorization f{Eigen::LLT<Matrix>(a), jitter};
    if (f.llt.info() == Eigen::Success) {
      const Vector diag = f.llt.matrixLLT().diagonal();
      if ((diag.array() > 0.0).all() && diag.allFinite()) {
        return f;
      }
    }
    jitter = jitter == 0.0 ? 1.0e-8 * hyper.sigma_f2 : jitter * 10.0;
  }
  return std::nullopt;
}

double lml_from(const Factorization& f, const Vector& y) {
  const Vector alpha = f.llt.solve(y);
  const Matrix l = f.llt.matrixL();
  const double log_det_half = l.diagonal().array().log().sum();
  return -0.5 * y.dot(alpha) - log_det_half - 0.5 * static_cast<double>(y.size()) * kLog2Pi;
}

void check_training(const GpTrainingSet& data) {
  if (data.locations.size() != data.values.size()) {
    throw PreconditionError("GP training locations and values differ in length");
  }
  if (data.locations.size() < 2) {
    throw PreconditionError("GP fit needs at least two training points");
  }
  for (double v : data.values) {
    if (!std::isfinite(v)) throw DataError("GP training value is not finite");
  }
}

Vector centred_values(const GpTrainingSet& data, double offset) {
  Vector y(static_cast<Eigen::Index>(data.values.size()));
  for (std::size_t i = 0; i < data.values.size(); ++i) {
    y(static_cast<Eigen::Index>(i)) = data.values[i] - offset;
  }
  return y;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

GpTrainingSet subsample(GpTrainingSet data, std::size_t max_points, std::uint64_t seed) {
  const std::size_t n = data.values.size();
  if (max_points == 0 || n <= max_points) {
    return data;
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first max_points slots become a uniform sample.
  for (std::size_t i = 0; i < max_points; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(max_points);
  std::sort(idx.begin(), idx.end());
  GpTrainingSet out;
  out.locations.reserve(max_points);
  out.values.reserve(max_points);
  for (auto i : idx) {
    out.locations.push_back(data.locations[i]);
    out.values.push_back(data.values[i]);
  }
  return out;
}

}  // namespace

bool GpHyperparams::valid() const {
  return sigma_f2 > 0.0 && sigma_n2 > 0.0 && length_scale > 0.0 && std::isfinite(sigma_f2) &&
         std::isfinite(sigma_n2) && std::isfinite(length_scale);
}

double kernel(const PlanarPoint& p, const PlanarPoint& q, const GpHyperparams& hyper) {
  const double dx = p.x - q.x;
  const double dy = p.y - q.y;
  return hyper.sigma_f2 * std::exp(-(dx * dx + dy * dy) / (2.0 * hyper.length_scale * hyper.length_scale));
}

std::vector<GpHyperparams> HyperparameterGrid::candidates() const {
  std::vector<GpHyperparams> out;
  for (double l : length_scale) {
    for (double f : sigma_f2) {
      for (double n : sigma_n2) {
        GpHyperparams h{f, n, l};
        if (!h.valid()) throw PreconditionError("hyperparameter grid holds a non-positive value");
        out.push_back(h);
      }
    }
  }
  if (out.empty()) throw PreconditionError("hyperparameter grid is empty");
  return out;
}

double log_marginal_likelihood(const GpTrainingSet& data, const GpHyperparams& hyper) {
  check_training(data);
  const Vector y = centred_values(data, mean_of(data.values));
  const Matrix k = kernel_matrix(squared_distances(data.locations, data.locations), hyper);
  const auto f = factorize_with_jitter(k, hyper);
  return f ? lml_from(*f, y) : -std::numeric_limits<double>::infinity();
}

std::vector<HyperparameterScore> score_hyperparameters(const GpTrainingSet& data,
                                                       const HyperparameterGrid& grid) {
  check_training(data);
  const Vector y = centred_values(data, mean_of(data.values));
  const Matrix sq = squared_distances(data.locations, data.locations);
  std::vector<HyperparameterScore> scores;
  for (const auto& h : grid.candidates()) {
    const auto f = factorize_with_jitter(kernel_matrix(sq, h), h);
    scores.push_back({h, f ? lml_from(*f, y) : -std::numeric_limits<double>::infinity()});
  }
  return scores;
}

GpTowerModel GpTowerModel::fit(GpTrainingSet data, const GpFitOptions& options) {
  check_training(data);
  data = subsample(std::move(data), options.max_points, options.seed);
  const auto scores = score_hyperparameters(data, options.grid);
  const auto best = std::max_element(scores.begin(), scores.end(),
                                     [](const auto& a, const auto& b) {
                                       return a.log_marginal_likelihood < b.log_marginal_likelihood;
                                     });
  if (!std::isfinite(best->log_marginal_likelihood)) {
    throw DataError("GP kernel matrix could not be factorized for any hyperparameter candidate");
  }
  return fit(std::move(data), best->hyper);
}

GpTowerModel GpTowerModel::fit(GpTrainingSet data, const GpHyperparams& hyper) {
  check_training(data);
  if (!hyper.valid()) throw PreconditionError("GP hyperparameters must be strictly positive");
  GpTowerModel model;
  model.data_ = std::move(data);
  model.hyper_ = hyper;
  model.offset_ = mean_of(model.data_.values);
  model.factorize();
  return model;
}

void GpTowerModel::factorize() {
  const Matrix k = kernel_matrix(squared_distances(data_.locations, data_.locations), hyper_);
  const auto f = factorize_with_jitter(k, hyper_);
  if (!f) {
    throw DataError("GP kernel matrix is not positive definite even after jitter");
  }
  const Vector y = centred_values(data_, offset_);
  jitter_ = f->jitter;
  lml_ = lml_from(*f, y);
  const Matrix l = f->llt.matrixL();
  cholesky_.assign(l.data(), l.data() + l.size());
  const Vector alpha = f->llt.solve(y);
  alpha_.assign(alpha.data(), alpha.data() + alpha.size());
}

GpPrediction GpTowerModel::predict(const PlanarPoint& p) const {
  return predict(std::span<const PlanarPoint>(&p, 1)).front();
}

std::vector<GpPrediction> GpTowerModel::predict(std::span<const PlanarPoint> points) const {
  const auto n = static_cast<Eigen::Index>(alpha_.size());
  const Eigen::Map<const Matrix> l(cholesky_.data(), n, n);
  const Eigen::Map<const Vector> alpha(alpha_.data(), n);
  std::vector<GpPrediction> out;
  out.reserve(points.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < points.size(); start += kChunk) {
    const std::size_t m = std::min(kChunk, points.size() - start);
    const std::vector<PlanarPoint> chunk(points.begin() + static_cast<std::ptrdiff_t>(start),
                                         points.begin() + static_cast<std::ptrdiff_t>(start + m));
    const Matrix k_star = kernel_matrix(squared_distances(data_.locations, chunk), hyper_);
    const Vector mean = k_star.transpose() * alpha;
    const Matrix v = l.triangularView<Eigen::Lower>().solve(k_star);
    const Vector reduction = v.colwise().squaredNorm().transpose();
    for (std::size_t j = 0; j < m; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      out.push_back({offset_ + mean(jj), std::max(0.0, hyper_.sigma_f2 - reduction(jj))});
    }
  }
  return out;
}

GpTrainingSet tower_training_set(const RadioMap& map, TowerIndex tower) {
  if (!map.has_points) {
    throw PreconditionError("GP training needs a radio map that retains its points");
  }
  GpTrainingSet data;
  for (const auto& cell : map.cells) {
    for (const auto& p : cell.points) {
      auto it = std::lower_bound(p.readings.begin(), p.readings.end(), tower,
                                 [](const auto& r, TowerIndex t) { return r.first < t; });
      if (it != p.readings.end() && it->first == tower) {
        data.locations.push_back(p.location);
        data.values.push_back(it->second.value());
      }
    }
  }
  return data;
}

std::map<TowerId, GpTowerModel> fit_tower_models(const RadioMap& map, const GpFitOptions& options) {
  const std::size_t q = map.towers.size();
  std::vector<std::optional<GpTowerModel>> fitted(q);
  std::vector<std::exception_ptr> errors(q);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < q; t = next++) {
      try {
        GpTrainingSet data = tower_training_set(map, static_cast<TowerIndex>(t));
        if (data.values.size() < 2) continue;
        GpFitOptions opts = options;
        opts.seed = derive_seed(options.seed, t);
        fitted[t] = GpTowerModel::fit(std::move(data), opts);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const unsigned n_threads =
      std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), static_cast<unsigned>(q)));
  std::vector<std::thread> threads;
  for (unsigned i = 1; i < n_threads; ++i) threads.emplace_back(worker);
  worker();
  for (auto& th : threads) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::map<TowerId, GpTowerModel> models;
  for (std::size_t t = 0; t < q; ++t) {
    if (fitted[t]) models.emplace(map.towers[t], std::move(*fitted[t]));
  }
  return models;
}

const GpTowerField* PrecomputedGrid::find(std::string_view id) const {
  auto it = std::lower_bound(towers.begin(), towers.end(), id,
                             [](const GpTowerField& f, std::string_view i) { return f.id < i; });
  if (it == towers.end() || it->id != id) return nullptr;
  return &*it;
}

std::vector<PlanarPoint> lattice(const Rect& bounds, double spacing) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) {
    throw PreconditionError("lattice spacing must be positive");
  }
  if (!(bounds.width() >= 0.0 && bounds.height() >= 0.0)) {
    throw PreconditionError("lattice bounds are inverted");
  }
  const auto nx = static_cast<std::size_t>(std::floor(bounds.width() / spacing + 1e-9)) + 1;
  const auto ny = static_cast<std::size_t>(std::floor(bounds.height() / spacing + 1e-9)) + 1;
  std::vector<PlanarPoint> pts;
  pts.reserve(nx * ny);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      pts.push_back({bounds.min_x + static_cast<double>(i) * spacing,
                     bounds.min_y + static_cast<double>(j) * spacing});
    }
  }
  return pts;
}

double spacing_for_point_count(const Rect& bounds, std::size_t target) {
  const double w = bounds.width();
  const double h = bounds.height();
  if (target <= 1 || (w <= 0.0 && h <= 0.0)) {
    return std::max({w, h, 1.0}) * 2.0;
  }
  // (w/s + 1)(h/s + 1) = target, solved for s.
  const double t = static_cast<double>(target) - 1.0;
  return ((w + h) + std::sqrt((w + h) * (w + h) + 4.0 * t * w * h)) / (2.0 * t);
}

Rect training_bounds(const RadioMap& map) {
  std::vector<PlanarPoint> pts;
  for (const auto& cell : map.cells) {
    if (cell.points.empty()) {
      pts.push_back(cell.centroid);
    } else {
      for (const auto& p : cell.points) pts.push_back(p.location);
    }
  }
  return bounding_box(pts);
}

PrecomputedGrid gp_build_grid(const std::map<TowerId, GpTowerModel>& models, const Rect& bounds,
                              double spacing, const GeoPoint& origin) {
  PrecomputedGrid grid;
  grid.origin = origin;
  grid.points = lattice(bounds, spacing);
  for (const auto& [id, model] : models) {
    GpTowerField field;
    field.id = id;
    field.noise_variance = model.hyper().sigma_n2;
    const auto pred = model.predict(grid.points);
    field.mean.reserve(pred.size());
    field.variance.reserve(pred.size());
    for (const auto& p : pred) {
      field.mean.push_back(p.mean);
      field.variance.push_back(p.variance);
    }
    grid.towers.push_back(std::move(field));
  }
  return grid;
}

LocationEstimate gp_locate(const PrecomputedGrid& grid, ScanWindow window) {
  if (grid.points.empty()) {
    throw PreconditionError("GP grid has no points");
  }
  const std::size_t np = grid.points.size();
  std::vector<double> ll(np, 0.0);
  bool any = false;
  for (const auto& scan : window) {
    for (const auto& [id, asu] : scan.readings) {
      const GpTowerField* field = grid.find(id);
      if (field == nullptr) continue;
      any = true;
      const double x = asu.value();
      for (std::size_t p = 0; p < np; ++p) {
        const double s2 = field->variance[p] + field->noise_variance;
        const double r = x - field->mean[p];
        ll[p] += -0.5 * (kLog2Pi + std::log(s2) + r * r / s2);
      }
    }
  }
  if (!any) {
    throw DataError("none of the observed towers has a GP model");
  }
  const double top = *std::max_element(ll.begin(), ll.end());
  double total = 0.0;
  PlanarPoint acc;
  for (std::size_t p = 0; p < np; ++p) {
    const double w = std::exp(ll[p] - top);
    total += w;
    acc.x += w * grid.points[p].x;
    acc.y += w * grid.points[p].y;
  }
  LocationEstimate est;
  est.location = {acc.x / total, acc.y / total};
  est.log_score = top;
  return est;
}

}  // namespace cellsense
