#include "laker/cartography.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "laker/csv.hpp"
#include "laker/rng.hpp"

namespace laker {

namespace {

constexpr std::uint64_t kTransmitterStream = 1;
constexpr std::uint64_t kShadowingStream = 2;
constexpr std::uint64_t kPositionStream = 3;
constexpr std::uint64_t kNoiseStream = 4;

double squared_distance(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

double safe_ratio(double num, double den, const char* what) {
  if (den == 0.0) throw Error(ErrorCode::ZeroDenominator, std::string(what) + ": zero denominator");
  return num / den;
}

Matrix rq_gram(const PositionSet& a, const PositionSet& b, const GprtConfig& cfg) {
  Matrix K(static_cast<Index>(a.size()), static_cast<Index>(b.size()));
  for (Index j = 0; j < K.cols(); ++j) {
    for (Index i = 0; i < K.rows(); ++i) {
      K(i, j) = rq_kernel(squared_distance(a[static_cast<std::size_t>(i)],
                                           b[static_cast<std::size_t>(j)]),
                          cfg);
    }
  }
  return K;
}

}  // namespace

void FieldConfig::validate() const {
  if (num_transmitters < 1) throw Error(ErrorCode::InvalidConfig, "num_transmitters must be >= 1");
  if (!(power_range_db >= 0.0)) throw Error(ErrorCode::InvalidConfig, "power_range_db must be >= 0");
  if (!std::isfinite(power_min_dbm)) throw Error(ErrorCode::InvalidConfig, "power_min_dbm must be finite");
  if (!(path_loss_exponent > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "path_loss_exponent must be > 0");
  }
  if (!(shadowing_std_db >= 0.0)) throw Error(ErrorCode::InvalidConfig, "shadowing_std_db must be >= 0");
  if (!(shadowing_length_m > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "shadowing_length_m must be > 0");
  }
  if (shadowing_terms < 1) throw Error(ErrorCode::InvalidConfig, "shadowing_terms must be >= 1");
}

RadioFieldModel generate_field(const FieldConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  RadioFieldModel model;
  CounterRng tx_rng(seed, kTransmitterStream);
  for (int t = 0; t < cfg.num_transmitters; ++t) {
    Transmitter tx;
    tx.position = {tx_rng.uniform(0.0, kDomainSize), tx_rng.uniform(0.0, kDomainSize)};
    const double dbm = cfg.power_min_dbm + cfg.power_range_db * tx_rng.uniform();
    tx.power_mw = std::pow(10.0, dbm / 10.0);
    tx.path_loss_exponent = cfg.path_loss_exponent;
    model.transmitters.push_back(tx);
  }

  // A cosine with uniform phase has variance 1/2, so K terms scaled by
  // sigma sqrt(2/K) give standard deviation sigma.
  CounterRng sh_rng(seed, kShadowingStream);
  for (int k = 0; k < cfg.shadowing_terms; ++k) {
    ShadowingWave w;
    w.kx = sh_rng.normal() / cfg.shadowing_length_m;
    w.ky = sh_rng.normal() / cfg.shadowing_length_m;
    w.phase = sh_rng.uniform(0.0, 2.0 * std::numbers::pi);
    model.shadowing.push_back(w);
  }
  model.shadowing_amplitude =
      cfg.shadowing_std_db * std::sqrt(2.0 / static_cast<double>(cfg.shadowing_terms));
  return model;
}

double field_value(const RadioFieldModel& model, const Point2& x) {
  double power = 0.0;
  for (const auto& tx : model.transmitters) {
    const double d = std::sqrt(squared_distance(x, tx.position));
    power += tx.power_mw / std::pow(1.0 + d, tx.path_loss_exponent);
  }
  double shadow = 0.0;
  if (model.shadowing_amplitude != 0.0) {
    for (const auto& w : model.shadowing) shadow += std::cos(w.kx * x.x + w.ky * x.y + w.phase);
    shadow *= model.shadowing_amplitude;
  }
  return 10.0 * std::log10(power) + shadow;
}

MeasurementSet sample_measurements(const RadioFieldModel& model, Index n, double noise_std,
                                   std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidInput, "sample_measurements: n must be >= 1");
  if (!(noise_std >= 0.0)) throw Error(ErrorCode::InvalidInput, "noise_std must be >= 0");
  MeasurementSet out;
  out.noise_std = noise_std;
  out.positions.reserve(static_cast<std::size_t>(n));
  out.values.resize(n);
  CounterRng pos_rng(seed, kPositionStream);
  CounterRng noise_rng(seed, kNoiseStream);
  for (Index i = 0; i < n; ++i) {
    const Point2 p{pos_rng.uniform(0.0, kDomainSize), pos_rng.uniform(0.0, kDomainSize)};
    out.positions.push_back(p);
    const double eps = noise_rng.normal();
    out.values(i) = field_value(model, p) + noise_std * eps;
  }
  return out;
}

Point2 GridSpec::point(int row, int col) const {
  auto coord = [](int i, int count) {
    return count > 1 ? kDomainSize * i / (count - 1) : 0.5 * kDomainSize;
  };
  return {coord(col, cols), coord(row, rows)};
}

PositionSet GridSpec::points() const {
  if (rows < 1 || cols < 1) throw Error(ErrorCode::InvalidConfig, "grid must have rows, cols >= 1");
  PositionSet out;
  out.reserve(static_cast<std::size_t>(size()));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out.push_back(point(r, c));
  }
  return out;
}

RadioMap truth_map(const RadioFieldModel& model, const GridSpec& grid) {
  const PositionSet pts = grid.points();
  RadioMap map{grid, Vector(grid.size())};
  for (std::size_t j = 0; j < pts.size(); ++j) map.values(static_cast<Index>(j)) = field_value(model, pts[j]);
  return map;
}

Vector predict_at(const EmbeddingMatrix& train, const Vector& alpha, const PositionSet& queries) {
  if (alpha.size() != train.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "predict_at: alpha has length " +
                                                  std::to_string(alpha.size()) + ", training set " +
                                                  std::to_string(train.rows()));
  }
  const EmbeddingMatrix Eq = embed_positions(queries, train.config);
  const Matrix K = (Eq.entries * train.entries.transpose()).array().exp().matrix();
  return K * alpha;
}

RadioMap reconstruct_map(const EmbeddingMatrix& train, const Vector& alpha, const GridSpec& grid) {
  return {grid, predict_at(train, alpha, grid.points())};
}

void write_map_csv(std::ostream& out, const RadioMap& map) {
  if (map.values.size() != map.grid.size()) {
    throw Error(ErrorCode::DimensionMismatch, "write_map_csv: value count does not match grid");
  }
  write_csv_header(out, {"row", "col", "x", "y", "value_dbm"});
  for (int r = 0; r < map.grid.rows; ++r) {
    for (int c = 0; c < map.grid.cols; ++c) {
      const Point2 p = map.grid.point(r, c);
      CsvRow()
          .add(r)
          .add(c)
          .add(p.x)
          .add(p.y)
          .add(map.values(static_cast<Index>(r) * map.grid.cols + c))
          .write(out);
    }
  }
}

void GprtConfig::validate() const {
  if (!(rq_alpha > 0.0)) throw Error(ErrorCode::InvalidConfig, "rq_alpha must be > 0");
  if (!(length_scale > 0.0)) throw Error(ErrorCode::InvalidConfig, "length_scale must be > 0");
  if (!(noise_var > 0.0)) throw Error(ErrorCode::InvalidConfig, "noise_var must be > 0");
}

double rq_kernel(double squared_distance, const GprtConfig& cfg) {
  return std::pow(1.0 + squared_distance / (2.0 * cfg.rq_alpha * cfg.length_scale * cfg.length_scale),
                  -cfg.rq_alpha);
}

Vector gprt_fit_predict(const PositionSet& X, const Vector& y, const PositionSet& queries,
                        const GprtConfig& cfg) {
  cfg.validate();
  if (X.empty()) throw Error(ErrorCode::InvalidInput, "gprt: no training points");
  if (static_cast<Index>(X.size()) != y.size()) {
    throw Error(ErrorCode::DimensionMismatch, "gprt: " + std::to_string(X.size()) +
                                                  " positions vs " + std::to_string(y.size()) +
                                                  " targets");
  }
  const double mean = cfg.center_targets ? y.mean() : 0.0;
  Matrix K = rq_gram(X, X, cfg);
  K.diagonal().array() += std::max(cfg.noise_var, kGprtNoiseFloor);
  const Vector beta = chol_solve(K, (y.array() - mean).matrix());
  Vector out = rq_gram(queries, X, cfg) * beta;
  out.array() += mean;
  return out;
}

RadioMap gprt_fit_predict(const PositionSet& X, const Vector& y, const GridSpec& grid,
                          const GprtConfig& cfg) {
  return {grid, gprt_fit_predict(X, y, grid.points(), cfg)};
}

GprtConfig tune_gprt(const FieldConfig& field_cfg, double noise_std, std::uint64_t seed,
                     const GridSpec& grid) {
  const RadioFieldModel model = generate_field(field_cfg, seed);
  const MeasurementSet meas = sample_measurements(model, 200, noise_std, seed);
  const RadioMap truth = truth_map(model, grid);
  const PositionSet queries = grid.points();

  GprtConfig best;
  double best_rmse = std::numeric_limits<double>::infinity();
  for (double ell : {10.0, 20.0, 40.0}) {
    for (double var : {0.5, 2.25, 4.0}) {
      GprtConfig cfg;
      cfg.length_scale = ell;
      cfg.noise_var = var;
      const RadioMap est{grid, gprt_fit_predict(meas.positions, meas.values, queries, cfg)};
      const double rmse = map_metrics(est, truth).rmse;
      if (rmse < best_rmse) {
        best_rmse = rmse;
        best = cfg;
      }
    }
  }
  return best;
}

NumericalMetrics numerical_metrics(const AttentionKernelSystem& sys, const Vector& alpha,
                                   const Vector& alpha_ref, const Vector& y) {
  const Index n = sys.dim();
  if (alpha.size() != n || alpha_ref.size() != n || y.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "evaluate: vector lengths do not match the system");
  }
  const Matrix& G = sys.kernel();
  const Vector G_alpha = G * alpha;
  const Vector G_ref = G * alpha_ref;
  NumericalMetrics m;
  m.residual = safe_ratio((G_alpha + sys.lambda() * alpha - y).norm(), y.norm(), "residual");
  const double r_ref = objective_from_image(G_ref, alpha_ref, y, sys.lambda());
  const double r = objective_from_image(G_alpha, alpha, y, sys.lambda());
  m.obj_gap = safe_ratio(std::abs(r - r_ref), std::abs(r_ref), "objective gap");
  m.pred_disc = safe_ratio((G_alpha - G_ref).norm(), G_ref.norm(), "prediction discrepancy");
  return m;
}

MapMetrics map_metrics(const RadioMap& estimate, const RadioMap& truth) {
  if (estimate.values.size() != truth.values.size()) {
    throw Error(ErrorCode::DimensionMismatch, "map_metrics: maps have different sizes");
  }
  const double sse = (estimate.values - truth.values).squaredNorm();
  const auto M = static_cast<double>(truth.values.size());
  if (M == 0.0) throw Error(ErrorCode::ZeroDenominator, "map_metrics: empty map");
  return {std::sqrt(sse / M), safe_ratio(sse, truth.values.squaredNorm(), "nmse")};
}

MetricsRecord evaluate(const AttentionKernelSystem& sys, const Vector& alpha,
                       const Vector& alpha_ref, const Vector& y, const RadioMap& map_hat,
                       const RadioMap& truth, const SolveReport* report) {
  const NumericalMetrics num = numerical_metrics(sys, alpha, alpha_ref, y);
  const MapMetrics map = map_metrics(map_hat, truth);
  MetricsRecord rec;
  rec.obj_gap = num.obj_gap;
  rec.residual = num.residual;
  rec.pred_disc = num.pred_disc;
  rec.rmse = map.rmse;
  rec.nmse = map.nmse;
  if (report) {
    rec.iters_to_target = report->iters_to_target;
    rec.solver_time_s = report->wall_time_s;
  }
  return rec;
}

}  // namespace laker
