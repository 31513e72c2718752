#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "laker/kernel.hpp"
#include "laker/linalg.hpp"
#include "laker/solvers.hpp"

namespace laker {

struct Transmitter {
  Point2 position;
  double power_mw = 1.0;
  double path_loss_exponent = 2.5;
};

struct FieldConfig {
  int num_transmitters = 3;
  double power_min_dbm = -10.0;
  double power_range_db = 10.0;
  double path_loss_exponent = 2.5;
  double shadowing_std_db = 4.0;
  double shadowing_length_m = 25.0;
  int shadowing_terms = 32;

  void validate() const;
};

struct ShadowingWave {
  double kx = 0.0;
  double ky = 0.0;
  double phase = 0.0;
};

/// r(x) = 10 log10( sum_t P_t / (1 + |x - x_t|)^eta ) + s(x), with s a sum of
/// random-phase cosines scaled to the configured standard deviation.
struct RadioFieldModel {
  std::vector<Transmitter> transmitters;
  std::vector<ShadowingWave> shadowing;
  double shadowing_amplitude = 0.0;  // per-term amplitude
};

RadioFieldModel generate_field(const FieldConfig& cfg, std::uint64_t seed);

double field_value(const RadioFieldModel& model, const Point2& x);

struct MeasurementSet {
  PositionSet positions;
  Vector values;  // dBm
  double noise_std = 0.0;

  Index size() const { return values.size(); }
};

MeasurementSet sample_measurements(const RadioFieldModel& model, Index n, double noise_std,
                                   std::uint64_t seed);

/// Uniform rows x cols lattice over the domain, boundaries included.
struct GridSpec {
  int rows = 45;
  int cols = 45;

  Index size() const { return static_cast<Index>(rows) * cols; }
  Point2 point(int row, int col) const;
  PositionSet points() const;  // row-major
};

struct RadioMap {
  GridSpec grid;
  Vector values;  // row-major, dBm
};

RadioMap truth_map(const RadioFieldModel& model, const GridSpec& grid);

/// r_hat(x) = sum_i exp(<e(x), e_i>) alpha_i, evaluated at arbitrary positions.
/// Query points are embedded with the training matrix's own config.
Vector predict_at(const EmbeddingMatrix& train, const Vector& alpha, const PositionSet& queries);

RadioMap reconstruct_map(const EmbeddingMatrix& train, const Vector& alpha, const GridSpec& grid);

// Writes the map as CSV with header row,col,x,y,value_dbm.
void write_map_csv(std::ostream& out, const RadioMap& map);

// Defaults are tune_gprt(FieldConfig{}, 1.5, kGprtTuningSeed, GridSpec{}).
struct GprtConfig {
  double rq_alpha = 1.0;
  double length_scale = 20.0;
  double noise_var = 0.5;
  // Fit y - mean(y) and add the mean back to predictions.
  bool center_targets = false;

  void validate() const;
};

inline constexpr double kGprtNoiseFloor = 1e-8;
inline constexpr std::uint64_t kGprtTuningSeed = 1000;

// (1 + d^2 / (2 alpha l^2))^-alpha
double rq_kernel(double squared_distance, const GprtConfig& cfg);

/// Gaussian-process mean prediction k(x, X)(K + s^2 I)^{-1} y with a
/// spatial rational quadratic kernel.
Vector gprt_fit_predict(const PositionSet& X, const Vector& y, const PositionSet& queries,
                        const GprtConfig& cfg);
RadioMap gprt_fit_predict(const PositionSet& X, const Vector& y, const GridSpec& grid,
                          const GprtConfig& cfg);

/// Grid search over length scale {10, 20, 40} and noise variance
/// {0.5, 1.5^2, 4}, minimising map RMSE on one n = 200 realisation.
GprtConfig tune_gprt(const FieldConfig& field_cfg, double noise_std, std::uint64_t seed,
                     const GridSpec& grid);

struct MetricsRecord {
  std::optional<double> obj_gap;
  std::optional<double> residual;
  std::optional<double> pred_disc;
  std::optional<double> rmse;
  std::optional<double> nmse;
  std::optional<double> kappa_raw;
  std::optional<double> kappa_precond;
  std::optional<int> iters_to_target;
  std::optional<double> solver_time_s;
  std::optional<double> precond_time_s;
};

struct NumericalMetrics {
  double residual = 0.0;
  double obj_gap = 0.0;
  double pred_disc = 0.0;
};

NumericalMetrics numerical_metrics(const AttentionKernelSystem& sys, const Vector& alpha,
                                   const Vector& alpha_ref, const Vector& y);

struct MapMetrics {
  double rmse = 0.0;
  double nmse = 0.0;
};

MapMetrics map_metrics(const RadioMap& estimate, const RadioMap& truth);

/// Full metrics record for a coefficient-based method.
MetricsRecord evaluate(const AttentionKernelSystem& sys, const Vector& alpha,
                       const Vector& alpha_ref, const Vector& y, const RadioMap& map_hat,
                       const RadioMap& truth, const SolveReport* report = nullptr);

}  // namespace laker
