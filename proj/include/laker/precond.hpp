#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "laker/kernel.hpp"
#include "laker/linalg.hpp"

namespace laker {

/// Unit directions u_k / |u_k| with u_k = (lambda I + G) z_k, stored as columns.
struct DirectionSet {
  Matrix directions;  // n x N_r
  int resampled = 0;  // draws replaced because |u_k| underflowed

  Index count() const { return directions.cols(); }
  Index dim() const { return directions.rows(); }
};

struct CccpConfig {
  double gamma = 1e-1;
  double epsilon = 1e-12;
  double rho_floor = 1e-3;
  int max_iters = 200;
  double fp_tol = 1e-8;
  std::uint64_t seed = 0;
  // Overrides nr_schedule(n) when set.
  std::optional<Index> num_directions;

  void validate() const;
};

struct SigmaEstimate {
  Matrix sigma;
  bool trace_normalized = false;
  // tr of the shrunk matrix before trace normalisation (0 for the initial guess).
  double shrunk_trace = 0.0;
  // rho used to produce this iterate.
  double rho = 0.0;
  // When non-empty, sigma == factor_scale * factor factor^T + shift * I exactly.
  Matrix factor;
  double factor_scale = 0.0;
  double shift = 0.0;
};

struct CccpReport {
  int iterations = 0;
  double final_fp_residual = 0.0;
  double rho_used = 0.0;
  Index nr_used = 0;
  double min_eig_sigma = 0.0;
  bool converged = false;
  int resampled_directions = 0;
};

/// P = Sigma*^{-1/2}.
///
/// The learned Sigma is (PSD of rank <= N_r) + c I, so its n - N_r smallest
/// eigenvalues coincide. Sigma is held as c I + B diag(w - c) B^T over the r
/// non-isotropic eigenvectors B, so P v = c^{-1/2} v + B diag(w^{-1/2} - c^{-1/2}) B^T v
/// costs O(n r) instead of O(n^2) whenever r < n/2. When the estimate carries
/// its low-rank factor, B comes from a thin QR of the factor and no n x n
/// eigendecomposition is needed.
class Preconditioner {
 public:
  Preconditioner(const SigmaEstimate& sigma, CccpReport report);

  const Matrix& matrix() const { return matrix_; }
  const CccpReport& source_report() const { return report_; }

  // All n eigenvalues of Sigma*, ascending.
  Vector sigma_eigenvalues() const;

  /// f(Sigma*) through the stored spectral form.
  template <typename F>
  Matrix sigma_function(F&& f) const {
    const Vector fw = values_.unaryExpr(f);
    if (!low_rank_) {
      Matrix out = basis_ * fw.asDiagonal() * basis_.transpose();
      return (0.5 * (out + out.transpose())).eval();
    }
    const double fc = f(iso_);
    Matrix out = basis_ * (fw.array() - fc).matrix().asDiagonal() * basis_.transpose();
    out = (0.5 * (out + out.transpose())).eval();
    out.diagonal().array() += fc;
    return out;
  }

  Vector apply(const Vector& v) const;
  Vector apply_dense(const Vector& v) const { return matrix_ * v; }

  // kappa(P A) via the symmetric form P^{1/2} A P^{1/2}, with P^{1/2} = Sigma^{-1/4}.
  double condition_number(const Matrix& A) const;

  bool structured() const { return low_rank_; }
  Index structured_rank() const { return basis_.cols(); }
  // Floating-point operations of one apply() call.
  double apply_flops() const;

 private:
  Matrix matrix_;
  CccpReport report_;
  bool low_rank_ = false;
  double iso_ = 0.0;  // repeated smallest eigenvalue c (low-rank form only)
  Matrix basis_;      // eigenvectors: all n (dense) or the r non-isotropic ones
  Vector values_;     // matching eigenvalues, ascending
  Vector coeffs_;     // w^{-1/2} - c^{-1/2} on basis_ (low-rank form only)
};

/// N_r = min(n, max(ceil(8 sqrt n), ceil(n/4))).
Index nr_schedule(Index n);

/// Draws N_r directions. Column k uses stream k of the key `seed`, so growing
/// N_r leaves earlier columns unchanged.
DirectionSet sample_directions(const SystemOperator& op, Index num_directions,
                               std::uint64_t seed);
DirectionSet sample_directions(const AttentionKernelSystem& sys, Index num_directions,
                               std::uint64_t seed);

// Smallest-eigenvalue level that forces extra shrinkage (trace-n scale).
inline constexpr double kRhoEigTrigger = 1e-6;

/// Shrinkage weight for the next CCCP step.
double rho_schedule(Index num_directions, Index n, double gamma, double min_eig_sigma,
                    double rho_floor = 1e-3);

/// One shrinkage-regularised CCCP update followed by trace normalisation.
SigmaEstimate cccp_step(const SigmaEstimate& current, const DirectionSet& U,
                        const CccpConfig& cfg, double rho);

std::pair<Preconditioner, CccpReport> learn_preconditioner(const SystemOperator& op,
                                                           const CccpConfig& cfg);
std::pair<Preconditioner, CccpReport> learn_preconditioner(const AttentionKernelSystem& sys,
                                                           const CccpConfig& cfg);

}  // namespace laker
