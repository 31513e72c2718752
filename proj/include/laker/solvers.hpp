#pragma once

#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "laker/kernel.hpp"
#include "laker/linalg.hpp"

namespace laker {

struct SolverConfig {
  double pcg_tol = 1e-10;
  double target_tol = 1e-3;
  std::optional<int> max_iters;  // defaults to 10 n
  std::optional<double> eta;     // GD step; grid-searched when absent
  int gd_budget = 2000;
  // Stop as soon as the objective gap reaches target_tol (needs a reference objective).
  bool stop_at_target = false;

  void validate() const;
  int max_iters_for(Index n) const { return max_iters.value_or(static_cast<int>(10 * n)); }
};

enum class Termination { ResidualTol, TargetReached, MaxIters, Stagnation, Diverged };

std::string_view to_string(Termination t);

/// Per-iteration history of one solve. Entry k of each history describes the
/// iterate after k steps, so entry 0 is the starting point alpha = 0.
struct SolveReport {
  int iterations = 0;
  std::vector<double> residual_history;   // |y - A alpha_k| / |y|
  std::vector<double> objective_history;  // R(alpha_k)
  std::optional<int> iters_to_target;
  double wall_time_s = 0.0;
  Termination termination = Termination::MaxIters;
  int operator_applies = 0;
  int preconditioner_applies = 0;
  bool diverged = false;
};

struct SolveResult {
  Vector alpha;
  SolveReport report;
};

using PreconditionerApply = std::function<Vector(const Vector&)>;

// First k with |R_k - ref| / |ref| <= tol.
std::optional<int> first_iterate_within(const std::vector<double>& objective_history,
                                        double ref_obj, double tol);

/// Left-preconditioned conjugate gradient on (lambda I + G) alpha = y,
/// starting from alpha = 0. Exactly one operator and one preconditioner
/// application per iteration; G alpha is carried along through A p - lambda p
/// so the objective history costs no extra matrix products.
SolveResult pcg_solve(const SystemOperator& op, const Vector& y, const PreconditionerApply& P,
                      const SolverConfig& cfg, std::optional<double> ref_obj = std::nullopt);
SolveResult pcg_solve(const AttentionKernelSystem& sys, const Vector& y,
                      const PreconditionerApply& P, const SolverConfig& cfg,
                      std::optional<double> ref_obj = std::nullopt);

// d_i = 1 / (lambda + G_ii).
Vector jacobi_preconditioner(const AttentionKernelSystem& sys);

inline PreconditionerApply diagonal_apply(Vector d) {
  return [d = std::move(d)](const Vector& v) -> Vector { return d.cwiseProduct(v); };
}

inline PreconditionerApply identity_apply() {
  return [](const Vector& v) -> Vector { return v; };
}

/// Gradient descent on R(alpha) with a fixed step. Stops after gd_budget
/// iterations, on divergence (R > 1e6 R_0), on stagnation (< 1e-14 relative
/// improvement for 50 consecutive steps), or at the target gap if configured.
SolveResult gd_solve(const AttentionKernelSystem& sys, const Vector& y, const SolverConfig& cfg,
                     std::optional<double> ref_obj = std::nullopt);

inline constexpr int kGdProbeBudget = 200;

// {1e-k, 3e-k : k = 2..8}, ascending.
std::vector<double> default_gd_grid();

/// Step with the lowest objective after kGdProbeBudget iterations; ties go to
/// the smaller step. All candidates advance together as columns of one block.
double gd_grid_search(const AttentionKernelSystem& sys, const Vector& y,
                      const std::vector<double>& grid);

/// Dense Cholesky solution of (lambda I + G) alpha = y.
Vector reference_solve(const AttentionKernelSystem& sys, const Vector& y);

}  // namespace laker
