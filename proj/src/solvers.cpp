#include "laker/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

namespace laker {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr double kDivergenceFactor = 1e6;
constexpr double kStagnationRel = 1e-14;
constexpr int kStagnationWindow = 50;

}  // namespace

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::ResidualTol: return "residual_tol";
    case Termination::TargetReached: return "target_reached";
    case Termination::MaxIters: return "max_iters";
    case Termination::Stagnation: return "stagnation";
    case Termination::Diverged: return "diverged";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  if (!(pcg_tol > 0.0 && pcg_tol < 1.0)) throw Error(ErrorCode::InvalidConfig, "pcg_tol must lie in (0, 1)");
  if (!(target_tol > 0.0 && target_tol < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "target_tol must lie in (0, 1)");
  }
  if (max_iters && *max_iters < 1) throw Error(ErrorCode::InvalidConfig, "max_iters must be >= 1");
  if (eta && !(*eta > 0.0)) throw Error(ErrorCode::InvalidConfig, "eta must be > 0");
  if (gd_budget < 1) throw Error(ErrorCode::InvalidConfig, "gd_budget must be >= 1");
}

std::optional<int> first_iterate_within(const std::vector<double>& objective_history,
                                        double ref_obj, double tol) {
  if (ref_obj == 0.0) return std::nullopt;
  for (std::size_t k = 0; k < objective_history.size(); ++k) {
    if (std::abs(objective_history[k] - ref_obj) / std::abs(ref_obj) <= tol) {
      return static_cast<int>(k);
    }
  }
  return std::nullopt;
}

SolveResult pcg_solve(const SystemOperator& op, const Vector& y, const PreconditionerApply& P,
                      const SolverConfig& cfg, std::optional<double> ref_obj) {
  cfg.validate();
  const Index n = op.dim;
  if (y.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "pcg_solve: rhs length " + std::to_string(y.size()) +
                                                  " vs operator " + std::to_string(n));
  }
  const auto start = Clock::now();
  SolveResult out{Vector::Zero(n), {}};
  SolveReport& rep = out.report;
  const double y_norm = y.norm();
  rep.residual_history.push_back(y_norm > 0.0 ? 1.0 : 0.0);
  rep.objective_history.push_back(y.squaredNorm());
  if (y_norm == 0.0) {
    rep.termination = Termination::ResidualTol;
    rep.iters_to_target = 0;
    return out;
  }

  Vector& alpha = out.alpha;
  Vector G_alpha = Vector::Zero(n);
  Vector r = y;
  Vector theta = P(r);
  ++rep.preconditioner_applies;
  double r_theta = r.dot(theta);
  if (!(r_theta > 0.0)) {
    throw Error(ErrorCode::IndefinitePreconditioner, "r^T P r <= 0 at iteration 0");
  }
  Vector p = theta;

  const int max_iters = cfg.max_iters_for(n);
  rep.termination = Termination::MaxIters;
  for (int k = 0; k < max_iters; ++k) {
    const Vector Ap = op(p);
    ++rep.operator_applies;
    const double curvature = p.dot(Ap);
    if (!(curvature > 0.0)) {
      throw Error(ErrorCode::BreakdownZeroCurvature,
                  "p^T A p <= 0 at iteration " + std::to_string(k));
    }
    const double delta = r_theta / curvature;
    alpha += delta * p;
    G_alpha += delta * (Ap - op.lambda * p);
    r -= delta * Ap;

    rep.iterations = k + 1;
    const double rel_res = r.norm() / y_norm;
    const double obj = objective_from_image(G_alpha, alpha, y, op.lambda);
    rep.residual_history.push_back(rel_res);
    rep.objective_history.push_back(obj);

    if (cfg.stop_at_target && ref_obj && *ref_obj != 0.0 &&
        std::abs(obj - *ref_obj) / std::abs(*ref_obj) <= cfg.target_tol) {
      rep.termination = Termination::TargetReached;
      break;
    }
    if (rel_res <= cfg.pcg_tol) {
      rep.termination = Termination::ResidualTol;
      break;
    }

    theta = P(r);
    ++rep.preconditioner_applies;
    const double r_theta_next = r.dot(theta);
    if (!(r_theta_next > 0.0)) {
      throw Error(ErrorCode::IndefinitePreconditioner,
                  "r^T P r <= 0 at iteration " + std::to_string(k + 1));
    }
    const double beta = r_theta_next / r_theta;
    p = theta + beta * p;
    r_theta = r_theta_next;
  }

  rep.wall_time_s = seconds_since(start);
  if (ref_obj) rep.iters_to_target = first_iterate_within(rep.objective_history, *ref_obj, cfg.target_tol);
  return out;
}

SolveResult pcg_solve(const AttentionKernelSystem& sys, const Vector& y,
                      const PreconditionerApply& P, const SolverConfig& cfg,
                      std::optional<double> ref_obj) {
  return pcg_solve(sys.as_operator(), y, P, cfg, ref_obj);
}

Vector jacobi_preconditioner(const AttentionKernelSystem& sys) {
  return (sys.kernel().diagonal().array() + sys.lambda()).inverse().matrix();
}

std::vector<double> default_gd_grid() {
  std::vector<double> grid;
  for (int k = 8; k >= 2; --k) {
    const double base = std::pow(10.0, -k);
    grid.push_back(base);
    grid.push_back(3.0 * base);
  }
  return grid;
}

double gd_grid_search(const AttentionKernelSystem& sys, const Vector& y,
                      const std::vector<double>& grid) {
  if (grid.empty()) throw Error(ErrorCode::InvalidInput, "gd_grid_search: empty grid");
  if (y.size() != sys.dim()) throw Error(ErrorCode::DimensionMismatch, "gd_grid_search: rhs length");
  std::vector<double> steps = grid;
  std::sort(steps.begin(), steps.end());
  if (!(steps.front() > 0.0)) throw Error(ErrorCode::InvalidInput, "gd_grid_search: steps must be > 0");
  if (steps.size() == 1) return steps.front();

  const Matrix& G = sys.kernel();
  const double lambda = sys.lambda();
  const Index n = sys.dim();
  const auto m = static_cast<Index>(steps.size());
  const Eigen::Map<const Vector> eta(steps.data(), m);

  Matrix alpha = Matrix::Zero(n, m);
  Matrix G_alpha = Matrix::Zero(n, m);
  for (int k = 0; k < kGdProbeBudget; ++k) {
    Matrix resid = G_alpha + lambda * alpha;
    resid.colwise() -= y;
    const Matrix grad = 2.0 * (G * resid);
    alpha -= grad * eta.asDiagonal();
    G_alpha.noalias() = G * alpha;
  }

  Index best = 0;
  double best_obj = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < m; ++j) {
    double obj = objective_from_image(G_alpha.col(j), alpha.col(j), y, lambda);
    if (!std::isfinite(obj)) obj = std::numeric_limits<double>::infinity();
    if (obj < best_obj) {
      best_obj = obj;
      best = j;
    }
  }
  return steps[static_cast<std::size_t>(best)];
}

SolveResult gd_solve(const AttentionKernelSystem& sys, const Vector& y, const SolverConfig& cfg,
                     std::optional<double> ref_obj) {
  cfg.validate();
  const Index n = sys.dim();
  if (y.size() != n) throw Error(ErrorCode::DimensionMismatch, "gd_solve: rhs length");
  const double eta = cfg.eta ? *cfg.eta : gd_grid_search(sys, y, default_gd_grid());

  const auto start = Clock::now();
  const Matrix& G = sys.kernel();
  const double lambda = sys.lambda();
  const double y_norm = y.norm();

  SolveResult out{Vector::Zero(n), {}};
  SolveReport& rep = out.report;
  Vector& alpha = out.alpha;
  Vector G_alpha = Vector::Zero(n);
  const double initial = y.squaredNorm();
  rep.residual_history.push_back(y_norm > 0.0 ? 1.0 : 0.0);
  rep.objective_history.push_back(initial);
  auto reached_target = [&](double obj) {
    return ref_obj && *ref_obj != 0.0 && std::abs(obj - *ref_obj) / std::abs(*ref_obj) <= cfg.target_tol;
  };

  rep.termination = Termination::MaxIters;
  if (reached_target(initial)) {
    rep.termination = Termination::TargetReached;
  } else {
    double previous = initial;
    int stalled = 0;
    Vector resid = -y;
    for (int k = 0; k < cfg.gd_budget; ++k) {
      const Vector grad = 2.0 * (G * resid);
      alpha -= eta * grad;
      G_alpha.noalias() = G * alpha;
      rep.operator_applies += 2;
      resid = G_alpha + lambda * alpha - y;

      const double obj = objective_from_image(G_alpha, alpha, y, lambda);
      rep.iterations = k + 1;
      rep.residual_history.push_back(y_norm > 0.0 ? resid.norm() / y_norm : 0.0);
      rep.objective_history.push_back(obj);

      if (!std::isfinite(obj) || obj > kDivergenceFactor * initial) {
        rep.diverged = true;
        rep.termination = Termination::Diverged;
        break;
      }
      if (reached_target(obj)) {
        rep.termination = Termination::TargetReached;
        break;
      }
      stalled = (previous - obj < kStagnationRel * std::abs(previous)) ? stalled + 1 : 0;
      if (stalled >= kStagnationWindow) {
        rep.termination = Termination::Stagnation;
        break;
      }
      previous = obj;
    }
  }

  rep.wall_time_s = seconds_since(start);
  if (ref_obj) rep.iters_to_target = first_iterate_within(rep.objective_history, *ref_obj, cfg.target_tol);
  return out;
}

Vector reference_solve(const AttentionKernelSystem& sys, const Vector& y) {
  return chol_solve(sys.regularized(), y);
}

}  // namespace laker
