#include "laker/precond.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "laker/rng.hpp"

namespace laker {

namespace {

constexpr int kMaxRedraws = 8;

}  // namespace

void CccpConfig::validate() const {
  if (!(gamma >= 0.0)) throw Error(ErrorCode::InvalidConfig, "gamma must be >= 0");
  if (!(epsilon >= 0.0)) throw Error(ErrorCode::InvalidConfig, "epsilon must be >= 0");
  if (!(rho_floor >= 0.0 && rho_floor <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "rho_floor must lie in [0, 1]");
  }
  if (max_iters < 1) throw Error(ErrorCode::InvalidConfig, "max_iters must be >= 1");
  if (!(fp_tol > 0.0 && fp_tol < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "fp_tol must lie in (0, 1)");
  }
  if (num_directions && *num_directions < 1) {
    throw Error(ErrorCode::InvalidConfig, "num_directions must be >= 1");
  }
}

Index nr_schedule(Index n) {
  if (n < 1) throw Error(ErrorCode::InvalidInput, "nr_schedule: n must be >= 1");
  const auto sqrt_term = static_cast<Index>(std::ceil(8.0 * std::sqrt(static_cast<double>(n))));
  const Index linear_term = (n + 3) / 4;
  return std::min(n, std::max(sqrt_term, linear_term));
}

DirectionSet sample_directions(const SystemOperator& op, Index num_directions,
                               std::uint64_t seed) {
  if (num_directions < 1) {
    throw Error(ErrorCode::InvalidInput, "sample_directions: N_r must be >= 1");
  }
  const Index n = op.dim;
  std::vector<CounterRng> streams;
  streams.reserve(static_cast<std::size_t>(num_directions));
  Matrix Z(n, num_directions);
  for (Index k = 0; k < num_directions; ++k) {
    auto& rng = streams.emplace_back(seed, static_cast<std::uint64_t>(k));
    for (Index i = 0; i < n; ++i) Z(i, k) = rng.normal();
  }

  DirectionSet out;
  out.directions = op.apply(Z);
  if (out.directions.rows() != n || out.directions.cols() != num_directions) {
    throw Error(ErrorCode::DimensionMismatch, "sample_directions: operator returned wrong shape");
  }
  for (Index k = 0; k < num_directions; ++k) {
    double norm = out.directions.col(k).norm();
    for (int attempt = 0; !(norm >= 1e-300) && attempt < kMaxRedraws; ++attempt) {
      Vector z(n);
      for (Index i = 0; i < n; ++i) z(i) = streams[static_cast<std::size_t>(k)].normal();
      out.directions.col(k) = op(z);
      norm = out.directions.col(k).norm();
      ++out.resampled;
    }
    if (!(norm >= 1e-300)) {
      throw Error(ErrorCode::DegenerateDirection,
                  "direction " + std::to_string(k) + " stayed degenerate after " +
                      std::to_string(kMaxRedraws) + " redraws");
    }
    out.directions.col(k) /= norm;
  }
  return out;
}

DirectionSet sample_directions(const AttentionKernelSystem& sys, Index num_directions,
                               std::uint64_t seed) {
  return sample_directions(sys.as_operator(), num_directions, seed);
}

double rho_schedule(Index num_directions, Index n, double gamma, double min_eig_sigma,
                    double rho_floor) {
  if (num_directions < 1 || n < 1) {
    throw Error(ErrorCode::InvalidInput, "rho_schedule: N_r and n must be >= 1");
  }
  double rho = rho_floor;
  if (num_directions < n) {
    const double undersampling = 1.0 - static_cast<double>(num_directions) / static_cast<double>(n);
    rho = rho_floor + 0.5 * undersampling * std::min(1.0, 10.0 * gamma);
    rho = std::clamp(rho, rho_floor, 0.9);
  }
  if (min_eig_sigma < kRhoEigTrigger) rho = std::max(rho, 0.2);
  return rho;
}

SigmaEstimate cccp_step(const SigmaEstimate& current, const DirectionSet& U,
                        const CccpConfig& cfg, double rho) {
  const Matrix& sigma = current.sigma;
  const Index n = sigma.rows();
  if (U.dim() != n) {
    throw Error(ErrorCode::DimensionMismatch, "cccp_step: directions have length " +
                                                  std::to_string(U.dim()) + ", Sigma is " +
                                                  std::to_string(n));
  }
  if (!(rho >= 0.0 && rho <= 1.0)) throw Error(ErrorCode::InvalidInput, "rho must lie in [0, 1]");

  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "cccp_step: Sigma_t failed Cholesky");
  }
  // u^T Sigma^{-1} u = |L^{-1} u|^2
  const Matrix whitened = llt.matrixL().solve(U.directions);
  const Vector quad = whitened.colwise().squaredNorm().transpose();

  const double n_over_nr = static_cast<double>(n) / static_cast<double>(U.count());
  Vector root_weights(U.count());
  for (Index k = 0; k < U.count(); ++k) {
    root_weights(k) = std::sqrt(n_over_nr / (quad(k) + cfg.epsilon));
  }
  const Matrix scaled = U.directions * root_weights.asDiagonal();

  Matrix F = Matrix::Zero(n, n);
  F.selfadjointView<Eigen::Lower>().rankUpdate(scaled);
  F = F.selfadjointView<Eigen::Lower>();
  F.diagonal().array() += cfg.gamma;
  F /= 1.0 + cfg.gamma / static_cast<double>(n);

  SigmaEstimate next;
  next.sigma = (1.0 - rho) * F;
  next.sigma.diagonal().array() += rho;
  next.shrunk_trace = next.sigma.trace();
  const double normalize = static_cast<double>(n) / next.shrunk_trace;
  next.sigma *= normalize;
  next.trace_normalized = true;
  next.rho = rho;
  const double damp = 1.0 / (1.0 + cfg.gamma / static_cast<double>(n));
  next.factor = scaled;
  next.factor_scale = (1.0 - rho) * damp * normalize;
  next.shift = ((1.0 - rho) * damp * cfg.gamma + rho) * normalize;
  return next;
}

Preconditioner::Preconditioner(const SigmaEstimate& sigma, CccpReport report) : report_(report) {
  const Index n = sigma.sigma.rows();
  if (n == 0 || sigma.sigma.cols() != n) {
    throw Error(ErrorCode::InvalidInput, "preconditioner: Sigma must be a non-empty square matrix");
  }
  const Index r = sigma.factor.cols();
  if (r > 0 && 2 * r < n && sigma.factor.rows() == n && sigma.shift > 0.0 && sigma.factor_scale >= 0.0) {
    // factor = Q R, so factor factor^T = Q (R R^T) Q^T.
    const Eigen::HouseholderQR<Matrix> qr(sigma.factor);
    const Matrix Q = qr.householderQ() * Matrix::Identity(n, r);
    const Matrix R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    Matrix small = R * R.transpose();
    small = (0.5 * (small + small.transpose())).eval();
    const EigenDecomposition core = sym_eig(small);
    low_rank_ = true;
    iso_ = sigma.shift;
    basis_ = Q * core.eigenvectors;
    values_ = (sigma.factor_scale * core.eigenvalues.array().max(0.0) + sigma.shift).matrix();
  } else {
    EigenDecomposition eig = sym_eig(sigma.sigma);
    const double lo = eig.min();
    const double tol = 1e-8 * std::abs(lo) + 64.0 * std::numeric_limits<double>::epsilon() * std::abs(eig.max());
    Index isotropic = 0;
    while (isotropic < n && eig.eigenvalues(isotropic) - lo <= tol) ++isotropic;
    const Index rank = n - isotropic;
    if (2 * rank < n) {
      low_rank_ = true;
      iso_ = lo;
      basis_ = eig.eigenvectors.rightCols(rank);
      values_ = eig.eigenvalues.tail(rank);
    } else {
      basis_ = std::move(eig.eigenvectors);
      values_ = std::move(eig.eigenvalues);
    }
  }

  const double lo = low_rank_ && values_.size() > 0 ? std::min(iso_, values_.minCoeff())
                    : low_rank_                     ? iso_
                                                    : values_.minCoeff();
  const double hi = low_rank_ && values_.size() > 0 ? std::max(iso_, values_.maxCoeff())
                    : low_rank_                     ? iso_
                                                    : values_.maxCoeff();
  if (!(lo > kEigenFloor * hi)) {
    throw Error(ErrorCode::NotPositiveDefinite,
                "learned Sigma has smallest eigenvalue " + std::to_string(lo));
  }
  report_.min_eig_sigma = lo;
  if (low_rank_) coeffs_ = (values_.array().rsqrt() - 1.0 / std::sqrt(iso_)).matrix();
  matrix_ = sigma_function([](double w) { return 1.0 / std::sqrt(w); });
}

Vector Preconditioner::sigma_eigenvalues() const {
  const Index n = matrix_.rows();
  if (!low_rank_) return values_;
  Vector all(n);
  all.head(n - values_.size()).setConstant(iso_);
  all.tail(values_.size()) = values_;
  std::sort(all.data(), all.data() + n);
  return all;
}

Vector Preconditioner::apply(const Vector& v) const {
  if (v.size() != matrix_.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "preconditioner apply: wrong vector length");
  }
  if (!low_rank_) return matrix_ * v;
  const Vector projected = coeffs_.cwiseProduct(basis_.transpose() * v);
  Vector out = v / std::sqrt(iso_);
  out.noalias() += basis_ * projected;
  return out;
}

double Preconditioner::apply_flops() const {
  const auto n = static_cast<double>(matrix_.rows());
  if (!low_rank_) return 2.0 * n * n;
  const auto r = static_cast<double>(basis_.cols());
  return 4.0 * n * r + r + 2.0 * n;
}

double Preconditioner::condition_number(const Matrix& A) const {
  if (A.rows() != matrix_.rows() || A.cols() != matrix_.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "preconditioner condition number: size mismatch");
  }
  const Matrix half = sigma_function([](double w) { return std::pow(w, -0.25); });
  Matrix similar = half * A * half;
  similar = (0.5 * (similar + similar.transpose())).eval();
  return condition_number_from(sym_eigenvalues(similar));
}

std::pair<Preconditioner, CccpReport> learn_preconditioner(const SystemOperator& op,
                                                           const CccpConfig& cfg) {
  cfg.validate();
  const Index n = op.dim;
  if (n < 1) throw Error(ErrorCode::InvalidInput, "learn_preconditioner: empty operator");
  const Index nr = cfg.num_directions.value_or(nr_schedule(n));
  const DirectionSet U = sample_directions(op, nr, cfg.seed);

  SigmaEstimate sigma;
  sigma.sigma = Matrix::Identity(n, n);
  sigma.trace_normalized = true;
  sigma.shrunk_trace = static_cast<double>(n);
  SigmaEstimate best = sigma;
  double best_residual = std::numeric_limits<double>::infinity();
  double min_eig = 1.0;

  CccpReport report;
  report.nr_used = nr;
  report.resampled_directions = U.resampled;
  for (int t = 0; t < cfg.max_iters; ++t) {
    const double rho = rho_schedule(nr, n, cfg.gamma, min_eig, cfg.rho_floor);
    SigmaEstimate next = cccp_step(sigma, U, cfg, rho);
    const double residual = (next.sigma - sigma.sigma).norm() / sigma.sigma.norm();
    sigma = std::move(next);
    report.iterations = t + 1;
    report.rho_used = rho;

    // Shrinkage bounds the spectrum from below by rho n / tr(shrunk); only pay
    // for an eigensolve when that bound cannot rule out the trigger.
    const double bound = rho * static_cast<double>(n) / sigma.shrunk_trace;
    min_eig = bound >= kRhoEigTrigger ? bound : sym_eigenvalues(sigma.sigma)(0);

    if (residual < best_residual) {
      best_residual = residual;
      best = sigma;
    }
    report.final_fp_residual = residual;
    if (residual <= cfg.fp_tol) {
      report.converged = true;
      break;
    }
  }
  if (!report.converged) {
    report.final_fp_residual = best_residual;
    report.rho_used = best.rho;
  }

  Preconditioner P(report.converged ? sigma : best, report);
  report = P.source_report();
  return {std::move(P), report};
}

std::pair<Preconditioner, CccpReport> learn_preconditioner(const AttentionKernelSystem& sys,
                                                           const CccpConfig& cfg) {
  return learn_preconditioner(sys.as_operator(), cfg);
}

}  // namespace laker
