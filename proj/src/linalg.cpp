#include "laker/linalg.hpp"

#include <cmath>
#include <string>

namespace laker {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::DegenerateDirection: return "DegenerateDirection";
    case ErrorCode::IndefinitePreconditioner: return "IndefinitePreconditioner";
    case ErrorCode::BreakdownZeroCurvature: return "BreakdownZeroCurvature";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::EmptyRows: return "EmptyRows";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

void require_symmetric(const Matrix& A, std::string_view what) {
  if (A.rows() != A.cols() || A.rows() == 0) {
    throw Error(ErrorCode::InvalidInput, std::string(what) + " must be a non-empty square matrix");
  }
  if (!A.allFinite()) {
    throw Error(ErrorCode::InvalidInput, std::string(what) + " has non-finite entries");
  }
  for (Index j = 0; j < A.cols(); ++j) {
    for (Index i = j + 1; i < A.rows(); ++i) {
      const double a = A(i, j);
      if (std::abs(a - A(j, i)) > 1e-12 * std::max(1.0, std::abs(a))) {
        throw Error(ErrorCode::InvalidInput,
                    std::string(what) + " is not symmetric at (" + std::to_string(i) + ", " +
                        std::to_string(j) + ")");
      }
    }
  }
}

Vector chol_solve(const Matrix& A, const Vector& y) {
  if (A.rows() != A.cols() || A.rows() != y.size()) {
    throw Error(ErrorCode::DimensionMismatch, "chol_solve: matrix is " + std::to_string(A.rows()) +
                                                  "x" + std::to_string(A.cols()) +
                                                  ", rhs has length " + std::to_string(y.size()));
  }
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "chol_solve: Cholesky pivot <= 0");
  }
  return llt.solve(y);
}

EigenDecomposition sym_eig(const Matrix& A) {
  require_symmetric(A, "sym_eig input");
  Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::NoConvergence, "sym_eig: QL iteration did not converge");
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

Vector sym_eigenvalues(const Matrix& A) {
  require_symmetric(A, "sym_eigenvalues input");
  Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::NoConvergence, "sym_eigenvalues: QL iteration did not converge");
  }
  return es.eigenvalues();
}

Matrix spd_inv_sqrt(const Matrix& S) {
  const EigenDecomposition eig = sym_eig(S);
  if (!(eig.min() > kEigenFloor * eig.max())) {
    throw Error(ErrorCode::NotPositiveDefinite,
                "spd_inv_sqrt: smallest eigenvalue " + std::to_string(eig.min()) +
                    " is below the floor");
  }
  return spectral_function(eig, [](double w) { return 1.0 / std::sqrt(w); });
}

double condition_number_from(const Vector& w) {
  const double lo = w(0);
  const double hi = w(w.size() - 1);
  if (!(lo > 0.0)) {
    throw Error(ErrorCode::NotPositiveDefinite,
                "condition number: smallest eigenvalue " + std::to_string(lo) + " <= 0");
  }
  return hi / lo;
}

double condition_number_spd(const Matrix& A) { return condition_number_from(sym_eigenvalues(A)); }

double precond_condition_number(const EigenDecomposition& P_eig, const Matrix& A) {
  if (P_eig.dim() != A.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "precond_condition_number: P and A differ in size");
  }
  if (!(P_eig.min() > 0.0)) {
    throw Error(ErrorCode::NotPositiveDefinite, "precond_condition_number: P is not SPD");
  }
  const Matrix half = spectral_function(P_eig, [](double w) { return std::sqrt(w); });
  Matrix similar = half * A * half;
  similar = (0.5 * (similar + similar.transpose())).eval();
  return condition_number_from(sym_eigenvalues(similar));
}

double precond_condition_number(const Matrix& P, const Matrix& A) {
  return precond_condition_number(sym_eig(P), A);
}

}  // namespace laker
