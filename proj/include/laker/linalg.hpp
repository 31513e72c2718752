#pragma once

#include <Eigen/Dense>

#include <string_view>

#include "laker/error.hpp"

namespace laker {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Eigenpairs of a symmetric matrix. Eigenvalues ascending, eigenvectors
/// stored as orthonormal columns in matching order.
struct EigenDecomposition {
  Vector eigenvalues;
  Matrix eigenvectors;

  Index dim() const { return eigenvalues.size(); }
  double min() const { return eigenvalues(0); }
  double max() const { return eigenvalues(eigenvalues.size() - 1); }
};

// Relative threshold below which spd_inv_sqrt refuses a matrix: w_min <= kEigenFloor * w_max.
inline constexpr double kEigenFloor = 1e-14;

// Throws InvalidInput unless A is square, finite and symmetric to
// |A_ij - A_ji| <= 1e-12 * max(1, |A_ij|).
void require_symmetric(const Matrix& A, std::string_view what);

/// Solves A x = y through a Cholesky factorization. Throws NotPositiveDefinite
/// when a pivot is not strictly positive.
Vector chol_solve(const Matrix& A, const Vector& y);

/// Symmetric eigendecomposition (Householder tridiagonalisation + implicit QL).
EigenDecomposition sym_eig(const Matrix& A);

/// Eigenvalues only, ascending. Cheaper than sym_eig when vectors are not needed.
Vector sym_eigenvalues(const Matrix& A);

/// P = V diag(w^{-1/2}) V^T for SPD S.
Matrix spd_inv_sqrt(const Matrix& S);

/// V diag(f(w)) V^T for an existing decomposition.
template <typename F>
Matrix spectral_function(const EigenDecomposition& eig, F&& f) {
  Vector fw = eig.eigenvalues.unaryExpr(f);
  Matrix scaled = eig.eigenvectors * fw.asDiagonal();
  Matrix out = scaled * eig.eigenvectors.transpose();
  return 0.5 * (out + out.transpose());
}

// Ratio of extreme eigenvalues. Throws NotPositiveDefinite if w_min <= 0.
double condition_number_spd(const Matrix& A);

// Condition number of the ascending eigenvalue vector `w`.
double condition_number_from(const Vector& w);

/// kappa(PA) evaluated on the similar SPD matrix P^{1/2} A P^{1/2}.
double precond_condition_number(const Matrix& P, const Matrix& A);

// Same quantity when the eigendecomposition of P is already known.
double precond_condition_number(const EigenDecomposition& P_eig, const Matrix& A);

}  // namespace laker
