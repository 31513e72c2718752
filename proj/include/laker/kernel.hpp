#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "laker/linalg.hpp"

namespace laker {

// Side length of the square measurement domain [0, kDomainSize]^2, metres.
inline constexpr double kDomainSize = 100.0;
inline constexpr double kDefaultLambda = 1e-2;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

using PositionSet = std::vector<Point2>;

void require_in_domain(const PositionSet& positions);

struct EmbeddingConfig {
  int dim = 10;
  std::uint64_t seed = 0;
  double length_scale = 40.0;
  double target_mean_affinity = 0.35;

  void validate() const;
  bool operator==(const EmbeddingConfig&) const = default;
};

/// Position-driven random Fourier embedding.
///
/// Raw features are phi(x) = [sin(w_j.x + b_j), cos(w_j.x + b_j)] for
/// dim/2 frequencies w_j ~ N(0, l^-2 I). Rows are mapped to
/// e(x) = s * phi(x)/|phi(x)| + m * 1/sqrt(dim) with s, m >= 0 and s + m <= 1,
/// so |e(x)| <= 1 everywhere. (s, m) is calibrated once per config so that the
/// mean pairwise affinity <e_i, e_j> over a fixed 512-point probe lattice hits
/// the configured target.
class FourierEmbedding {
 public:
  explicit FourierEmbedding(const EmbeddingConfig& cfg);

  const EmbeddingConfig& config() const { return cfg_; }
  double feature_scale() const { return scale_; }
  double mean_offset() const { return offset_; }

  void embed(const Point2& x, Eigen::Ref<Vector> out) const;
  Matrix embed(const PositionSet& xs) const;

  // Mean of <e_i, e_j> over distinct pairs of the probe lattice.
  double probe_mean_affinity() const;

  static PositionSet probe_lattice();

 private:
  void unit_features(const Point2& x, Eigen::Ref<Vector> out) const;

  EmbeddingConfig cfg_;
  Matrix freqs_;  // (dim/2) x 2
  Vector phases_;
  double scale_ = 1.0;
  double offset_ = 0.0;
  double probe_affinity_ = 0.0;
};

struct EmbeddingMatrix {
  Matrix entries;  // n x dim
  EmbeddingConfig config;

  Index rows() const { return entries.rows(); }
};

EmbeddingMatrix embed_positions(const PositionSet& positions, const EmbeddingConfig& cfg);

/// G_ij = exp(<e_i, e_j>), exactly symmetric.
Matrix attention_kernel(const Matrix& E);
inline Matrix attention_kernel(const EmbeddingMatrix& E) { return attention_kernel(E.entries); }

/// Entry i = exp(<e_query, e_i>).
Vector cross_kernel(const Matrix& E_train, const Vector& e_query);
inline Vector cross_kernel(const EmbeddingMatrix& E_train, const Vector& e_query) {
  return cross_kernel(E_train.entries, e_query);
}

/// Matrix-access view of lambda I + G. `apply` maps each column x to
/// (lambda I + G) x. Solvers and the preconditioner learner only see this, so
/// tests can substitute synthetic operators.
struct SystemOperator {
  Index dim = 0;
  double lambda = 0.0;
  std::function<Matrix(const Matrix&)> apply;

  Vector operator()(const Vector& v) const { return apply(v); }
};

/// Dense attention kernel together with its ridge parameter.
class AttentionKernelSystem {
 public:
  AttentionKernelSystem(Matrix G, double lambda);

  const Matrix& kernel() const { return G_; }
  double lambda() const { return lambda_; }
  Index dim() const { return G_.rows(); }

  Matrix regularized() const;  // lambda I + G
  Vector apply(const Vector& v) const;
  Matrix apply(const Matrix& V) const;
  SystemOperator as_operator() const;

 private:
  Matrix G_;
  double lambda_;
};

/// lambda v + G v.
Vector operator_apply(const AttentionKernelSystem& sys, const Vector& v);

/// R(alpha) = |G alpha - y|^2 + lambda alpha^T G alpha.
double objective(const AttentionKernelSystem& sys, const Vector& alpha, const Vector& y);

// Same objective when G alpha has already been formed.
double objective_from_image(const Vector& G_alpha, const Vector& alpha, const Vector& y,
                            double lambda);

/// grad R = 2 G ((G + lambda I) alpha - y).
Vector objective_gradient(const AttentionKernelSystem& sys, const Vector& alpha, const Vector& y);

}  // namespace laker
