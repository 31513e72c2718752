#include "laker/kernel.hpp"

#include <cmath>
#include <string>

#include "laker/rng.hpp"

namespace laker {

namespace {

constexpr std::uint64_t kEmbeddingStream = 0x454d4245ULL;  // "EMBE"
constexpr int kProbeCols = 32;
constexpr int kProbeRows = 16;

void require_same_length(Index a, Index b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": " + std::to_string(a) +
                                                  " vs " + std::to_string(b));
  }
}

}  // namespace

void require_in_domain(const PositionSet& positions) {
  if (positions.empty()) throw Error(ErrorCode::InvalidInput, "position set is empty");
  for (const auto& p : positions) {
    if (!(p.x >= 0.0 && p.x <= kDomainSize && p.y >= 0.0 && p.y <= kDomainSize)) {
      throw Error(ErrorCode::InvalidInput, "position (" + std::to_string(p.x) + ", " +
                                               std::to_string(p.y) + ") lies outside the domain");
    }
  }
}

void EmbeddingConfig::validate() const {
  if (dim < 2) throw Error(ErrorCode::InvalidConfig, "embedding dim must be >= 2");
  if (dim % 2 != 0) {
    throw Error(ErrorCode::InvalidConfig, "embedding dim must be even (features pair sin/cos)");
  }
  if (!(length_scale > 0.0)) throw Error(ErrorCode::InvalidConfig, "length_scale must be > 0");
  if (!(target_mean_affinity > 0.0 && target_mean_affinity < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "target_mean_affinity must lie in (0, 1)");
  }
}

PositionSet FourierEmbedding::probe_lattice() {
  PositionSet probe;
  probe.reserve(kProbeCols * kProbeRows);
  for (int r = 0; r < kProbeRows; ++r) {
    for (int c = 0; c < kProbeCols; ++c) {
      probe.push_back({(c + 0.5) * kDomainSize / kProbeCols, (r + 0.5) * kDomainSize / kProbeRows});
    }
  }
  return probe;
}

FourierEmbedding::FourierEmbedding(const EmbeddingConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int half = cfg_.dim / 2;
  freqs_.resize(half, 2);
  phases_.resize(half);
  CounterRng rng(cfg_.seed, kEmbeddingStream);
  for (int j = 0; j < half; ++j) {
    freqs_(j, 0) = rng.normal() / cfg_.length_scale;
    freqs_(j, 1) = rng.normal() / cfg_.length_scale;
  }
  for (int j = 0; j < half; ++j) phases_(j) = rng.uniform(0.0, 2.0 * std::numbers::pi);

  // Pairwise statistics of the unit features on the probe lattice. With
  // u = 1/sqrt(dim) * ones, the mean affinity over distinct pairs is
  //   s^2 a + m^2 + s m b,
  // a = mean <phi_i, phi_j>, b = 2 mean <phi_i, u>.
  const PositionSet probe = probe_lattice();
  const auto count = static_cast<double>(probe.size());
  Vector sum = Vector::Zero(cfg_.dim);
  Vector feat(cfg_.dim);
  double along_ones = 0.0;
  const double inv_sqrt_dim = 1.0 / std::sqrt(static_cast<double>(cfg_.dim));
  for (const auto& p : probe) {
    unit_features(p, feat);
    sum += feat;
    along_ones += feat.sum() * inv_sqrt_dim;
  }
  const double a = (sum.squaredNorm() - count) / (count * (count - 1.0));
  const double b = 2.0 * along_ones / count;
  const double target = cfg_.target_mean_affinity;
  auto affinity = [&](double s, double m) { return s * s * a + m * m + s * m * b; };

  if (a >= target) {
    offset_ = 0.0;
    scale_ = std::sqrt(target / a);
  } else {
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
      const double mid = 0.5 * (lo + hi);
      (affinity(1.0 - mid, mid) < target ? lo : hi) = mid;
    }
    offset_ = 0.5 * (lo + hi);
    scale_ = 1.0 - offset_;
  }
  probe_affinity_ = affinity(scale_, offset_);
}

double FourierEmbedding::probe_mean_affinity() const { return probe_affinity_; }

void FourierEmbedding::unit_features(const Point2& x, Eigen::Ref<Vector> out) const {
  const Index half = freqs_.rows();
  for (Index j = 0; j < half; ++j) {
    const double arg = freqs_(j, 0) * x.x + freqs_(j, 1) * x.y + phases_(j);
    out(j) = std::sin(arg);
    out(half + j) = std::cos(arg);
  }
  // sin^2 + cos^2 = 1 per pair, so |phi| = sqrt(dim/2); normalise anyway.
  out /= out.norm();
}

void FourierEmbedding::embed(const Point2& x, Eigen::Ref<Vector> out) const {
  unit_features(x, out);
  const double shift = offset_ / std::sqrt(static_cast<double>(cfg_.dim));
  out = scale_ * out;
  out.array() += shift;
}

Matrix FourierEmbedding::embed(const PositionSet& xs) const {
  Matrix E(static_cast<Index>(xs.size()), cfg_.dim);
  Vector row(cfg_.dim);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    embed(xs[i], row);
    E.row(static_cast<Index>(i)) = row.transpose();
  }
  return E;
}

EmbeddingMatrix embed_positions(const PositionSet& positions, const EmbeddingConfig& cfg) {
  require_in_domain(positions);
  const FourierEmbedding map(cfg);
  return {map.embed(positions), cfg};
}

Matrix attention_kernel(const Matrix& E) {
  if (!E.allFinite()) throw Error(ErrorCode::InvalidInput, "embedding has non-finite entries");
  Matrix G = E * E.transpose();
  const Index n = G.rows();
  for (Index j = 0; j < n; ++j) {
    for (Index i = j; i < n; ++i) {
      const double v = std::exp(G(i, j));
      G(i, j) = v;
      G(j, i) = v;
    }
  }
  return G;
}

Vector cross_kernel(const Matrix& E_train, const Vector& e_query) {
  require_same_length(E_train.cols(), e_query.size(), "cross_kernel embedding width");
  return (E_train * e_query).array().exp().matrix();
}

AttentionKernelSystem::AttentionKernelSystem(Matrix G, double lambda)
    : G_(std::move(G)), lambda_(lambda) {
  if (!(lambda_ > 0.0)) throw Error(ErrorCode::InvalidInput, "lambda must be > 0");
  require_symmetric(G_, "attention kernel");
}

Matrix AttentionKernelSystem::regularized() const {
  Matrix A = G_;
  A.diagonal().array() += lambda_;
  return A;
}

Vector AttentionKernelSystem::apply(const Vector& v) const {
  require_same_length(v.size(), dim(), "operator_apply");
  Vector out = G_ * v;
  out += lambda_ * v;
  return out;
}

Matrix AttentionKernelSystem::apply(const Matrix& V) const {
  require_same_length(V.rows(), dim(), "operator_apply");
  Matrix out = G_ * V;
  out += lambda_ * V;
  return out;
}

SystemOperator AttentionKernelSystem::as_operator() const {
  return {dim(), lambda_, [this](const Matrix& V) { return apply(V); }};
}

Vector operator_apply(const AttentionKernelSystem& sys, const Vector& v) { return sys.apply(v); }

double objective_from_image(const Vector& G_alpha, const Vector& alpha, const Vector& y,
                            double lambda) {
  return (G_alpha - y).squaredNorm() + lambda * alpha.dot(G_alpha);
}

double objective(const AttentionKernelSystem& sys, const Vector& alpha, const Vector& y) {
  require_same_length(alpha.size(), sys.dim(), "objective alpha");
  require_same_length(y.size(), sys.dim(), "objective y");
  const Vector G_alpha = sys.kernel() * alpha;
  return objective_from_image(G_alpha, alpha, y, sys.lambda());
}

Vector objective_gradient(const AttentionKernelSystem& sys, const Vector& alpha, const Vector& y) {
  require_same_length(alpha.size(), sys.dim(), "objective_gradient alpha");
  require_same_length(y.size(), sys.dim(), "objective_gradient y");
  const Vector residual = sys.apply(alpha) - y;
  return 2.0 * (sys.kernel() * residual);
}

}  // namespace laker
