#include <gtest/gtest.h>

#include "laker/kernel.hpp"
#include "test_util.hpp"

using namespace laker;
using namespace laker::testing;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

}  // namespace

TEST(Embedding, IdenticalPointsGiveIdenticalRows) {
  const PositionSet xs = {{10, 20}, {55.5, 3}, {10, 20}};
  const EmbeddingMatrix E = embed_positions(xs, EmbeddingConfig{});
  EXPECT_EQ(E.entries.row(0), E.entries.row(2));
  EXPECT_NE(E.entries.row(0), E.entries.row(1));
}

TEST(Embedding, RowNormsAtMostOne) {
  PositionSet xs;
  for (int i = 0; i <= 40; ++i) {
    for (int j = 0; j <= 40; ++j) xs.push_back({2.5 * i, 2.5 * j});
  }
  for (std::uint64_t seed : {0ULL, 7ULL, 123ULL}) {
    EmbeddingConfig cfg;
    cfg.seed = seed;
    const EmbeddingMatrix E = embed_positions(xs, cfg);
    EXPECT_LE(E.entries.rowwise().norm().maxCoeff(), 1.0 + 1e-12);
  }
}

TEST(Embedding, DeterministicAcrossCalls) {
  const PositionSet xs = {{1, 2}, {3, 4}, {99, 0}};
  EXPECT_EQ(embed_positions(xs, {}).entries, embed_positions(xs, {}).entries);
}

TEST(Embedding, CalibrationCoefficientsAreFeasible) {
  const FourierEmbedding map{EmbeddingConfig{}};
  EXPECT_GE(map.feature_scale(), 0.0);
  EXPECT_GE(map.mean_offset(), 0.0);
  EXPECT_LE(map.feature_scale() + map.mean_offset(), 1.0 + 1e-12);
}

TEST(Embedding, ProbeAffinityHitsTarget) {
  for (double target : {0.2, 0.35, 0.6}) {
    EmbeddingConfig cfg;
    cfg.target_mean_affinity = target;
    const FourierEmbedding map(cfg);
    const Matrix E = map.embed(FourierEmbedding::probe_lattice());
    // Independent pairwise mean over distinct pairs.
    const Matrix gram = E * E.transpose();
    const auto m = static_cast<double>(E.rows());
    const double pair_mean = (gram.sum() - gram.trace()) / (m * (m - 1.0));
    EXPECT_NEAR(pair_mean, target, 0.02) << "target " << target;
    EXPECT_NEAR(map.probe_mean_affinity(), pair_mean, 1e-10);
  }
}

TEST(Embedding, RejectsOddDimension) {
  EmbeddingConfig cfg;
  cfg.dim = 5;
  EXPECT_EQ(code_of([&] { FourierEmbedding{cfg}; }), ErrorCode::InvalidConfig);
}

TEST(Embedding, RejectsOutOfDomain) {
  EXPECT_EQ(code_of([] { embed_positions({{50, 50}, {-1, 3}}, {}); }), ErrorCode::InvalidInput);
  EXPECT_EQ(code_of([] { embed_positions({{50, 100.5}}, {}); }), ErrorCode::InvalidInput);
}

TEST(AttentionKernel, WorkedExample) {
  const WorkedExample ex;
  Matrix published(3, 3);
  published << 1.291, 0.969, 1.109, 0.969, 1.133, 1.120, 1.109, 1.120, 1.189;
  const Matrix G = attention_kernel(ex.E);
  EXPECT_LE((G - published).cwiseAbs().maxCoeff(), 5e-3);
  EXPECT_EQ(G, G.transpose());
}

TEST(AttentionKernel, ZeroEmbeddingGivesAllOnes) {
  EXPECT_EQ(attention_kernel(Matrix::Zero(4, 3)), Matrix::Ones(4, 4));
}

TEST(AttentionKernel, SinglePoint) {
  Matrix E(1, 2);
  E << 0.6, 0.8;
  const Matrix G = attention_kernel(E);
  ASSERT_EQ(G.rows(), 1);
  EXPECT_NEAR(G(0, 0), std::exp(1.0), 1e-15);
}

TEST(AttentionKernel, EntriesInRangeOnDefaultEmbedding) {
  const BenchInstance inst = bench_instance(300);
  const Matrix& G = inst.sys.kernel();
  EXPECT_EQ(G, G.transpose());
  EXPECT_GT(G.minCoeff(), 0.0);
  EXPECT_LE(G.maxCoeff(), std::exp(1.0) * (1 + 1e-12));
}

TEST(CrossKernel, WorkedExample) {
  const WorkedExample ex;
  const Vector k = cross_kernel(ex.E, ex.e_star);
  EXPECT_NEAR(k(0), 1.237, 5e-3);
  EXPECT_NEAR(k(1), 1.034, 5e-3);
  EXPECT_NEAR(k(2), 1.160, 5e-3);
}

TEST(CrossKernel, ZeroQueryGivesOnes) {
  const WorkedExample ex;
  EXPECT_EQ(cross_kernel(ex.E, Vector::Zero(2)), Vector::Ones(3));
}

TEST(CrossKernel, TrainingQueryReproducesKernelRow) {
  const WorkedExample ex;
  const Matrix G = attention_kernel(ex.E);
  for (Index i = 0; i < 3; ++i) {
    const Vector k = cross_kernel(ex.E, Vector(ex.E.row(i).transpose()));
    EXPECT_LT((k - Vector(G.row(i).transpose())).norm(), 1e-15);
  }
}

TEST(CrossKernel, DimensionMismatch) {
  const WorkedExample ex;
  EXPECT_EQ(code_of([&] { cross_kernel(ex.E, Vector::Zero(3)); }), ErrorCode::DimensionMismatch);
}

TEST(OperatorApply, ZeroVector) {
  const WorkedExample ex;
  const AttentionKernelSystem sys(attention_kernel(ex.E), ex.lambda);
  EXPECT_EQ(operator_apply(sys, Vector::Zero(3)), Vector::Zero(3));
}

TEST(OperatorApply, IdentityKernel) {
  const AttentionKernelSystem sys(Matrix::Identity(2, 2), 0.5);
  const Vector out = operator_apply(sys, Vector::Ones(2));
  EXPECT_DOUBLE_EQ(out(0), 1.5);
  EXPECT_DOUBLE_EQ(out(1), 1.5);
}

TEST(OperatorApply, BasisVectorGivesDenseColumn) {
  std::mt19937_64 rng(11);
  const AttentionKernelSystem sys = random_system(25, 0.01, rng);
  Matrix dense = sys.kernel();
  dense.diagonal().array() += 0.01;
  for (Index j : {0, 7, 24}) {
    const Vector col = operator_apply(sys, Vector::Unit(25, j));
    EXPECT_LT((col - dense.col(j)).norm(), 1e-14 * dense.col(j).norm());
  }
  EXPECT_LT((sys.regularized() - dense).norm(), 1e-14 * dense.norm());
}

TEST(OperatorApply, DimensionMismatch) {
  const AttentionKernelSystem sys(Matrix::Identity(2, 2), 0.5);
  EXPECT_EQ(code_of([&] { operator_apply(sys, Vector::Ones(3)); }), ErrorCode::DimensionMismatch);
}

TEST(Objective, ZeroCoefficientsGiveSquaredNorm) {
  const WorkedExample ex;
  const AttentionKernelSystem sys(attention_kernel(ex.E), ex.lambda);
  EXPECT_NEAR(objective(sys, Vector::Zero(3), ex.y), ex.y.squaredNorm(), 1e-10);
}

TEST(Objective, IdentityKernel) {
  const AttentionKernelSystem sys(Matrix::Identity(6, 6), 1.0);
  EXPECT_DOUBLE_EQ(objective(sys, Vector::Ones(6), Vector::Ones(6)), 6.0);
}

TEST(Objective, WorkedExampleMatchesBruteForce) {
  const WorkedExample ex;
  const Matrix G = attention_kernel(ex.E);
  const AttentionKernelSystem sys(G, ex.lambda);
  const Vector alpha = chol_solve(sys.regularized(), ex.y);
  double fit = 0.0;
  double reg = 0.0;
  for (Index i = 0; i < 3; ++i) {
    double gi = 0.0;
    for (Index j = 0; j < 3; ++j) {
      gi += G(i, j) * alpha(j);
      reg += alpha(i) * G(i, j) * alpha(j);
    }
    fit += (gi - ex.y(i)) * (gi - ex.y(i));
  }
  const double brute = fit + ex.lambda * reg;
  EXPECT_NEAR(objective(sys, alpha, ex.y), brute, 1e-10 * brute);
  EXPECT_NEAR(objective_from_image(G * alpha, alpha, ex.y, ex.lambda), brute, 1e-10 * brute);
}

TEST(Objective, DimensionMismatch) {
  const AttentionKernelSystem sys(Matrix::Identity(2, 2), 1.0);
  EXPECT_EQ(code_of([&] { objective(sys, Vector::Ones(3), Vector::Ones(2)); }),
            ErrorCode::DimensionMismatch);
}

TEST(Gradient, IdentityKernelAtZero) {
  const AttentionKernelSystem sys(Matrix::Identity(4, 4), 1.0);
  Vector y(4);
  y << 1, -2, 3, 0.5;
  EXPECT_LT((objective_gradient(sys, Vector::Zero(4), y) + 2.0 * y).norm(), 1e-15);
}

TEST(Gradient, VanishesAtSolution) {
  const WorkedExample ex;
  const AttentionKernelSystem sys(attention_kernel(ex.E), ex.lambda);
  const Vector alpha = chol_solve(sys.regularized(), ex.y);
  EXPECT_LE(objective_gradient(sys, alpha, ex.y).norm(), 1e-8 * ex.y.norm());
}

TEST(Gradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(12);
  for (int instance = 0; instance < 50; ++instance) {
    const AttentionKernelSystem sys = random_system(10, 0.01, rng);
    const Vector y = 10.0 * random_vector(10, rng);
    const Vector alpha = random_vector(10, rng);
    EXPECT_LE(gradient_fd_error(sys, alpha, y), 1e-5) << "instance " << instance;
  }
}

TEST(Gradient, DimensionMismatch) {
  const AttentionKernelSystem sys(Matrix::Identity(2, 2), 1.0);
  EXPECT_EQ(code_of([&] { objective_gradient(sys, Vector::Ones(2), Vector::Ones(5)); }),
            ErrorCode::DimensionMismatch);
}

TEST(KernelSystem, RegularizedIsPositiveDefinite) {
  std::mt19937_64 rng(13);
  for (double lambda : {1e-6, 1e-2, 1.0}) {
    const AttentionKernelSystem sys = random_system(60, lambda, rng);
    EXPECT_EQ(Eigen::LLT<Matrix>(sys.regularized()).info(), Eigen::Success);
  }
  // Rank-one kernel: all points share one embedding.
  const AttentionKernelSystem flat(attention_kernel(Matrix::Constant(40, 3, 0.5)), 1e-6);
  EXPECT_EQ(Eigen::LLT<Matrix>(flat.regularized()).info(), Eigen::Success);
}

TEST(KernelSystem, ClusteredSpectrumLaw) {
  std::mt19937_64 rng(14);
  const Index n = 500;
  const double lambda = 1e-2;
  for (int Q : {1, 2, 5}) {
    const Matrix G = attention_kernel(clustered_embedding(n, Q, 2.0, 1e-3, rng));
    const AttentionKernelSystem sys(G, lambda);
    const double g_hat = within_cluster_mean(G, Q);
    const double predicted = 1.0 + static_cast<double>(n) * g_hat / (Q * lambda);
    const double measured = condition_number_spd(sys.regularized());
    EXPECT_GE(measured, 0.3 * predicted) << "Q = " << Q;
    EXPECT_LE(measured, 3.0 * predicted) << "Q = " << Q;
  }
}

TEST(KernelSystem, DefaultGeneratorConditionGrowsLinearly) {
  for (Index n : {50, 200, 500}) {
    const BenchInstance inst = bench_instance(n);
    const double kappa = condition_number_spd(inst.sys.regularized());
    const double linear = 101.0 * static_cast<double>(n);
    EXPECT_GE(kappa, linear / 3.0) << "n = " << n;
    EXPECT_LE(kappa, linear * 3.0) << "n = " << n;
  }
}
