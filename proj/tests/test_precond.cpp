#include <gtest/gtest.h>

#include "laker/precond.hpp"
#include "laker/rng.hpp"
#include "test_util.hpp"

using namespace laker;
using namespace laker::testing;

namespace {

// Stand-in for lambda I + G backed by an explicit matrix.
SystemOperator matrix_operator(const Matrix& A) {
  SystemOperator op;
  op.dim = A.rows();
  op.apply = [A](const Matrix& X) -> Matrix { return A * X; };
  return op;
}

Matrix random_trace_n_spd(Index n, double cond, std::mt19937_64& rng) {
  Matrix S = random_spd(n, cond, rng);
  return S * (static_cast<double>(n) / S.trace());
}

DirectionSet unit_columns(const Matrix& raw) {
  DirectionSet U;
  U.directions = raw.colwise().normalized();
  return U;
}

CccpConfig tyler_config() {
  CccpConfig cfg;
  cfg.gamma = 0.0;
  cfg.epsilon = 0.0;
  return cfg;
}

}  // namespace

TEST(NrSchedule, FormulaValues) {
  EXPECT_EQ(nr_schedule(50), 50);
  EXPECT_EQ(nr_schedule(200), 114);
  EXPECT_EQ(nr_schedule(2000), 500);
  EXPECT_EQ(nr_schedule(1), 1);
  EXPECT_EQ(nr_schedule(500), 179);
  EXPECT_EQ(nr_schedule(1000), 253);
}

TEST(NrSchedule, MonotoneAndCapped) {
  Index prev = 0;
  for (Index n = 1; n <= 5000; ++n) {
    const Index nr = nr_schedule(n);
    EXPECT_GE(nr, prev);
    EXPECT_LE(nr, n);
    prev = nr;
  }
}

TEST(SampleDirections, IdentityOperatorNormalisesGaussians) {
  const Index n = 7;
  const DirectionSet U = sample_directions(matrix_operator(Matrix::Identity(n, n)), 5, 42);
  ASSERT_EQ(U.count(), 5);
  for (Index k = 0; k < 5; ++k) {
    CounterRng rng(42, static_cast<std::uint64_t>(k));
    Vector z(n);
    for (Index i = 0; i < n; ++i) z(i) = rng.normal();
    EXPECT_LT((U.directions.col(k) - z.normalized()).norm(), 1e-15);
  }
  EXPECT_EQ(U.resampled, 0);
}

TEST(SampleDirections, UnitNorms) {
  const BenchInstance inst = bench_instance(200);
  const DirectionSet U = sample_directions(inst.sys, 114, 3);
  for (Index k = 0; k < U.count(); ++k) EXPECT_NEAR(U.directions.col(k).norm(), 1.0, 1e-12);
}

TEST(SampleDirections, EnergyConcentratesOnDominantAxis) {
  const Index n = 20;
  Vector d = Vector::Ones(n);
  d(0) = 100.0;
  const DirectionSet U = sample_directions(matrix_operator(d.asDiagonal()), 10000, 5);
  const double mean_first = U.directions.row(0).squaredNorm() / 10000.0;
  EXPECT_GT(mean_first, 10.0 / static_cast<double>(n));
}

TEST(SampleDirections, ZeroOperatorIsDegenerate) {
  try {
    sample_directions(matrix_operator(Matrix::Zero(4, 4)), 3, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateDirection);
  }
}

TEST(SampleDirections, GrowingCountKeepsEarlierColumns) {
  const BenchInstance inst = bench_instance(60);
  const DirectionSet small = sample_directions(inst.sys, 10, 9);
  const DirectionSet large = sample_directions(inst.sys, 25, 9);
  // Same draws; the blocked product may round differently with more columns.
  EXPECT_LE((small.directions - large.directions.leftCols(10)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(RhoSchedule, FullSamplingUsesFloor) {
  EXPECT_DOUBLE_EQ(rho_schedule(100, 100, 0.1, 1.0), 1e-3);
  EXPECT_DOUBLE_EQ(rho_schedule(300, 100, 0.1, 1.0), 1e-3);
}

TEST(RhoSchedule, QuarterSampling) {
  EXPECT_NEAR(rho_schedule(250, 1000, 0.1, 1.0), 0.376, 1e-12);
}

TEST(RhoSchedule, SmallEigenvalueTrigger) {
  EXPECT_GE(rho_schedule(100, 100, 0.1, 1e-9), 0.2);
  EXPECT_GE(rho_schedule(10, 100, 0.0, 1e-9), 0.2);
}

TEST(RhoSchedule, NonincreasingInSamplingRatio) {
  double prev = 1.0;
  for (Index nr = 1; nr <= 400; ++nr) {
    const double rho = rho_schedule(nr, 200, 0.1, 1.0);
    EXPECT_LE(rho, prev + 1e-15);
    EXPECT_GE(rho, 1e-3);
    EXPECT_LE(rho, 0.9);
    prev = rho;
  }
}

TEST(CccpStep, RankDeficientUpdateFailsOnNextStep) {
  SigmaEstimate start;
  start.sigma = Matrix::Identity(2, 2);
  DirectionSet U;
  U.directions = Vector::Unit(2, 0);
  const CccpConfig cfg = tyler_config();
  const SigmaEstimate next = cccp_step(start, U, cfg, 0.0);
  EXPECT_NEAR(next.sigma(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(next.sigma(1, 1), 0.0, 1e-15);
  EXPECT_NEAR(next.sigma(0, 1), 0.0, 1e-15);
  try {
    cccp_step(next, U, cfg, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPositiveDefinite);
  }
}

TEST(CccpStep, ReducesToTylerMap) {
  std::mt19937_64 rng(21);
  for (auto [n, nr] : {std::pair<Index, Index>{8, 8}, {8, 30}, {25, 60}}) {
    const Matrix S = random_trace_n_spd(n, 50.0, rng);
    const DirectionSet U = unit_columns(random_matrix(n, nr, rng));
    SigmaEstimate current;
    current.sigma = S;
    const SigmaEstimate next = cccp_step(current, U, tyler_config(), 0.0);
    EXPECT_LE(rel_frobenius(next.sigma, tyler_map(S, U.directions)), 1e-10) << n << " " << nr;
  }
}

TEST(CccpStep, FullShrinkageGivesIdentity) {
  std::mt19937_64 rng(22);
  SigmaEstimate current;
  current.sigma = random_trace_n_spd(12, 1e3, rng);
  const DirectionSet U = unit_columns(random_matrix(12, 5, rng));
  const SigmaEstimate next = cccp_step(current, U, CccpConfig{}, 1.0);
  EXPECT_LT((next.sigma - Matrix::Identity(12, 12)).norm(), 1e-14);
}

TEST(CccpStep, SelfMapTraceAndLowerBound) {
  std::mt19937_64 rng(23);
  for (double rho : {1e-3, 0.05, 0.376, 1.0}) {
    for (Index nr : {4, 40}) {
      const Index n = 30;
      SigmaEstimate current;
      current.sigma = random_trace_n_spd(n, 1e4, rng);
      const DirectionSet U = unit_columns(random_matrix(n, nr, rng));
      const SigmaEstimate next = cccp_step(current, U, CccpConfig{}, rho);
      EXPECT_TRUE(next.trace_normalized);
      EXPECT_NEAR(next.sigma.trace(), static_cast<double>(n), 1e-8 * n);
      EXPECT_EQ(next.sigma, next.sigma.transpose());
      const double min_eig = sym_eigenvalues(next.sigma)(0);
      EXPECT_GT(min_eig, 0.0);
      EXPECT_GE(min_eig, 0.5 * rho * static_cast<double>(n) / next.shrunk_trace);
    }
  }
}

TEST(CccpStep, FactorFormMatchesDenseSigma) {
  std::mt19937_64 rng(24);
  const Index n = 40;
  SigmaEstimate current;
  current.sigma = random_trace_n_spd(n, 100.0, rng);
  const DirectionSet U = unit_columns(random_matrix(n, 9, rng));
  const SigmaEstimate next = cccp_step(current, U, CccpConfig{}, 0.3);
  Matrix rebuilt = next.factor_scale * next.factor * next.factor.transpose();
  rebuilt.diagonal().array() += next.shift;
  EXPECT_LE(rel_frobenius(rebuilt, next.sigma), 1e-13);
}

TEST(CccpStep, DimensionMismatch) {
  SigmaEstimate current;
  current.sigma = Matrix::Identity(3, 3);
  DirectionSet U;
  U.directions = Matrix::Identity(4, 2);
  try {
    cccp_step(current, U, CccpConfig{}, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(LearnPreconditioner, TightClusterGainsTwoOrders) {
  std::mt19937_64 rng(25);
  const Matrix G = attention_kernel(clustered_embedding(200, 1, 0.9, 0.05, rng));
  const AttentionKernelSystem sys(G, 1e-2);
  CccpConfig cfg;
  cfg.seed = 1;
  const auto [P, report] = learn_preconditioner(sys, cfg);
  const Matrix A = sys.regularized();
  const double kappa = condition_number_spd(A);
  EXPECT_TRUE(report.converged);
  EXPECT_LE(P.condition_number(A), kappa / 50.0);
}

TEST(LearnPreconditioner, IsotropicOperatorGivesNearIdentity) {
  const Index n = 10;
  CccpConfig cfg;
  cfg.num_directions = 50 * n;
  const auto [P, report] = learn_preconditioner(matrix_operator(Matrix::Identity(n, n)), cfg);
  const Matrix sigma = P.sigma_function([](double w) { return w; });
  EXPECT_NEAR(sigma.trace(), static_cast<double>(n), 1e-8 * n);
  EXPECT_LE(rel_frobenius(sigma, Matrix::Identity(n, n)), 0.3);
  EXPECT_LE(P.condition_number(Matrix::Identity(n, n)), 2.5);
}

TEST(LearnPreconditioner, BitwiseDeterministic) {
  const BenchInstance inst = bench_instance(120);
  CccpConfig cfg;
  cfg.seed = 77;
  const auto first = learn_preconditioner(inst.sys, cfg);
  const auto second = learn_preconditioner(inst.sys, cfg);
  EXPECT_EQ(first.first.matrix(), second.first.matrix());
  EXPECT_EQ(first.second.iterations, second.second.iterations);
}

TEST(LearnPreconditioner, FixedPointAndTrace) {
  const BenchInstance inst = bench_instance(500);
  CccpConfig cfg;
  cfg.seed = 4;
  const auto [P, report] = learn_preconditioner(inst.sys, cfg);
  ASSERT_TRUE(report.converged);
  EXPECT_LE(report.final_fp_residual, cfg.fp_tol);
  SigmaEstimate star;
  star.sigma = P.sigma_function([](double w) { return w; });
  const Index n = inst.sys.dim();
  EXPECT_NEAR(star.sigma.trace(), static_cast<double>(n), 1e-8 * n);
  const DirectionSet U = sample_directions(inst.sys, report.nr_used, cfg.seed);
  const SigmaEstimate mapped = cccp_step(star, U, cfg, report.rho_used);
  EXPECT_LE(rel_frobenius(mapped.sigma, star.sigma), 10.0 * cfg.fp_tol);
}

TEST(LearnPreconditioner, TopEigenvectorAligns) {
  const Index n = 20;
  Vector d(n);
  for (Index i = 0; i < n; ++i) d(i) = 1.0 + 0.1 * static_cast<double>(i);
  d(n - 4) = 100.0;  // dominant axis away from the last coordinate
  CccpConfig cfg;
  cfg.num_directions = 50 * n;
  const auto [P, report] = learn_preconditioner(matrix_operator(d.asDiagonal()), cfg);
  const EigenDecomposition eig = sym_eig(P.sigma_function([](double w) { return w; }));
  const Vector top = eig.eigenvectors.col(n - 1);
  EXPECT_GE(std::abs(top(n - 4)), 0.99);
}

TEST(LearnPreconditioner, ConditionNumberIsScaleInvariant) {
  const BenchInstance inst = bench_instance(200);
  const auto [P, report] = learn_preconditioner(inst.sys, CccpConfig{});
  const Matrix A = inst.sys.regularized();
  const double base = precond_condition_number(P.matrix(), A);
  EXPECT_NEAR(P.condition_number(A), base, 1e-8 * base);
  for (double c : {1e-3, 0.2, 40.0, 1e5}) {
    EXPECT_NEAR(precond_condition_number(c * P.matrix(), A), base, 1e-8 * base);
  }
}

TEST(LearnPreconditioner, StructuredApplyMatchesDense) {
  const BenchInstance inst = bench_instance(500);
  const auto [P, report] = learn_preconditioner(inst.sys, CccpConfig{});
  ASSERT_TRUE(P.structured());
  EXPECT_EQ(P.structured_rank(), nr_schedule(500));
  EXPECT_LT(P.apply_flops(), 2.0 * 500 * 500);
  std::mt19937_64 rng(26);
  for (int trial = 0; trial < 3; ++trial) {
    const Vector v = random_vector(500, rng);
    const Vector dense = P.apply_dense(v);
    EXPECT_LE((P.apply(v) - dense).norm(), 1e-11 * dense.norm());
  }
  const Matrix& M = P.matrix();
  EXPECT_EQ(M, M.transpose());
  EXPECT_GT(sym_eigenvalues(M)(0), 0.0);
}

TEST(Preconditioner, FactorPathMatchesDensePath) {
  std::mt19937_64 rng(27);
  const Index n = 120;
  SigmaEstimate current;
  current.sigma = Matrix::Identity(n, n);
  const DirectionSet U = unit_columns(random_matrix(n, 30, rng));
  const SigmaEstimate with_factor = cccp_step(current, U, CccpConfig{}, 0.2);
  SigmaEstimate dense_only = with_factor;
  dense_only.factor.resize(0, 0);

  const Preconditioner fast(with_factor, CccpReport{});
  const Preconditioner slow(dense_only, CccpReport{});
  EXPECT_TRUE(fast.structured());
  EXPECT_TRUE(slow.structured());
  EXPECT_EQ(fast.structured_rank(), 30);
  EXPECT_EQ(slow.structured_rank(), 30);
  EXPECT_LE(rel_frobenius(fast.matrix(), slow.matrix()), 1e-10);
  EXPECT_LE((fast.sigma_eigenvalues() - slow.sigma_eigenvalues()).norm(),
            1e-10 * slow.sigma_eigenvalues().norm());
  // P^2 Sigma = I.
  EXPECT_LE((fast.matrix() * fast.matrix() * with_factor.sigma - Matrix::Identity(n, n)).norm(),
            1e-9 * std::sqrt(static_cast<double>(n)));
}

TEST(LearnPreconditioner, IterationCapReportsNonConvergence) {
  const BenchInstance inst = bench_instance(100);
  CccpConfig cfg;
  cfg.max_iters = 1;
  const auto [P, report] = learn_preconditioner(inst.sys, cfg);
  EXPECT_FALSE(report.converged);
  EXPECT_EQ(report.iterations, 1);
  EXPECT_GT(sym_eigenvalues(P.matrix())(0), 0.0);
}
