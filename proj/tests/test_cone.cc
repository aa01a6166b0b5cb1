#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "splitroa/cone.h"
#include "splitroa/soscomp.h"

using namespace splitroa;

namespace {

Eigen::MatrixXd random_symmetric(int r, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd X(r, r);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j <= i; ++j) X(i, j) = X(j, i) = g(rng);
  }
  return X;
}

// Random symmetric matrix with eigenvalues bounded away from zero.
Eigen::MatrixXd random_nonsingular(int r, std::mt19937_64& rng) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(random_symmetric(r, rng));
  Eigen::VectorXd lam(r);
  std::uniform_real_distribution<double> mag(0.2, 2.0);
  for (int i = 0; i < r; ++i) lam(i) = (rng() % 2 ? 1.0 : -1.0) * mag(rng);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

double frob(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a.array() * b.array()).sum(); }

SparseMatrix sparse(int rows, int cols, std::vector<Eigen::Triplet<double>> t) {
  SparseMatrix A(rows, cols);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

}  // namespace

TEST(Svec, LayoutIsLowerColumnMajorScaled) {
  Eigen::MatrixXd X(3, 3);
  X << 1, 2, 3, 2, 4, 5, 3, 5, 6;
  const double r2 = std::sqrt(2.0);
  const auto v = svec(X);
  Eigen::VectorXd expected(6);
  expected << 1, 2 * r2, 3 * r2, 4, 5 * r2, 6;
  EXPECT_LT((v - expected).norm(), 1e-15);
  EXPECT_LT((unsvec(v, 3) - X).norm(), 1e-14);
  EXPECT_EQ(svec_side(6), 3);
  EXPECT_THROW(svec_side(5), std::invalid_argument);
}

TEST(Svec, IsometryAndRoundTrip) {
  std::mt19937_64 rng(1);
  for (int r = 1; r <= 8; ++r) {
    const auto A = random_symmetric(r, rng);
    const auto B = random_symmetric(r, rng);
    EXPECT_NEAR(svec(A).dot(svec(B)), frob(A, B), 1e-12);
    EXPECT_LT((unsvec(svec(A), r) - A).norm(), 1e-14);
  }
}

TEST(ProjectPsd, Identity) {
  EXPECT_EQ(project_psd(Eigen::MatrixXd::Identity(3, 3)), Eigen::MatrixXd::Identity(3, 3));
}

TEST(ProjectPsd, ClipsNegativeEigenvalues) {
  Eigen::MatrixXd X = Eigen::Vector2d(1.0, -1.0).asDiagonal();
  Eigen::MatrixXd expected = Eigen::Vector2d(1.0, 0.0).asDiagonal();
  EXPECT_LT((project_psd(X) - expected).norm(), 1e-15);
}

TEST(ProjectPsd, MatchesEigenvalueClipping) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto X = random_symmetric(6, rng);
    // Independent oracle: full eigendecomposition via the general solver.
    Eigen::EigenSolver<Eigen::MatrixXd> es(X);
    Eigen::MatrixXd V = es.eigenvectors().real();
    Eigen::VectorXd lam = es.eigenvalues().real().cwiseMax(0.0);
    for (int j = 0; j < 6; ++j) V.col(j).normalize();
    const Eigen::MatrixXd oracle = V * lam.asDiagonal() * V.transpose();
    EXPECT_LT((project_psd(X) - oracle).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ProjectPsd, IdempotentAndMoreau) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto X = random_symmetric(2 + trial % 7, rng);
    const auto P = project_psd(X);
    EXPECT_LT((project_psd(P) - P).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((P - project_psd(-X) - X).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(DprojectPsd, PositiveDefiniteIsIdentity) {
  std::mt19937_64 rng(4);
  Eigen::MatrixXd X = random_symmetric(4, rng);
  X = X * X.transpose() + Eigen::MatrixXd::Identity(4, 4);
  const auto D = random_symmetric(4, rng);
  EXPECT_LT((dproject_psd(X, D) - D).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DprojectPsd, NegativeDefiniteIsZero) {
  std::mt19937_64 rng(5);
  Eigen::MatrixXd X = random_symmetric(4, rng);
  X = -(X * X.transpose() + Eigen::MatrixXd::Identity(4, 4));
  EXPECT_LT(dproject_psd(X, random_symmetric(4, rng)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DprojectPsd, MatchesCentralDifferences) {
  std::mt19937_64 rng(6);
  const double h = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    const int r = 3 + trial % 8;
    const auto X = random_nonsingular(r, rng);
    const auto D = random_symmetric(r, rng);
    const Eigen::MatrixXd fd = (project_psd(X + h * D) - project_psd(X - h * D)) / (2 * h);
    EXPECT_LT((dproject_psd(X, D) - fd).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(DprojectPsd, SelfAdjoint) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int r = 2 + trial % 8;
    const auto X = random_nonsingular(r, rng);
    const auto A = random_symmetric(r, rng);
    const auto B = random_symmetric(r, rng);
    EXPECT_NEAR(frob(dproject_psd(X, A), B), frob(A, dproject_psd(X, B)), 1e-10);
  }
}

TEST(DprojectPsd, SingularThrows) {
  Eigen::MatrixXd X = Eigen::Vector3d(1.0, 0.0, -1.0).asDiagonal();
  EXPECT_THROW(dproject_psd(X, Eigen::MatrixXd::Identity(3, 3)), NondifferentiableError);
}

TEST(ProjectEmbedding, InteriorPointIsFixed) {
  const std::vector<Cone> cones{{ConeKind::kZero, 1}, {ConeKind::kNonneg, 2}, {ConeKind::kPsd, 2}};
  Eigen::VectorXd z(2 + 6 + 1);
  const Eigen::Vector3d psd = svec(Eigen::Vector2d(2.0, 3.0).asDiagonal().toDenseMatrix());
  z << -1.0, 4.0, /*zero*/ -5.0, /*nonneg*/ 1.0, 2.0, /*psd*/ psd(0), psd(1), psd(2), /*w*/ 1.0;
  EXPECT_LT((project_embedding(z, 2, cones) - z).norm(), 1e-14);
}

TEST(ProjectEmbedding, NonnegativeSignRule) {
  const std::vector<Cone> cones{{ConeKind::kNonneg, 2}};
  Eigen::VectorXd z(4);
  z << 0.5, -3.0, 2.0, 1.0;
  const auto p = project_embedding(z, 1, cones);
  EXPECT_EQ(p(1), 0.0);
  EXPECT_EQ(p(2), 2.0);
  Eigen::VectorXd dir = Eigen::VectorXd::Ones(4);
  const auto d = dproject_embedding(z, dir, 1, cones);
  EXPECT_EQ(d(0), 1.0);
  EXPECT_EQ(d(1), 0.0);
  EXPECT_EQ(d(2), 1.0);
  EXPECT_EQ(d(3), 1.0);
}

TEST(ProjectEmbedding, NonnegativeKinkThrows) {
  const std::vector<Cone> cones{{ConeKind::kNonneg, 1}};
  Eigen::VectorXd z(2);
  z << 0.0, 1.0;
  EXPECT_THROW(dproject_embedding(z, Eigen::VectorXd::Ones(2), 0, cones), NondifferentiableError);
}

TEST(ProjectEmbedding, MixedMatchesPerBlockOracles) {
  std::mt19937_64 rng(8);
  const std::vector<Cone> cones{{ConeKind::kZero, 2}, {ConeKind::kNonneg, 3}, {ConeKind::kPsd, 3}, {ConeKind::kPsd, 2}};
  const int n = 3;
  const int m = 2 + 3 + 6 + 3;
  std::normal_distribution<double> g;
  Eigen::VectorXd z(n + m + 1), dir(n + m + 1);
  for (int i = 0; i < z.size(); ++i) {
    z(i) = g(rng);
    dir(i) = g(rng);
  }
  const auto X1 = random_nonsingular(3, rng);
  const auto X2 = random_nonsingular(2, rng);
  z.segment(n + 5, 6) = svec(X1);
  z.segment(n + 11, 3) = svec(X2);
  z(n + m) = 0.7;

  Eigen::VectorXd expect_p = z, expect_d = dir;
  for (int i = 0; i < 3; ++i) {
    const double v = z(n + 2 + i);
    expect_p(n + 2 + i) = std::max(v, 0.0);
    expect_d(n + 2 + i) = v > 0 ? dir(n + 2 + i) : 0.0;
  }
  expect_p.segment(n + 5, 6) = svec(project_psd(X1));
  expect_d.segment(n + 5, 6) = svec(dproject_psd(X1, unsvec(Eigen::VectorXd(dir.segment(n + 5, 6)), 3)));
  expect_p.segment(n + 11, 3) = svec(project_psd(X2));
  expect_d.segment(n + 11, 3) = svec(dproject_psd(X2, unsvec(Eigen::VectorXd(dir.segment(n + 11, 3)), 2)));
  EXPECT_LT((project_embedding(z, n, cones) - expect_p).norm(), 1e-12);
  EXPECT_LT((dproject_embedding(z, dir, n, cones) - expect_d).norm(), 1e-12);
  const SparseMatrix D = dproject_embedding_matrix(z, n, cones);
  EXPECT_LT((D * dir - expect_d).norm(), 1e-12);
}

TEST(ConicProgram, ValidateRejectsBadConeOrder) {
  ConicProgram p;
  p.A = sparse(2, 1, {{0, 0, 1.0}, {1, 0, 1.0}});
  p.b = Eigen::VectorXd::Zero(2);
  p.c = Eigen::VectorXd::Ones(1);
  p.cones = {{ConeKind::kNonneg, 1}, {ConeKind::kZero, 1}};
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.cones = {{ConeKind::kZero, 1}, {ConeKind::kNonneg, 2}};
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Solve, ScalarLp) {
  // min x  s.t.  x >= 1, i.e. -x + s = -1, s >= 0.
  ConicProgram p;
  p.A = sparse(1, 1, {{0, 0, -1.0}});
  p.b = Eigen::VectorXd::Constant(1, -1.0);
  p.c = Eigen::VectorXd::Ones(1);
  p.cones = {{ConeKind::kNonneg, 1}};
  const auto sol = solve(p);
  ASSERT_EQ(sol.status, SolveStatus::kOptimal);
  EXPECT_NEAR(sol.x(0), 1.0, 1e-8);
  EXPECT_NEAR(sol.primal_obj + sol.dual_obj, 0.0, 1e-8);
}

TEST(Solve, TraceConstrainedSdp) {
  // min <diag(1,2), X>  s.t.  tr X = 1, X psd.  x = svec(X).
  ConicProgram p;
  p.A = sparse(4, 3, {{0, 0, 1.0}, {0, 2, 1.0}, {1, 0, -1.0}, {2, 1, -1.0}, {3, 2, -1.0}});
  p.b = Eigen::VectorXd::Zero(4);
  p.b(0) = 1.0;
  p.c = svec(Eigen::Vector2d(1.0, 2.0).asDiagonal().toDenseMatrix());
  p.cones = {{ConeKind::kZero, 1}, {ConeKind::kPsd, 2}};
  const auto sol = solve(p);
  ASSERT_EQ(sol.status, SolveStatus::kOptimal);
  EXPECT_NEAR(sol.primal_obj, 1.0, 1e-7);
  const auto X = unsvec(sol.x, 2);
  EXPECT_NEAR(X(0, 0), 1.0, 1e-6);
  EXPECT_NEAR(X(1, 1), 0.0, 1e-6);
  const auto k = kkt_residuals(p, sol);
  EXPECT_LT(k.primal, 1e-7);
  EXPECT_LT(k.dual, 1e-7);
}

TEST(Solve, InfeasibleReportsStatus) {
  // x >= 1 and x <= 0.
  ConicProgram p;
  p.A = sparse(2, 1, {{0, 0, -1.0}, {1, 0, 1.0}});
  p.b = Eigen::Vector2d(-1.0, 0.0);
  p.c = Eigen::VectorXd::Ones(1);
  p.cones = {{ConeKind::kNonneg, 2}};
  const auto sol = solve(p);
  EXPECT_EQ(sol.status, SolveStatus::kInfeasible);
  EXPECT_FALSE(usable(sol));
}

TEST(Solve, CompiledDoubleIntegratorMatchesIndependentSolver) {
  const auto sys = double_integrator();
  const auto dec = build_decomposition(sys, equidistant_splits(sys, 0, {0, 0}));
  const auto cp = compile(sys, dec, 4);
  const auto sol = solve(cp.program, {1e-9, 300, false});
  ASSERT_EQ(sol.status, SolveStatus::kOptimal);
  // Optimal value of the exported program from an independent interior-point
  // solver (CVXOPT conelp, tolerances 1e-10).
  EXPECT_NEAR(sol.primal_obj, 2.9840935335023624, 1e-7 * 2.984);
  EXPECT_LE(std::abs(sol.primal_obj + sol.dual_obj), 10 * 1e-9 * (1 + std::abs(sol.primal_obj)));
}

TEST(ExchangeFormat, RoundTrip) {
  const auto sys = double_integrator();
  const auto dec = build_decomposition(sys, equidistant_splits(sys, 1, {1, 0}));
  const auto cp = compile(sys, dec, 4);
  const auto path = std::filesystem::temp_directory_path() / "splitroa_exchange_roundtrip.json";
  export_program(cp.program, path);
  const auto back = import_program(path);
  EXPECT_EQ(back.cones, cp.program.cones);
  EXPECT_EQ(back.b, cp.program.b);
  EXPECT_EQ(back.c, cp.program.c);
  EXPECT_EQ(back.A.nonZeros(), cp.program.A.nonZeros());
  EXPECT_EQ((Eigen::MatrixXd(back.A) - Eigen::MatrixXd(cp.program.A)).cwiseAbs().maxCoeff(), 0.0);
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".bin");
}
