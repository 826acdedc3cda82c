#include <gtest/gtest.h>

#include <sstream>

#include "hsolve/krylov.hpp"
#include "hsolve/matrix_market.hpp"
#include "hsolve/problems.hpp"
#include "test_util.hpp"

using namespace hsolve;
using hsolve::testing::random_vector;
using hsolve::testing::relative_residual;

namespace {

FactorConfig config(int r, RankPolicy policy) {
  FactorConfig c;
  c.partition.target_cluster_size = r;
  c.policy = policy;
  return c;
}

const LinearOperator identity = [](const Vector& x) { return x; };

}  // namespace

TEST(Pcg, IdentityOneIteration) {
  const Vector b = random_vector(20, 1);
  const KrylovResult res = pcg(identity, identity, b);
  EXPECT_TRUE(res.report.converged());
  EXPECT_EQ(res.report.iterations, 1);
  EXPECT_LE((res.x - b).norm(), 1e-15);
  EXPECT_EQ(res.report.residuals.size(), 2u);
}

TEST(Gmres, IdentityOneIteration) {
  const Vector b = random_vector(20, 2);
  const KrylovResult res = gmres(identity, identity, b);
  EXPECT_TRUE(res.report.converged());
  EXPECT_EQ(res.report.iterations, 1);
  EXPECT_LE((res.x - b).norm(), 1e-14);
}

TEST(Pcg, ZeroRhs) {
  const KrylovResult res = pcg(identity, {}, Vector::Zero(4));
  EXPECT_TRUE(res.report.converged());
  EXPECT_EQ(res.x, Vector::Zero(4));
}

TEST(Pcg, IndefiniteBreakdown) {
  const std::vector<int> idx{0, 1};
  const std::vector<double> vals{1.0, -1.0};
  const CSRMatrix a = CSRMatrix::from_triplets(2, idx, idx, vals);
  Vector b(2);
  b << 1.0, 2.0;
  const KrylovResult res = pcg(matrix_operator(a), {}, b);
  EXPECT_EQ(res.report.status, SolveStatus::BreakdownIndefinite);
}

TEST(Pcg, MaxIterations) {
  const CSRMatrix a = gen_poisson(8);
  KrylovOptions opt;
  opt.max_iterations = 3;
  const KrylovResult res = pcg(matrix_operator(a), {}, random_vector(a.n, 3), opt);
  EXPECT_EQ(res.report.status, SolveStatus::MaxIterations);
  EXPECT_EQ(res.report.iterations, 3);
  EXPECT_STREQ(to_string(res.report.status), "max_iterations");
}

TEST(Pcg, ExactPreconditionerTwoIterations) {
  const CSRMatrix a = gen_poisson(16);
  const HierarchicalFactor f = hierarchical_factor(a, SymmetryFlag::SPD, config(64, RankPolicy::exact()));
  const Vector b = random_vector(a.n, 4);
  const KrylovResult cg = pcg(matrix_operator(a), factor_operator(f), b);
  EXPECT_TRUE(cg.report.converged());
  EXPECT_LE(cg.report.iterations, 2);
  const KrylovResult gm = gmres(matrix_operator(a), factor_operator(f), b);
  EXPECT_TRUE(gm.report.converged());
  EXPECT_LE(gm.report.iterations, 2);
}

TEST(Pcg, FixedRankBeatsUnpreconditioned) {
  const CSRMatrix a = gen_poisson(16);
  const HierarchicalFactor f = hierarchical_factor(a, SymmetryFlag::SPD, config(64, RankPolicy::fixed(8)));
  const Vector b = random_vector(a.n, 5);
  KrylovOptions opt;
  opt.max_iterations = 2000;
  const KrylovResult pre = pcg(matrix_operator(a), factor_operator(f), b, opt);
  const KrylovResult plain = pcg(matrix_operator(a), {}, b, opt);
  ASSERT_TRUE(pre.report.converged());
  ASSERT_TRUE(plain.report.converged());
  EXPECT_LE(relative_residual(a, pre.x, b), 1e-12);
  EXPECT_LT(pre.report.iterations, plain.report.iterations);
}

TEST(Pcg, SmallerToleranceNeedsFewerIterations) {
  const CSRMatrix a = gen_poisson(16);
  const Vector b = random_vector(a.n, 6);
  int iters[2];
  int idx = 0;
  for (double eps : {0.4, 0.05}) {
    const HierarchicalFactor f = hierarchical_factor(a, SymmetryFlag::SPD, config(64, RankPolicy::tolerance(eps)));
    const KrylovResult r = pcg(matrix_operator(a), factor_operator(f), b);
    ASSERT_TRUE(r.report.converged()) << eps;
    iters[idx++] = r.report.iterations;
  }
  EXPECT_LE(iters[1], iters[0]);
}

TEST(Pcg, AgreesWithGmresOnSpd) {
  const CSRMatrix a = gen_vc_poisson(10, 2);
  const HierarchicalFactor f = hierarchical_factor(a, SymmetryFlag::SPD, config(50, RankPolicy::fixed(6)));
  const Vector b = random_vector(a.n, 7);
  const KrylovResult cg = pcg(matrix_operator(a), factor_operator(f), b);
  const KrylovResult gm = gmres(matrix_operator(a), factor_operator(f), b);
  ASSERT_TRUE(cg.report.converged());
  ASSERT_TRUE(gm.report.converged());
  EXPECT_LE((cg.x - gm.x).norm() / cg.x.norm(), 1e-8);
}

TEST(Gmres, HelmholtzScaledGrid) {
  // f scaled with the grid: 32 points per wavelength at n = 16 is f = 0.5
  const CSRMatrix a = gen_helmholtz(16, 0.5);
  const HierarchicalFactor f =
      hierarchical_factor(a, SymmetryFlag::SymmetricIndefinite, config(64, RankPolicy::fixed(32)));
  KrylovOptions opt;
  opt.tol = 1e-3;
  const KrylovResult res = gmres(matrix_operator(a), factor_operator(f), random_vector(a.n, 8), opt);
  EXPECT_TRUE(res.report.converged());
  EXPECT_LE(res.report.iterations, 50);
}

TEST(Gmres, ConvectionDiffusionGeneralPath) {
  const CSRMatrix a = gen_convection_diffusion(12, 10.0);
  const HierarchicalFactor f = hierarchical_factor(a, SymmetryFlag::General, config(64, RankPolicy::tolerance(0.2)));
  const Vector b = random_vector(a.n, 9);
  const KrylovResult res = gmres(matrix_operator(a), factor_operator(f), b);
  ASSERT_TRUE(res.report.converged());
  EXPECT_LE(relative_residual(a, res.x, b), 1e-10);
  for (std::size_t i = 1; i < res.report.residuals.size(); ++i) {
    EXPECT_LE(res.report.residuals[i], res.report.residuals[i - 1] + 1e-14);
  }
}

TEST(Gmres, RestartStillConverges) {
  const CSRMatrix a = gen_convection_diffusion(6, 5.0);
  KrylovOptions opt;
  opt.restart = 5;
  opt.tol = 1e-10;
  opt.max_iterations = 2000;
  const Vector b = random_vector(a.n, 10);
  const KrylovResult res = gmres(matrix_operator(a), {}, b, opt);
  ASSERT_TRUE(res.report.converged());
  EXPECT_GT(res.report.iterations, 5);
  EXPECT_LE(relative_residual(a, res.x, b), 1e-9);
}

TEST(Pcg, AirfoilEndToEnd) {
  const MatrixMarketData m = read_matrix_market(std::string(HSOLVE_TEST_DATA) + "/airfoil.mtx");
  const HierarchicalFactor f = hierarchical_factor(m.matrix, m.flag, config(16, RankPolicy::fixed(4)));
  const Vector b = random_vector(m.matrix.n, 11);
  const KrylovResult res = pcg(matrix_operator(m.matrix), factor_operator(f), b);
  ASSERT_TRUE(res.report.converged());
  EXPECT_LE(relative_residual(m.matrix, res.x, b), 1e-12);
}

TEST(History, CsvExport) {
  SolveReport rep;
  rep.residuals = {1.0, 0.5, 0.125};
  std::ostringstream out;
  write_history_csv(out, rep);
  EXPECT_EQ(out.str(), "iteration,residual\n0,1\n1,0.5\n2,0.125\n");
}
