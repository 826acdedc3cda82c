#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "hsolve/error.hpp"
#include "hsolve/matrix_market.hpp"
#include "hsolve/problems.hpp"

using namespace hsolve;

namespace {

double min_eigenvalue(const CSRMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a.to_dense(), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

bool dense_cholesky_ok(const CSRMatrix& a) { return a.to_dense().llt().info() == Eigen::Success; }

ErrorKind kind_of(const std::string& text) {
  std::istringstream in(text);
  try {
    read_matrix_market(in);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST(Poisson, TwoCubedStructure) {
  const Matrix a = gen_poisson(2).to_dense();
  ASSERT_EQ(a.rows(), 8);
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(a(i, i), 6.0);
    int off = 0;
    for (int j = 0; j < 8; ++j) {
      if (j == i || a(i, j) == 0.0) continue;
      EXPECT_EQ(a(i, j), -1.0);
      ++off;
    }
    EXPECT_EQ(off, 3);
  }
}

TEST(Poisson, RowSumsAndInterior) {
  const int n = 5;
  const CSRMatrix a = gen_poisson(n);
  const Vector sums = a.multiply(Vector::Ones(a.n));
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const int i = x + n * (y + n * z);
        const bool boundary = x == 0 || y == 0 || z == 0 || x == n - 1 || y == n - 1 || z == n - 1;
        if (boundary) {
          EXPECT_GT(sums(i), 0.0);
        } else {
          EXPECT_EQ(sums(i), 0.0);
          EXPECT_EQ(a.row_ptr[i + 1] - a.row_ptr[i], 7);
        }
      }
}

TEST(Poisson, PositiveDefiniteAtEight) {
  const CSRMatrix a = gen_poisson(8);
  // unit-spacing 7-point Laplacian: lambda_min = 6 (1 - cos(pi/9))
  EXPECT_NEAR(min_eigenvalue(a), 6.0 * (1.0 - std::cos(std::numbers::pi / 9.0)), 1e-10);
  EXPECT_TRUE(a.values_symmetric());
}

TEST(VcField, TwoValuesAndDeterministic) {
  const std::vector<double> a = gen_vc_field(12, 5);
  ASSERT_EQ(a.size(), 12u * 12u * 12u);
  for (double v : a) EXPECT_TRUE(v == 100.0 || v == 0.01) << v;
  EXPECT_EQ(a, gen_vc_field(12, 5));
  EXPECT_NE(a, gen_vc_field(12, 6));
}

TEST(VcField, HighFractionIsBalanced) {
  // A deviation of 4 cells leaves only a few dozen independent blobs in a
  // 32^3 box, so single fields scatter widely; the pooled fraction is the
  // stable quantity.
  double pooled = 0.0;
  double lo = 1.0, hi = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::vector<double> a = gen_vc_field(32, seed);
    const double f = static_cast<double>(std::count(a.begin(), a.end(), 100.0)) / static_cast<double>(a.size());
    pooled += f / 20.0;
    lo = std::min(lo, f);
    hi = std::max(hi, f);
  }
  EXPECT_GE(pooled, 0.35);
  EXPECT_LE(pooled, 0.65);
  EXPECT_GT(lo, 0.1);
  EXPECT_LT(hi, 0.9);
}

TEST(VcPoisson, ConstantFieldIsPoisson) {
  const std::vector<double> ones(6 * 6 * 6, 1.0);
  EXPECT_EQ(gen_vc_poisson(6, ones), gen_poisson(6));
}

TEST(VcPoisson, HarmonicFaceCoefficient) {
  std::vector<double> field(8, 1.0);
  field[1] = 100.0;
  const Matrix a = gen_vc_poisson(2, field).to_dense();
  EXPECT_DOUBLE_EQ(a(0, 1), -2.0 * 100.0 / 101.0);
  EXPECT_EQ(a(0, 2), -1.0);
  EXPECT_EQ(a, a.transpose());
  EXPECT_THROW(gen_vc_poisson(3, field), Error);
}

TEST(VcPoisson, SpdSpotChecks) {
  for (int n : {4, 8, 10}) {
    const CSRMatrix a = gen_vc_poisson(n, 1);
    EXPECT_EQ(a.to_dense(), a.to_dense().transpose());
    EXPECT_TRUE(dense_cholesky_ok(a)) << n;
  }
  EXPECT_TRUE(dense_cholesky_ok(gen_poisson(10)));
}

TEST(Helmholtz, ShiftAndLimit) {
  const CSRMatrix p = gen_poisson(32);
  const CSRMatrix h = gen_helmholtz(32, 1.0);
  ASSERT_EQ(p.col_idx, h.col_idx);
  const double shift = std::pow(2.0 * std::numbers::pi / 32.0, 2);
  for (int i = 0; i < p.n; ++i) {
    for (int q = p.row_ptr[i]; q < p.row_ptr[i + 1]; ++q) {
      const double expected = p.col_idx[q] == i ? shift : 0.0;
      ASSERT_NEAR(p.values[q] - h.values[q], expected, 1e-14);
    }
  }
  EXPECT_LE((gen_helmholtz(6, 1e-9).to_dense() - gen_poisson(6).to_dense()).norm(), 1e-15);
}

TEST(Helmholtz, Definiteness) {
  EXPECT_GT(min_eigenvalue(gen_helmholtz(16, 0.5)), 0.0);
  EXPECT_LT(min_eigenvalue(gen_helmholtz(16, 1.0)), 0.0);
}

TEST(ConvectionDiffusion, NonsymmetricDominant) {
  const CSRMatrix a = gen_convection_diffusion(5, 10.0);
  EXPECT_TRUE(a.pattern_symmetric());
  EXPECT_FALSE(a.values_symmetric());
  const Matrix d = a.to_dense();
  for (int i = 0; i < a.n; ++i) {
    EXPECT_GE(d(i, i), d.row(i).cwiseAbs().sum() - std::abs(d(i, i)) - 1e-12);
  }
  EXPECT_EQ(classify_symmetry(a), SymmetryFlag::General);
}

TEST(Generate, KindsAndErrors) {
  EXPECT_EQ(parse_problem_kind("helmholtz"), ProblemKind::Helmholtz);
  EXPECT_STREQ(to_string(ProblemKind::VCPoisson), "vcpoisson");
  EXPECT_THROW(parse_problem_kind("wave"), Error);
  ProblemSpec spec;
  spec.kind = ProblemKind::Helmholtz;
  spec.n = 6;
  EXPECT_EQ(generate(spec).flag, SymmetryFlag::SymmetricIndefinite);
  spec.frequency = 0.0;
  EXPECT_THROW(generate(spec), Error);
  spec.kind = ProblemKind::Poisson;
  spec.n = 1;
  EXPECT_THROW(generate(spec), Error);
  spec.n = 3;
  EXPECT_EQ(generate(spec).matrix, gen_poisson(3));
}

TEST(MatrixMarket, Identity) {
  std::istringstream in("%%MatrixMarket matrix coordinate real general\n% c\n2 2 2\n1 1 1\n2 2 1\n");
  const MatrixMarketData m = read_matrix_market(in);
  EXPECT_EQ(m.matrix.n, 2);
  EXPECT_EQ(m.matrix.nnz(), 2);
  EXPECT_EQ(m.flag, SymmetryFlag::SPD);
}

TEST(MatrixMarket, SymmetricExpansionAndDuplicates) {
  std::istringstream in(
      "%%MatrixMarket matrix coordinate real symmetric\n3 3 5\n1 1 2\n2 1 -1\n2 2 2\n3 2 -1\n3 3 1\n");
  const MatrixMarketData m = read_matrix_market(in);
  EXPECT_EQ(m.matrix.nnz(), 2 * 5 - 3);
  EXPECT_EQ(m.matrix.to_dense()(0, 1), -1.0);
  EXPECT_EQ(m.flag, SymmetryFlag::SPD);  // positive diagonal rule
  std::istringstream dup("%%MatrixMarket matrix coordinate integer general\n1 1 2\n1 1 2\n1 1 -5\n");
  const MatrixMarketData d = read_matrix_market(dup);
  EXPECT_EQ(d.matrix.values, std::vector<double>{-3.0});
  EXPECT_EQ(d.flag, SymmetryFlag::SymmetricIndefinite);
}

TEST(MatrixMarket, SkewSymmetric) {
  std::istringstream in("%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n2 1 3\n");
  const Matrix d = read_matrix_market(in).matrix.to_dense();
  EXPECT_EQ(d(1, 0), 3.0);
  EXPECT_EQ(d(0, 1), -3.0);
}

TEST(MatrixMarket, RoundTripIsExact) {
  for (SymmetryFlag flag : {SymmetryFlag::SPD, SymmetryFlag::General}) {
    const CSRMatrix a = flag == SymmetryFlag::SPD ? gen_vc_poisson(5, 3) : gen_convection_diffusion(5, 3.3);
    std::stringstream buf;
    write_matrix_market(buf, a, flag);
    const MatrixMarketData back = read_matrix_market(buf);
    EXPECT_EQ(back.matrix, a);
    EXPECT_EQ(back.flag, flag);
  }
}

TEST(MatrixMarket, Errors) {
  EXPECT_EQ(kind_of("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n"),
            ErrorKind::UnsupportedField);
  EXPECT_EQ(kind_of("%%MatrixMarket matrix coordinate pattern general\n1 1 1\n1 1\n"),
            ErrorKind::UnsupportedField);
  EXPECT_EQ(kind_of("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n"), ErrorKind::ParseError);
  EXPECT_EQ(kind_of("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n"), ErrorKind::ParseError);
  EXPECT_EQ(kind_of("not a header\n"), ErrorKind::ParseError);
  std::istringstream in("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n2 x 1\n");
  try {
    read_matrix_market(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.index(), 4);
  }
  EXPECT_THROW(read_matrix_market(std::string("/nonexistent/file.mtx")), Error);
}

TEST(MatrixMarket, BundledMatrices) {
  const std::string dir = HSOLVE_TEST_DATA;
  const MatrixMarketData airfoil = read_matrix_market(dir + "/airfoil.mtx");
  EXPECT_EQ(airfoil.matrix.n, 260);
  EXPECT_EQ(airfoil.flag, SymmetryFlag::SPD);
  EXPECT_TRUE(dense_cholesky_ok(airfoil.matrix));
  EXPECT_EQ(read_matrix_market(dir + "/recirc_flow.mtx").flag, SymmetryFlag::General);
}
