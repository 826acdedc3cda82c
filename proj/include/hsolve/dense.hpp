#pragma once

// Dense linear-algebra kernels used by the low-rank elimination.
//
// All matrices are Eigen column-major double precision. The factorizations
// report failures through hsolve::Error so the caller can choose a fallback
// (Cholesky -> LU, compression -> plain elimination).

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>

#include <vector>

namespace hsolve {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// True when every entry is finite.
bool all_finite(const Matrix& a);

/// Lower-triangular Cholesky factor L with A = L L^T.
/// Throws NotPositiveDefinite (index = pivot) on a non-positive pivot and
/// InvalidArgument when A is not square or not symmetric to 1e-12 relative.
Matrix cholesky(const Matrix& a);

/// Row-pivoted LU: P A = L U with L unit lower triangular.
struct LuResult {
  std::vector<int> perm;  // row i of P A is row perm[i] of A
  Matrix lower;
  Matrix upper;

  Matrix permutation_matrix() const;
};

/// Throws Singular (index = column) when |pivot| < 1e-14 ||A||_inf.
LuResult lu_pp(const Matrix& a);

/// Factorization of a square block, stored compactly, used wherever the
/// solver needs A^{-1}, A^{-T} or the two triangular halves separately.
class DenseFactor {
 public:
  enum class Kind : std::uint8_t { Cholesky = 0, Lu = 1 };

  DenseFactor() = default;

  /// Cholesky when `spd` is set (falls back to LU on a non-positive pivot),
  /// LU otherwise. Throws Singular if LU fails too.
  static DenseFactor factor(const Matrix& a, bool spd);
  static DenseFactor from_parts(Kind kind, Matrix factors, std::vector<int> perm);

  Kind kind() const { return kind_; }
  Eigen::Index size() const { return factors_.rows(); }
  const Matrix& factors() const { return factors_; }
  const std::vector<int>& perm() const { return perm_; }

  /// B <- A^{-1} B
  void solve_in_place(Eigen::Ref<Matrix> b) const;
  /// B <- A^{-T} B
  void solve_transpose_in_place(Eigen::Ref<Matrix> b) const;
  /// B <- L^{-1} P B (for Cholesky P = I)
  void lower_solve_in_place(Eigen::Ref<Matrix> b) const;
  /// B <- U^{-1} B (for Cholesky U = L^T)
  void upper_solve_in_place(Eigen::Ref<Matrix> b) const;
  /// B <- U^{-T} B
  void upper_transpose_solve_in_place(Eigen::Ref<Matrix> b) const;

  Matrix solve(const Matrix& b) const {
    Matrix x = b;
    solve_in_place(x);
    return x;
  }

  std::size_t payload_bytes() const;

 private:
  Kind kind_ = Kind::Cholesky;
  Matrix factors_;  // L for Cholesky; packed L\U for LU
  std::vector<int> perm_;
};

/// Rank selection for truncated_lowrank.
struct RankPolicy {
  enum class Mode : std::uint8_t { FixedRank = 0, Tolerance = 1 };

  Mode mode = Mode::Tolerance;
  int rank = 0;           // FixedRank
  double epsilon = 0.0;   // Tolerance; 0 means "numerical rank"
  bool relative = false;  // Tolerance measured against sigma_1

  static RankPolicy fixed(int k) { return {Mode::FixedRank, k, 0.0, false}; }
  static RankPolicy tolerance(double eps, bool relative = false) {
    return {Mode::Tolerance, 0, eps, relative};
  }
  /// Tolerance(0): keeps the numerical rank, i.e. an exact factorization.
  static RankPolicy exact() { return tolerance(0.0); }
};

struct LowRankBasis {
  Matrix u;  // m x k, orthonormal columns
  Matrix z;  // k x w
  Vector singular_values;  // all singular values of the input, descending
  double epsilon_achieved = 0.0;
  int rank() const { return static_cast<int>(u.cols()); }
};

/// Truncated SVD M ~= U Z with Z = U^T M = Sigma_k V_k^T. Singular values
/// at or below eps_machine * sigma_1 are never kept, so a zero
/// matrix always yields k = 0. For wide M and a policy that keeps only
/// singular values above 1e-6 sigma_1, U comes from the eigenvectors of
/// M M^T instead of a full SVD (same subspace, a fraction of the cost);
/// exact mode always uses the SVD.
LowRankBasis truncated_lowrank(const Matrix& m, const RankPolicy& policy);

/// Orthonormal V (m x (m-k)) with V^T T = 0 where T = A_ss^{-1} U. Built
/// from a full Householder QR of T; trailing m-k columns of Q.
/// Throws IllConditioned when the A_ss solve residual exceeds 1e-8 relative.
Matrix complement_basis(const Matrix& a_ss, const Matrix& u);

/// Same, given T = A^{-1} U already computed.
Matrix orthogonal_complement(const Matrix& t);

/// Largest singular value (spectral norm).
double norm2(const Matrix& a);

}  // namespace hsolve
