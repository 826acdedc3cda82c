#include "hsolve/dense.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hsolve/error.hpp"

namespace hsolve {

bool all_finite(const Matrix& a) { return a.allFinite(); }

Matrix cholesky(const Matrix& a) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) {
    throw Error(ErrorKind::InvalidArgument, "cholesky: matrix is not square");
  }
  if (n == 0) return Matrix(0, 0);
  const double scale = a.cwiseAbs().maxCoeff();
  if (n > 0 && (a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorKind::InvalidArgument, "cholesky: matrix is not symmetric");
  }
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0)) {
      throw Error(ErrorKind::NotPositiveDefinite,
                  "cholesky: non-positive pivot at " + std::to_string(j), j);
    }
    d = std::sqrt(d);
    l(j, j) = d;
    const Eigen::Index rest = n - j - 1;
    if (rest > 0) {
      l.col(j).tail(rest) =
          (a.col(j).tail(rest) - l.block(j + 1, 0, rest, j) * l.row(j).head(j).transpose()) / d;
    }
  }
  return l;
}

Matrix LuResult::permutation_matrix() const {
  const auto n = static_cast<Eigen::Index>(perm.size());
  Matrix p = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) p(i, perm[i]) = 1.0;
  return p;
}

namespace {

// In-place packed LU with partial pivoting; returns the row permutation.
std::vector<int> lu_in_place(Matrix& a) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) {
    throw Error(ErrorKind::InvalidArgument, "lu_pp: matrix is not square");
  }
  const double norm_inf = n > 0 ? a.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
  const double tiny = 1e-14 * norm_inf;
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) perm[i] = static_cast<int>(i);
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index p = 0;
    const double pivot = a.col(k).tail(n - k).cwiseAbs().maxCoeff(&p);
    p += k;
    if (!(pivot > tiny) || pivot == 0.0) {
      throw Error(ErrorKind::Singular, "lu_pp: no acceptable pivot in column " + std::to_string(k),
                  k);
    }
    if (p != k) {
      a.row(k).swap(a.row(p));
      std::swap(perm[k], perm[p]);
    }
    const Eigen::Index rest = n - k - 1;
    if (rest > 0) {
      a.col(k).tail(rest) /= a(k, k);
      a.bottomRightCorner(rest, rest).noalias() -=
          a.col(k).tail(rest) * a.row(k).tail(rest);
    }
  }
  return perm;
}

}  // namespace

LuResult lu_pp(const Matrix& a) {
  Matrix packed = a;
  LuResult out;
  out.perm = lu_in_place(packed);
  out.lower = packed.triangularView<Eigen::UnitLower>();
  out.upper = packed.triangularView<Eigen::Upper>();
  return out;
}

DenseFactor DenseFactor::factor(const Matrix& a, bool spd) {
  DenseFactor f;
  if (spd) {
    try {
      f.kind_ = Kind::Cholesky;
      f.factors_ = cholesky(a);
      return f;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NotPositiveDefinite) throw;
    }
  }
  f.kind_ = Kind::Lu;
  f.factors_ = a;
  f.perm_ = lu_in_place(f.factors_);
  return f;
}

DenseFactor DenseFactor::from_parts(Kind kind, Matrix factors, std::vector<int> perm) {
  DenseFactor f;
  f.kind_ = kind;
  f.factors_ = std::move(factors);
  f.perm_ = std::move(perm);
  return f;
}

namespace {

void apply_row_perm(const std::vector<int>& perm, Eigen::Ref<Matrix> b) {
  Matrix tmp(b.rows(), b.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) tmp.row(static_cast<Eigen::Index>(i)) = b.row(perm[i]);
  b = tmp;
}

void apply_row_perm_inverse(const std::vector<int>& perm, Eigen::Ref<Matrix> b) {
  Matrix tmp(b.rows(), b.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) tmp.row(perm[i]) = b.row(static_cast<Eigen::Index>(i));
  b = tmp;
}

}  // namespace

void DenseFactor::lower_solve_in_place(Eigen::Ref<Matrix> b) const {
  if (kind_ == Kind::Cholesky) {
    factors_.triangularView<Eigen::Lower>().solveInPlace(b);
  } else {
    apply_row_perm(perm_, b);
    factors_.triangularView<Eigen::UnitLower>().solveInPlace(b);
  }
}

void DenseFactor::upper_solve_in_place(Eigen::Ref<Matrix> b) const {
  if (kind_ == Kind::Cholesky) {
    factors_.transpose().triangularView<Eigen::Upper>().solveInPlace(b);
  } else {
    factors_.triangularView<Eigen::Upper>().solveInPlace(b);
  }
}

void DenseFactor::upper_transpose_solve_in_place(Eigen::Ref<Matrix> b) const {
  if (kind_ == Kind::Cholesky) {
    factors_.triangularView<Eigen::Lower>().solveInPlace(b);
  } else {
    factors_.transpose().triangularView<Eigen::Lower>().solveInPlace(b);
  }
}

void DenseFactor::solve_in_place(Eigen::Ref<Matrix> b) const {
  lower_solve_in_place(b);
  upper_solve_in_place(b);
}

void DenseFactor::solve_transpose_in_place(Eigen::Ref<Matrix> b) const {
  if (kind_ == Kind::Cholesky) {
    solve_in_place(b);
    return;
  }
  // A^T = U^T L^T P
  factors_.transpose().triangularView<Eigen::Lower>().solveInPlace(b);
  factors_.transpose().triangularView<Eigen::UnitUpper>().solveInPlace(b);
  apply_row_perm_inverse(perm_, b);
}

std::size_t DenseFactor::payload_bytes() const {
  return static_cast<std::size_t>(factors_.size()) * sizeof(double) + perm_.size() * sizeof(int);
}

namespace {

Eigen::Index select_rank(const Vector& sigma, Eigen::Index numerical_rank, const RankPolicy& policy) {
  if (policy.mode == RankPolicy::Mode::FixedRank) {
    return std::min<Eigen::Index>(std::max(policy.rank, 0), numerical_rank);
  }
  if (policy.epsilon <= 0.0) return numerical_rank;
  const double threshold = policy.relative ? policy.epsilon * sigma(0) : policy.epsilon;
  Eigen::Index k = 0;
  while (k < numerical_rank && sigma(k) > threshold) ++k;
  return k;
}

bool policy_allows_gram(const RankPolicy& policy) {
  return policy.mode == RankPolicy::Mode::FixedRank || policy.epsilon > 0.0;
}

// Singular values below this fraction of sigma_1 are not resolved by the
// eigenvalues of M M^T.
constexpr double kGramResolution = 1e-6;

// Wide matrices: left singular vectors from the eigenvectors of M M^T,
// several times cheaper than a bidiagonalizing SVD. Declines (returns
// false) when the selected rank reaches singular values the Gram matrix
// cannot resolve; the caller then runs the SVD.
bool gram_lowrank(const Matrix& m, const RankPolicy& policy, LowRankBasis& out) {
  const Eigen::Index rows = m.rows();
  Matrix gram = Matrix::Zero(rows, rows);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(m);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success) return false;
  Vector sigma(rows);
  for (Eigen::Index i = 0; i < rows; ++i) sigma(i) = std::sqrt(std::max(0.0, eig.eigenvalues()(rows - 1 - i)));
  if (sigma(0) == 0.0) {
    out.u.resize(rows, 0);
    out.z.resize(0, m.cols());
    out.singular_values = sigma;
    return true;
  }
  Eigen::Index resolved = 0;
  while (resolved < rows && sigma(resolved) > kGramResolution * sigma(0)) ++resolved;
  const Eigen::Index k = select_rank(sigma, rows, policy);
  if (k > resolved) return false;
  out.u = eig.eigenvectors().rightCols(k).rowwise().reverse();
  out.z = out.u.transpose() * m;
  out.singular_values = sigma;
  out.epsilon_achieved = k < rows ? sigma(k) : 0.0;
  return true;
}

}  // namespace

LowRankBasis truncated_lowrank(const Matrix& m, const RankPolicy& policy) {
  LowRankBasis out;
  const Eigen::Index rows = m.rows();
  const Eigen::Index cols = m.cols();
  const Eigen::Index min_dim = std::min(rows, cols);
  if (min_dim == 0) {
    out.u.resize(rows, 0);
    out.z.resize(0, cols);
    return out;
  }
  if (policy_allows_gram(policy) && rows <= cols && gram_lowrank(m, policy, out)) return out;
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const Vector& sigma = svd.singularValues();
  out.singular_values = sigma;

  // No max(m,w) factor: later eliminations amplify dropped directions, and
  // the wider floor cost 1e-8 residuals in exact mode.
  const double floor = std::numeric_limits<double>::epsilon() * sigma(0);
  Eigen::Index numerical_rank = 0;
  while (numerical_rank < min_dim && sigma(numerical_rank) > floor) ++numerical_rank;

  const Eigen::Index k = select_rank(sigma, numerical_rank, policy);
  out.u = svd.matrixU().leftCols(k);
  out.z = out.u.transpose() * m;
  out.epsilon_achieved = k < min_dim ? sigma(k) : 0.0;
  return out;
}

Matrix orthogonal_complement(const Matrix& t) {
  const Eigen::Index m = t.rows();
  const Eigen::Index k = t.cols();
  if (k == 0) return Matrix::Identity(m, m);
  if (k >= m) return Matrix(m, 0);
  Eigen::HouseholderQR<Matrix> qr(t);
  Matrix q = qr.householderQ() * Matrix::Identity(m, m);
  return q.rightCols(m - k);
}

Matrix complement_basis(const Matrix& a_ss, const Matrix& u) {
  if (a_ss.rows() != a_ss.cols() || a_ss.rows() != u.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "complement_basis: shape mismatch");
  }
  if (u.cols() == 0) return Matrix::Identity(a_ss.rows(), a_ss.rows());
  DenseFactor f;
  try {
    f = DenseFactor::factor(a_ss, false);
  } catch (const Error&) {
    throw Error(ErrorKind::IllConditioned, "complement_basis: A_ss is singular");
  }
  Matrix t = f.solve(u);
  const double residual = (a_ss * t - u).norm();
  if (!(residual <= 1e-8 * u.norm())) {
    throw Error(ErrorKind::IllConditioned, "complement_basis: A_ss solve residual too large");
  }
  return orthogonal_complement(t);
}

double norm2(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

}  // namespace hsolve
