#pragma once

// Preconditioned CG and restarted GMRES. Operators are plain callables so
// the hierarchical factorization, a CSR matrix or a test lambda all fit.

#include <functional>
#include <iosfwd>
#include <vector>

#include "hsolve/csr.hpp"
#include "hsolve/dense.hpp"
#include "hsolve/factor.hpp"

namespace hsolve {

using LinearOperator = std::function<Vector(const Vector&)>;

LinearOperator matrix_operator(const CSRMatrix& a);
/// x -> apply_solve(f, x). The factor must outlive the operator.
LinearOperator factor_operator(const HierarchicalFactor& f);

enum class SolveStatus : std::uint8_t { Converged = 0, MaxIterations = 1, BreakdownIndefinite = 2 };
const char* to_string(SolveStatus s);

struct SolveReport {
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  /// Relative residual before the first iteration and after each one. CG
  /// records ||b - A x|| / ||b||; GMRES the preconditioned residual.
  std::vector<double> residuals;
  double setup_seconds = 0.0;  // filled by callers that build the preconditioner
  double solve_seconds = 0.0;

  bool converged() const { return status == SolveStatus::Converged; }
  double final_residual() const { return residuals.empty() ? 0.0 : residuals.back(); }
};

struct KrylovResult {
  Vector x;
  SolveReport report;
};

struct KrylovOptions {
  double tol = 1e-12;
  int max_iterations = 1000;
  int restart = 50;  // GMRES only
};

/// Preconditioned conjugate gradients from x0 = 0. An empty `m` means no
/// preconditioner. Stops with BreakdownIndefinite when p^T A p <= 0 or the
/// preconditioned residual has r^T z <= 0.
KrylovResult pcg(const LinearOperator& a, const LinearOperator& m, const Vector& b,
                 const KrylovOptions& options = {});

/// Left-preconditioned restarted GMRES from x0 = 0 (modified Gram-Schmidt
/// with one reorthogonalization pass). A zero subdiagonal (happy breakdown)
/// counts as convergence.
KrylovResult gmres(const LinearOperator& a, const LinearOperator& m, const Vector& b,
                   const KrylovOptions& options = {});

/// "iteration,residual" rows, iteration 0 being the initial residual.
void write_history_csv(std::ostream& out, const SolveReport& report);

}  // namespace hsolve
