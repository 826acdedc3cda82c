#include "hsolve/krylov.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

namespace hsolve {

namespace {

using Clock = std::chrono::steady_clock;

Vector precondition(const LinearOperator& m, const Vector& r) { return m ? m(r) : r; }

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

LinearOperator matrix_operator(const CSRMatrix& a) {
  return [&a](const Vector& x) { return a.multiply(x); };
}

LinearOperator factor_operator(const HierarchicalFactor& f) {
  return [&f](const Vector& x) { return apply_solve(f, x); };
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::BreakdownIndefinite: return "breakdown_indefinite";
  }
  return "unknown";
}

KrylovResult pcg(const LinearOperator& a, const LinearOperator& m, const Vector& b,
                 const KrylovOptions& options) {
  const auto t0 = Clock::now();
  KrylovResult out;
  SolveReport& rep = out.report;
  out.x = Vector::Zero(b.size());
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    rep.residuals.push_back(0.0);
    rep.status = SolveStatus::Converged;
    return out;
  }
  Vector r = b;
  Vector z = precondition(m, r);
  Vector p = z;
  double rz = r.dot(z);
  rep.residuals.push_back(1.0);
  if (rz <= 0.0) {
    rep.status = SolveStatus::BreakdownIndefinite;
    rep.solve_seconds = elapsed(t0);
    return out;
  }
  for (int it = 1; it <= options.max_iterations; ++it) {
    const Vector ap = a(p);
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) {
      rep.status = SolveStatus::BreakdownIndefinite;
      break;
    }
    const double alpha = rz / pap;
    out.x.noalias() += alpha * p;
    r.noalias() -= alpha * ap;
    rep.iterations = it;
    rep.residuals.push_back(r.norm() / bnorm);
    if (rep.residuals.back() <= options.tol) {
      rep.status = SolveStatus::Converged;
      break;
    }
    z = precondition(m, r);
    const double rz_next = r.dot(z);
    if (!(rz_next > 0.0)) {
      rep.status = SolveStatus::BreakdownIndefinite;
      break;
    }
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  rep.solve_seconds = elapsed(t0);
  return out;
}

KrylovResult gmres(const LinearOperator& a, const LinearOperator& m, const Vector& b,
                   const KrylovOptions& options) {
  const auto t0 = Clock::now();
  KrylovResult out;
  SolveReport& rep = out.report;
  const Eigen::Index n = b.size();
  out.x = Vector::Zero(n);
  const Vector mb = precondition(m, b);
  const double mbnorm = mb.norm();
  if (mbnorm == 0.0) {
    rep.residuals.push_back(0.0);
    rep.status = SolveStatus::Converged;
    return out;
  }
  const int restart = std::max(1, options.restart);
  rep.residuals.push_back(1.0);
  Vector r = mb;
  int total = 0;
  while (total < options.max_iterations) {
    const double beta = r.norm();
    Matrix v(n, restart + 1);
    Matrix h = Matrix::Zero(restart + 1, restart);
    Vector cs = Vector::Zero(restart), sn = Vector::Zero(restart);
    Vector g = Vector::Zero(restart + 1);
    g(0) = beta;
    v.col(0) = r / beta;
    int j = 0;
    for (; j < restart && total < options.max_iterations; ++j) {
      Vector w = precondition(m, a(v.col(j)));
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= j; ++i) {
          const double hij = v.col(i).dot(w);
          h(i, j) += hij;
          w.noalias() -= hij * v.col(i);
        }
      }
      const double hnext = w.norm();
      h(j + 1, j) = hnext;
      for (int i = 0; i < j; ++i) {
        const double t = cs(i) * h(i, j) + sn(i) * h(i + 1, j);
        h(i + 1, j) = -sn(i) * h(i, j) + cs(i) * h(i + 1, j);
        h(i, j) = t;
      }
      const double rho = std::hypot(h(j, j), h(j + 1, j));
      cs(j) = h(j, j) / rho;
      sn(j) = h(j + 1, j) / rho;
      h(j, j) = rho;
      h(j + 1, j) = 0.0;
      g(j + 1) = -sn(j) * g(j);
      g(j) = cs(j) * g(j);
      ++total;
      rep.iterations = total;
      rep.residuals.push_back(std::abs(g(j + 1)) / mbnorm);
      const bool happy = hnext <= std::numeric_limits<double>::epsilon() * beta;
      if (rep.residuals.back() <= options.tol || happy) {
        ++j;
        break;
      }
      v.col(j + 1) = w / hnext;
    }
    // x += V_j y with H_j y = g_j
    const Vector y = h.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
    out.x.noalias() += v.leftCols(j) * y;
    r = precondition(m, b - a(out.x));
    if (r.norm() <= options.tol * mbnorm) {
      rep.status = SolveStatus::Converged;
      break;
    }
    // otherwise restart, also when the recurrence drifted from the true residual
  }
  rep.solve_seconds = elapsed(t0);
  return out;
}

void write_history_csv(std::ostream& out, const SolveReport& report) {
  out << "iteration,residual\n";
  out.precision(17);
  for (std::size_t i = 0; i < report.residuals.size(); ++i) out << i << ',' << report.residuals[i] << '\n';
}

}  // namespace hsolve
