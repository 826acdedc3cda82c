#include "hsolve/problems.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "hsolve/error.hpp"

namespace hsolve {

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

namespace {

void check_n(int n) {
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "grid size n must be at least 2");
}

// Builds a 7-point operator from per-direction couplings. `coupling(p, q)`
// returns the (positive) weight of the edge from grid point p to q; q = -1
// stands for a boundary face. The row of p is  sum(weights) on the diagonal
// plus `diag_shift`, and -weight towards each interior neighbor, with an
// optional asymmetric extra term from `upwind`.
template <class Coupling, class Upwind>
CSRMatrix stencil(int n, Coupling coupling, Upwind upwind, double diag_shift) {
  const int total = n * n * n;
  std::vector<int> rows, cols;
  std::vector<double> vals;
  rows.reserve(static_cast<std::size_t>(total) * 7);
  cols.reserve(rows.capacity());
  vals.reserve(rows.capacity());
  auto id = [n](int i, int j, int k) { return i + n * (j + n * k); };
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const int p = id(i, j, k);
        const std::array<std::array<int, 4>, 6> nb{{{i - 1, j, k, 0},
                                                     {i + 1, j, k, 1},
                                                     {i, j - 1, k, 0},
                                                     {i, j + 1, k, 1},
                                                     {i, j, k - 1, 0},
                                                     {i, j, k + 1, 1}}};
        double diag = diag_shift;
        for (const auto& q : nb) {
          const bool inside = q[0] >= 0 && q[0] < n && q[1] >= 0 && q[1] < n && q[2] >= 0 && q[2] < n;
          const int other = inside ? id(q[0], q[1], q[2]) : -1;
          const double w = coupling(p, other);
          const double up = q[3] == 0 ? upwind : 0.0;
          diag += w + up;
          if (inside) {
            rows.push_back(p);
            cols.push_back(other);
            vals.push_back(-w - up);
          }
        }
        rows.push_back(p);
        cols.push_back(p);
        vals.push_back(diag);
      }
    }
  }
  return CSRMatrix::from_triplets(total, rows, cols, vals);
}

}  // namespace

CSRMatrix gen_poisson(int n) {
  check_n(n);
  return stencil(n, [](int, int) { return 1.0; }, 0.0, 0.0);
}

std::vector<double> gen_vc_field(int n, std::uint64_t seed) {
  check_n(n);
  const std::size_t total = static_cast<std::size_t>(n) * n * n;
  SplitMix64 rng(seed);
  std::vector<double> field(total);
  for (double& v : field) v = rng.uniform();

  constexpr double sigma = 4.0;  // 4h in cells
  constexpr int radius = 16;     // 4 deviations
  std::array<double, 2 * radius + 1> kernel{};
  double sum = 0.0;
  for (int d = -radius; d <= radius; ++d) {
    kernel[d + radius] = std::exp(-0.5 * d * d / (sigma * sigma));
    sum += kernel[d + radius];
  }
  for (double& w : kernel) w /= sum;

  std::vector<double> tmp(total);
  const std::array<std::size_t, 3> stride{1, static_cast<std::size_t>(n),
                                          static_cast<std::size_t>(n) * n};
  for (int axis = 0; axis < 3; ++axis) {
    for (std::size_t p = 0; p < total; ++p) {
      const int coord = static_cast<int>((p / stride[axis]) % n);
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        const int c = coord + d;
        const double v = (c < 0 || c >= n) ? 0.5 : field[p + static_cast<std::ptrdiff_t>(d) * stride[axis]];
        acc += kernel[d + radius] * v;
      }
      tmp[p] = acc;
    }
    field.swap(tmp);
  }
  for (double& v : field) v = v > 0.5 ? 1e2 : 1e-2;
  return field;
}

CSRMatrix gen_vc_poisson(int n, const std::vector<double>& field) {
  check_n(n);
  if (field.size() != static_cast<std::size_t>(n) * n * n) {
    throw Error(ErrorKind::DimensionMismatch, "gen_vc_poisson: field has wrong size");
  }
  return stencil(
      n,
      [&field](int p, int q) {
        if (q < 0) return field[p];
        return 2.0 * field[p] * field[q] / (field[p] + field[q]);
      },
      0.0, 0.0);
}

CSRMatrix gen_vc_poisson(int n, std::uint64_t seed) { return gen_vc_poisson(n, gen_vc_field(n, seed)); }

CSRMatrix gen_helmholtz(int n, double frequency) {
  check_n(n);
  const double kh = 2.0 * std::numbers::pi * frequency / n;
  return stencil(n, [](int, int) { return 1.0; }, 0.0, -kh * kh);
}

CSRMatrix gen_convection_diffusion(int n, double peclet) {
  check_n(n);
  return stencil(n, [](int, int) { return 1.0; }, peclet / n, 0.0);
}

ProblemKind parse_problem_kind(const std::string& name) {
  if (name == "poisson") return ProblemKind::Poisson;
  if (name == "vcpoisson") return ProblemKind::VCPoisson;
  if (name == "helmholtz") return ProblemKind::Helmholtz;
  if (name == "convdiff") return ProblemKind::ConvectionDiffusion;
  throw Error(ErrorKind::InvalidArgument, "unknown problem '" + name + "'");
}

const char* to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::Poisson: return "poisson";
    case ProblemKind::VCPoisson: return "vcpoisson";
    case ProblemKind::Helmholtz: return "helmholtz";
    case ProblemKind::ConvectionDiffusion: return "convdiff";
  }
  return "?";
}

Problem generate(const ProblemSpec& spec) {
  check_n(spec.n);
  switch (spec.kind) {
    case ProblemKind::Poisson:
      return {gen_poisson(spec.n), SymmetryFlag::SPD};
    case ProblemKind::VCPoisson:
      return {gen_vc_poisson(spec.n, spec.seed), SymmetryFlag::SPD};
    case ProblemKind::Helmholtz:
      if (!(spec.frequency > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "helmholtz needs a positive frequency");
      }
      return {gen_helmholtz(spec.n, spec.frequency), SymmetryFlag::SymmetricIndefinite};
    case ProblemKind::ConvectionDiffusion:
      return {gen_convection_diffusion(spec.n, spec.peclet), SymmetryFlag::General};
  }
  throw Error(ErrorKind::InvalidArgument, "unknown problem kind");
}

}  // namespace hsolve
