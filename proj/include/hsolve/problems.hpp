#pragma once

// Test problems on the unit cube, n points per dimension, lexicographic
// numbering i + n (j + n k). All stencils use unit spacing (diagonal 6 for
// the Laplacian) with homogeneous Dirichlet conditions folded in.

#include <cstdint>
#include <string>
#include <vector>

#include "hsolve/block_matrix.hpp"
#include "hsolve/csr.hpp"

namespace hsolve {

/// SplitMix64: the field generator, fixed so fields reproduce across builds.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  /// Uniform in [0, 1) from the top 53 bits.
  double uniform();

 private:
  std::uint64_t state_;
};

/// 7-point Laplacian.
CSRMatrix gen_poisson(int n);

/// Two-valued coefficient field: uniform noise, separable Gaussian blur with
/// deviation 4 cells (truncated at 4 deviations, padded with the noise mean
/// 0.5), then 1e2 where the smoothed value exceeds 0.5 and 1e-2 elsewhere.
std::vector<double> gen_vc_field(int n, std::uint64_t seed);

/// -div(a grad u) with harmonic-mean face coefficients; a boundary face uses
/// the coefficient of its cell.
CSRMatrix gen_vc_poisson(int n, std::uint64_t seed);
CSRMatrix gen_vc_poisson(int n, const std::vector<double>& field);

/// Laplacian minus (2 pi f h)^2 I with h = 1/n, i.e. n/f points per
/// wavelength. Symmetric and, for large enough f, indefinite.
CSRMatrix gen_helmholtz(int n, double frequency);

/// Convection-diffusion with a constant wind (upwinded first-order terms);
/// nonsymmetric, diagonally dominant.
CSRMatrix gen_convection_diffusion(int n, double peclet);

enum class ProblemKind { Poisson, VCPoisson, Helmholtz, ConvectionDiffusion };

struct ProblemSpec {
  ProblemKind kind = ProblemKind::Poisson;
  int n = 16;
  std::uint64_t seed = 1;
  double frequency = 1.0;  // Helmholtz
  double peclet = 10.0;    // convection-diffusion
};

ProblemKind parse_problem_kind(const std::string& name);
const char* to_string(ProblemKind kind);

struct Problem {
  CSRMatrix matrix;
  SymmetryFlag flag = SymmetryFlag::SPD;
};

/// Throws InvalidArgument for n < 2 or a nonpositive frequency.
Problem generate(const ProblemSpec& spec);

}  // namespace hsolve
