#pragma once

#include <span>
#include <vector>

#include "hsolve/dense.hpp"

namespace hsolve {

/// Square sparse matrix in compressed sparse row form. Column indices are
/// sorted within each row and unique.
struct CSRMatrix {
  int n = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> col_idx;
  std::vector<double> values;

  int nnz() const { return static_cast<int>(col_idx.size()); }

  /// Builds from unsorted (row, col, value) triplets; duplicates are summed.
  static CSRMatrix from_triplets(int n, std::span<const int> rows, std::span<const int> cols,
                                 std::span<const double> vals);

  void multiply(std::span<const double> x, std::span<double> y) const;
  Vector multiply(const Vector& x) const;
  Matrix to_dense() const;
  CSRMatrix transpose() const;

  /// Structural symmetry of the stored pattern.
  bool pattern_symmetric() const;
  /// Numeric symmetry within `rel_tol` of the largest magnitude entry.
  bool values_symmetric(double rel_tol = 1e-12) const;

  /// Scalar adjacency (pattern symmetrized, no self loops).
  std::vector<std::vector<int>> adjacency() const;

  bool operator==(const CSRMatrix&) const = default;
};

}  // namespace hsolve
