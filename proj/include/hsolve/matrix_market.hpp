#pragma once

// Matrix Market coordinate files (real and integer fields).

#include <iosfwd>
#include <string>

#include "hsolve/block_matrix.hpp"
#include "hsolve/csr.hpp"

namespace hsolve {

struct MatrixMarketData {
  CSRMatrix matrix;
  SymmetryFlag flag = SymmetryFlag::General;
};

/// Symmetric and skew-symmetric files are expanded to full storage and
/// duplicates summed. The flag is SPD for a symmetric matrix with a positive
/// diagonal, SymmetricIndefinite for other symmetric ones (a "general" file
/// whose values are symmetric to 1e-12 relative counts as symmetric), and
/// General otherwise. Throws ParseError (index = line), UnsupportedField and
/// Io.
MatrixMarketData read_matrix_market(std::istream& in);
MatrixMarketData read_matrix_market(const std::string& path);

/// Symmetric flags write the lower triangle under a "symmetric" header.
/// Values are printed with 17 significant digits so reading back is exact.
void write_matrix_market(std::ostream& out, const CSRMatrix& a, SymmetryFlag flag);
void write_matrix_market(const std::string& path, const CSRMatrix& a, SymmetryFlag flag);

/// Flag from the numbers alone, by the rule above.
SymmetryFlag classify_symmetry(const CSRMatrix& a);

}  // namespace hsolve
