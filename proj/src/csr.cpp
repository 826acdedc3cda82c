#include "hsolve/csr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hsolve/error.hpp"

namespace hsolve {

CSRMatrix CSRMatrix::from_triplets(int n, std::span<const int> rows, std::span<const int> cols,
                                   std::span<const double> vals) {
  if (rows.size() != cols.size() || rows.size() != vals.size()) {
    throw Error(ErrorKind::DimensionMismatch, "from_triplets: array lengths differ");
  }
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rows[a] != rows[b] ? rows[a] < rows[b] : cols[a] < cols[b];
  });
  CSRMatrix m;
  m.n = n;
  m.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
  for (std::size_t t = 0; t < order.size(); ++t) {
    const std::size_t e = order[t];
    if (rows[e] < 0 || rows[e] >= n || cols[e] < 0 || cols[e] >= n) {
      throw Error(ErrorKind::DimensionMismatch, "from_triplets: index out of range");
    }
    const bool duplicate = !m.col_idx.empty() && t > 0 && rows[order[t - 1]] == rows[e] &&
                           cols[order[t - 1]] == cols[e];
    if (duplicate) {
      m.values.back() += vals[e];
    } else {
      m.col_idx.push_back(cols[e]);
      m.values.push_back(vals[e]);
      ++m.row_ptr[static_cast<std::size_t>(rows[e]) + 1];
    }
  }
  for (int i = 0; i < n; ++i) m.row_ptr[i + 1] += m.row_ptr[i];
  return m;
}

void CSRMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) acc += values[p] * x[col_idx[p]];
    y[i] = acc;
  }
}

Vector CSRMatrix::multiply(const Vector& x) const {
  if (x.size() != n) throw Error(ErrorKind::DimensionMismatch, "CSRMatrix::multiply: size");
  Vector y(n);
  multiply(std::span<const double>(x.data(), x.size()), std::span<double>(y.data(), y.size()));
  return y;
}

Matrix CSRMatrix::to_dense() const {
  Matrix d = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) d(i, col_idx[p]) += values[p];
  }
  return d;
}

CSRMatrix CSRMatrix::transpose() const {
  std::vector<int> r, c;
  std::vector<double> v;
  r.reserve(col_idx.size());
  for (int i = 0; i < n; ++i) {
    for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
      r.push_back(col_idx[p]);
      c.push_back(i);
      v.push_back(values[p]);
    }
  }
  return from_triplets(n, r, c, v);
}

bool CSRMatrix::pattern_symmetric() const {
  const CSRMatrix t = transpose();
  return t.row_ptr == row_ptr && t.col_idx == col_idx;
}

bool CSRMatrix::values_symmetric(double rel_tol) const {
  const CSRMatrix t = transpose();
  if (t.row_ptr != row_ptr || t.col_idx != col_idx) return false;
  double scale = 0.0;
  for (double v : values) scale = std::max(scale, std::abs(v));
  for (std::size_t p = 0; p < values.size(); ++p) {
    if (std::abs(values[p] - t.values[p]) > rel_tol * scale) return false;
  }
  return true;
}

std::vector<std::vector<int>> CSRMatrix::adjacency() const {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
      const int j = col_idx[p];
      if (j == i) continue;
      adj[i].push_back(j);
      adj[j].push_back(i);
    }
  }
  for (auto& row : adj) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  return adj;
}

}  // namespace hsolve
