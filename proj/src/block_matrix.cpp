#include "hsolve/block_matrix.hpp"

#include <algorithm>
#include <deque>
#include <string>

#include "hsolve/error.hpp"

namespace hsolve {

const char* to_string(SymmetryFlag flag) {
  switch (flag) {
    case SymmetryFlag::SPD: return "spd";
    case SymmetryFlag::SymmetricIndefinite: return "symmetric";
    case SymmetryFlag::General: return "general";
  }
  return "general";
}

ClusterPartition ClusterPartition::from_clusters(int num_dofs,
                                                 std::vector<std::vector<int>> clusters) {
  ClusterPartition p;
  p.num_dofs = num_dofs;
  p.clusters = std::move(clusters);
  p.cluster_of.assign(static_cast<std::size_t>(num_dofs), -1);
  for (int c = 0; c < p.size(); ++c) {
    for (int dof : p.clusters[c]) {
      if (dof < 0 || dof >= num_dofs) {
        throw Error(ErrorKind::InvalidArgument, "partition: DOF out of range", dof);
      }
      if (p.cluster_of[dof] != -1) {
        throw Error(ErrorKind::InvalidArgument, "partition: DOF in two clusters", dof);
      }
      p.cluster_of[dof] = c;
    }
  }
  p.validate();
  return p;
}

ClusterPartition ClusterPartition::contiguous(int num_dofs, int block) {
  std::vector<std::vector<int>> clusters;
  for (int start = 0; start < num_dofs; start += block) {
    std::vector<int> c;
    for (int d = start; d < std::min(num_dofs, start + block); ++d) c.push_back(d);
    clusters.push_back(std::move(c));
  }
  return from_clusters(num_dofs, std::move(clusters));
}

void ClusterPartition::validate() const {
  if (static_cast<int>(cluster_of.size()) != num_dofs) {
    throw Error(ErrorKind::InvalidArgument, "partition: cluster_of has wrong length");
  }
  std::vector<int> seen(static_cast<std::size_t>(num_dofs), 0);
  for (int c = 0; c < size(); ++c) {
    if (clusters[c].empty()) throw Error(ErrorKind::InvalidArgument, "partition: empty cluster", c);
    for (int dof : clusters[c]) {
      if (dof < 0 || dof >= num_dofs || cluster_of[dof] != c || seen[dof]++) {
        throw Error(ErrorKind::InvalidArgument, "partition: not a disjoint cover", dof);
      }
    }
  }
  for (int dof = 0; dof < num_dofs; ++dof) {
    if (!seen[dof]) throw Error(ErrorKind::InvalidArgument, "partition: DOF not covered", dof);
  }
}

bool BlockPattern::contains(int i, int j) const {
  const auto& r = rows[i];
  return std::binary_search(r.begin(), r.end(), j);
}

std::size_t BlockPattern::count() const {
  std::size_t total = 0;
  for (const auto& r : rows) total += r.size();
  return total;
}

BlockPattern BlockPattern::diagonal(int m) {
  BlockPattern p;
  p.rows.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) p.rows[i] = {i};
  return p;
}

BlockPattern BlockPattern::from_pairs(int m, const std::vector<std::pair<int, int>>& pairs) {
  BlockPattern p = diagonal(m);
  for (auto [i, j] : pairs) {
    p.rows[i].push_back(j);
    p.rows[j].push_back(i);
  }
  for (auto& r : p.rows) {
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
  }
  return p;
}

BlockMatrix::BlockMatrix(std::vector<int> sizes, SymmetryFlag flag)
    : sizes_(std::move(sizes)), rows_(sizes_.size()), flag_(flag) {}

int BlockMatrix::num_dofs() const {
  int total = 0;
  for (int s : sizes_) total += s;
  return total;
}

const Matrix* BlockMatrix::find(int i, int j) const {
  const auto it = rows_[i].find(j);
  return it == rows_[i].end() ? nullptr : &it->second;
}

Matrix* BlockMatrix::find(int i, int j) {
  auto it = rows_[i].find(j);
  return it == rows_[i].end() ? nullptr : &it->second;
}

Matrix& BlockMatrix::at(int i, int j) {
  auto [it, inserted] = rows_[i].try_emplace(j);
  if (inserted) it->second = Matrix::Zero(sizes_[i], sizes_[j]);
  return it->second;
}

void BlockMatrix::set(int i, int j, Matrix block) {
  if (block.rows() != sizes_[i] || block.cols() != sizes_[j]) {
    throw Error(ErrorKind::DimensionMismatch,
                "BlockMatrix::set: block (" + std::to_string(i) + "," + std::to_string(j) +
                    ") has wrong shape");
  }
  rows_[i][j] = std::move(block);
}

void BlockMatrix::put(int i, int j, Matrix block) { rows_[i][j] = std::move(block); }

void BlockMatrix::erase(int i, int j) { rows_[i].erase(j); }

std::size_t BlockMatrix::num_blocks() const {
  std::size_t total = 0;
  for (const auto& r : rows_) total += r.size();
  return total;
}

std::size_t BlockMatrix::stored_bytes() const {
  std::size_t total = 0;
  for (const auto& r : rows_) {
    for (const auto& [j, b] : r) total += static_cast<std::size_t>(b.size()) * sizeof(double);
  }
  return total;
}

Matrix BlockMatrix::to_dense() const {
  std::vector<int> offset(sizes_.size() + 1, 0);
  for (std::size_t i = 0; i < sizes_.size(); ++i) offset[i + 1] = offset[i] + sizes_[i];
  Matrix d = Matrix::Zero(offset.back(), offset.back());
  for (int i = 0; i < num_clusters(); ++i) {
    for (const auto& [j, b] : rows_[i]) d.block(offset[i], offset[j], b.rows(), b.cols()) = b;
  }
  return d;
}

BlockPattern block_pattern(const BlockMatrix& a) {
  BlockPattern p = BlockPattern::diagonal(a.num_clusters());
  for (int i = 0; i < a.num_clusters(); ++i) {
    for (const auto& [j, b] : a.row(i)) {
      if (j != i && b.size() > 0 && b.cwiseAbs().maxCoeff() > 0.0) {
        p.rows[i].push_back(j);
        p.rows[j].push_back(i);
      }
    }
  }
  for (auto& r : p.rows) {
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
  }
  return p;
}

std::vector<int> neighbors(const BlockPattern& p, int i) {
  std::vector<int> out;
  for (int j : p.rows[i]) {
    if (j != i) out.push_back(j);
  }
  return out;
}

BlockPattern pattern_square(const BlockPattern& p) {
  BlockPattern sq;
  sq.rows.resize(p.rows.size());
  std::vector<char> mark(p.rows.size(), 0);
  for (int i = 0; i < p.size(); ++i) {
    std::vector<int>& out = sq.rows[i];
    for (int k : p.rows[i]) {
      for (int j : p.rows[k]) {
        if (!mark[j]) {
          mark[j] = 1;
          out.push_back(j);
        }
      }
    }
    for (int j : out) mark[j] = 0;
    std::sort(out.begin(), out.end());
  }
  return sq;
}

std::vector<int> bfs_distances(const BlockPattern& p, int source, int max_dist) {
  std::vector<int> dist(p.rows.size(), -1);
  std::deque<int> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    if (dist[u] == max_dist) continue;
    for (int v : p.rows[u]) {
      if (dist[v] == -1) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

BlockMatrix assemble(const CSRMatrix& csr, const ClusterPartition& partition, SymmetryFlag flag) {
  if (csr.n != partition.num_dofs) {
    throw Error(ErrorKind::DimensionMismatch, "assemble: matrix and partition sizes differ");
  }
  if (flag != SymmetryFlag::General && !csr.pattern_symmetric()) {
    throw Error(ErrorKind::AsymmetricPattern, "assemble: pattern is not symmetric");
  }
  std::vector<int> sizes(partition.clusters.size());
  std::vector<int> local(static_cast<std::size_t>(partition.num_dofs));
  for (int c = 0; c < partition.size(); ++c) {
    sizes[c] = static_cast<int>(partition.clusters[c].size());
    for (std::size_t k = 0; k < partition.clusters[c].size(); ++k) {
      local[partition.clusters[c][k]] = static_cast<int>(k);
    }
  }
  BlockMatrix a(sizes, flag);
  for (int c = 0; c < partition.size(); ++c) a.at(c, c);
  for (int i = 0; i < csr.n; ++i) {
    const int ci = partition.cluster_of[i];
    for (int p = csr.row_ptr[i]; p < csr.row_ptr[i + 1]; ++p) {
      const int j = csr.col_idx[p];
      a.at(ci, partition.cluster_of[j])(local[i], local[j]) += csr.values[p];
    }
  }
  // Keep block storage structurally symmetric so a row of blocks also lists
  // the column; unsymmetric inputs get explicit zero partners.
  for (int ci = 0; ci < a.num_clusters(); ++ci) {
    for (const auto& [cj, b] : a.row(ci)) a.at(cj, ci);
  }
  return a;
}

CSRMatrix flatten(const BlockMatrix& a, const ClusterPartition& partition) {
  std::vector<int> r, c;
  std::vector<double> v;
  for (int ci = 0; ci < a.num_clusters(); ++ci) {
    const auto& rows = partition.clusters[ci];
    for (const auto& [cj, b] : a.row(ci)) {
      const auto& cols = partition.clusters[cj];
      for (Eigen::Index jj = 0; jj < b.cols(); ++jj) {
        for (Eigen::Index ii = 0; ii < b.rows(); ++ii) {
          if (b(ii, jj) == 0.0) continue;
          r.push_back(rows[ii]);
          c.push_back(cols[jj]);
          v.push_back(b(ii, jj));
        }
      }
    }
  }
  return CSRMatrix::from_triplets(partition.num_dofs, r, c, v);
}

}  // namespace hsolve
