#pragma once

// Cluster-partitioned block storage and the quotient-graph queries used by
// the factorization and the parallel runtime.

#include <cstdint>
#include <map>
#include <vector>

#include "hsolve/csr.hpp"
#include "hsolve/dense.hpp"

namespace hsolve {

enum class SymmetryFlag : std::uint8_t { SPD = 0, SymmetricIndefinite = 1, General = 2 };

const char* to_string(SymmetryFlag flag);
inline bool is_symmetric(SymmetryFlag f) { return f != SymmetryFlag::General; }

/// Disjoint cover of {0..num_dofs-1} by nonempty clusters.
struct ClusterPartition {
  int num_dofs = 0;
  std::vector<std::vector<int>> clusters;
  std::vector<int> cluster_of;

  int size() const { return static_cast<int>(clusters.size()); }

  static ClusterPartition from_clusters(int num_dofs, std::vector<std::vector<int>> clusters);
  /// Clusters of `block` consecutive DOFs (last one possibly shorter).
  static ClusterPartition contiguous(int num_dofs, int block);

  /// Throws InvalidArgument if the partition is not a disjoint nonempty cover.
  void validate() const;
};

/// Symmetric boolean cluster adjacency; the diagonal is always present.
struct BlockPattern {
  std::vector<std::vector<int>> rows;  // sorted column ids per row

  int size() const { return static_cast<int>(rows.size()); }
  bool contains(int i, int j) const;
  std::size_t count() const;

  static BlockPattern diagonal(int m);
  /// Symmetrizes and adds the diagonal.
  static BlockPattern from_pairs(int m, const std::vector<std::pair<int, int>>& pairs);

  bool operator==(const BlockPattern&) const = default;
};

/// Sparse matrix of dense blocks keyed by (cluster, cluster). Each cluster
/// has a current size (it shrinks to its coarse part once processed).
class BlockMatrix {
 public:
  using Row = std::map<int, Matrix>;

  BlockMatrix() = default;
  BlockMatrix(std::vector<int> sizes, SymmetryFlag flag);

  int num_clusters() const { return static_cast<int>(sizes_.size()); }
  int cluster_size(int i) const { return sizes_[i]; }
  const std::vector<int>& sizes() const { return sizes_; }
  void set_cluster_size(int i, int size) { sizes_[i] = size; }
  SymmetryFlag flag() const { return flag_; }
  int num_dofs() const;

  const Row& row(int i) const { return rows_[i]; }
  const Matrix* find(int i, int j) const;
  Matrix* find(int i, int j);
  /// Returns the block, creating a zero block of the right shape if absent.
  Matrix& at(int i, int j);
  void set(int i, int j, Matrix block);
  /// Like set, without the shape check against cluster_size(). Used by
  /// worker-local stores where sizes of remote clusters lag behind.
  void put(int i, int j, Matrix block);
  void erase(int i, int j);
  std::size_t num_blocks() const;
  std::size_t stored_bytes() const;

  /// Scalar matrix in cluster-major order (cluster 0's DOFs first, ...).
  Matrix to_dense() const;

 private:
  std::vector<int> sizes_;
  std::vector<Row> rows_;
  SymmetryFlag flag_ = SymmetryFlag::General;
};

/// (i,j) present iff block (i,j) exists and has an entry with |value| > 0,
/// plus every diagonal position. Structurally unsymmetric (General) inputs
/// are symmetrized so the result is always a valid BlockPattern.
BlockPattern block_pattern(const BlockMatrix& a);

/// Cluster ids j != i adjacent to i.
std::vector<int> neighbors(const BlockPattern& p, int i);

/// Boolean square of the pattern.
BlockPattern pattern_square(const BlockPattern& p);

/// Graph distances from `source` up to `max_dist` (others are -1).
std::vector<int> bfs_distances(const BlockPattern& p, int source, int max_dist);

/// Splits a scalar CSR matrix into blocks. Throws DimensionMismatch and, for
/// symmetric flags, AsymmetricPattern. Diagonal blocks always exist, and
/// block (j,i) is stored whenever (i,j) is (zero-filled if needed).
BlockMatrix assemble(const CSRMatrix& csr, const ClusterPartition& partition, SymmetryFlag flag);

/// Inverse of assemble: scatters blocks back to global DOF numbering.
/// Zero entries inside stored blocks are dropped.
CSRMatrix flatten(const BlockMatrix& a, const ClusterPartition& partition);

}  // namespace hsolve
