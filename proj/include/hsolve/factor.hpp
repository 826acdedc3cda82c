#pragma once

// Hierarchical factorization by low-rank elimination of fill-in.
//
// One level: the DOFs are clustered, and every cluster s is processed in a
// fixed order. Fill-in blocks of s (blocks to clusters that are not
// neighbors in the level-initial pattern) are compressed as U Z, the fine
// part of s is decoupled by a change of basis and eliminated, and only the
// k coarse DOFs of s survive. The coarse DOFs of all clusters form the next
// level's matrix; recursion ends with a dense factorization.
//
// General (nonsymmetric) matrices use two-sided operators: the left basis
// change uses V_r with V_r^T A_ss^{-1} U = 0 and the right one V_c with
// U^T A_ss^{-1} V_c = 0, both against a single U that compresses the row
// and column fill-in together.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hsolve/block_matrix.hpp"
#include "hsolve/dense.hpp"
#include "hsolve/partition.hpp"

namespace hsolve {

/// Stored pieces of the low-rank elimination operator of one cluster.
struct ClusterOperator {
  int id = -1;
  int size = 0;         // |pi_s| at the time of elimination
  int coarse_size = 0;  // k
  /// No transformation at all (k = size): the cluster moves to the next
  /// level unchanged. Set when compression would not remove anything or the
  /// diagonal block is too ill-conditioned for the basis change.
  bool passthrough = false;

  DenseFactor a_ss;  // empty when the sparsifier is the identity (k = 0)
  Matrix u;          // size x k
  Matrix v_row;      // size x (size - k)
  Matrix v_col;      // General only; empty means v_col = v_row
  DenseFactor fine;  // of F = V_r^T A_ss^{-1} V_c, or A_ss itself when k = 0

  // Solve-phase operators assembled from the pieces above (empty when
  // k = 0 or passthrough): [stash; coarse] = q_fwd y_s in the forward pass,
  // x_s = q_bwd [z; x_c] in the backward pass. q_bwd is empty when it equals
  // q_fwd^T (symmetric input with a Cholesky-factored F).
  Matrix q_fwd;  // size x size
  Matrix q_bwd;

  std::vector<int> neighbors;  // ascending
  std::vector<Matrix> wr;      // L^{-1} P V_r^T A_ss^{-1} A_sj, (size-k) x |j|
  std::vector<Matrix> wc;      // A_js A_ss^{-1} V_c U_F^{-1}; empty when F is Cholesky

  int fine_size() const { return passthrough ? 0 : size - coarse_size; }
  bool identity_sparsifier() const { return !passthrough && u.cols() == 0; }
  /// Left coupling for neighbor index q (Wr^T on the Cholesky path).
  Matrix left_coupling(std::size_t q) const { return wc.empty() ? Matrix(wr[q].transpose()) : wc[q]; }
  std::size_t payload_bytes() const;
};

/// Update produced by eliminating one cluster. Applying the writes of
/// successive eliminations in order reproduces the sequential Schur
/// complement exactly; the parallel runtime routes them to block holders.
struct BlockWrite {
  enum class Kind : std::uint8_t { Set = 0, Subtract = 1, Erase = 2 };
  Kind kind = Kind::Set;
  int row = 0;
  int col = 0;
  Matrix value;
};

struct Elimination {
  ClusterOperator op;
  std::vector<BlockWrite> writes;
  bool compression_skipped = false;  // ill-conditioned A_ss forced passthrough
  double flops = 0.0;                // dense operation count estimate
};

/// Processes cluster s of `a`. Reads only block row and column s; nothing
/// is modified. `initial` is the level-initial block pattern that separates
/// neighbors from fill-in. Throws SingularDiagonal(s) when A_ss cannot be
/// factored.
Elimination low_rank_eliminate(const BlockMatrix& a, const BlockPattern& initial, int s,
                               const RankPolicy& policy);

/// Applies the result of low_rank_eliminate: resizes cluster s to its
/// coarse size and performs the writes in order.
void apply_elimination(BlockMatrix& a, const Elimination& e);

/// Applies one write without shape checks against cluster sizes.
void apply_write(BlockMatrix& a, const BlockWrite& w);

struct FactorConfig {
  PartitionConfig partition;
  RankPolicy policy = RankPolicy::fixed(8);
  /// Dimension at or below which the remaining matrix is factored densely;
  /// 0 selects max(2 r, 128).
  int stop_threshold = 0;
  /// Structural check of every write against pattern_square of the
  /// level-initial pattern. Violations are counted, not thrown.
  bool check_fill_in = true;
  int max_levels = 64;

  int resolved_stop_threshold() const;
};

struct LevelStats {
  int dofs = 0;
  int clusters = 0;
  int coarse_dofs = 0;
  int max_cluster_size = 0;
  int max_rank = 0;
  int passthrough = 0;
  std::vector<int> compression_skipped;  // cluster ids
  std::int64_t fill_in_checked = 0;
  std::int64_t fill_in_violations = 0;
  double flops = 0.0;
  double seconds = 0.0;
};

struct FactorStats {
  std::vector<LevelStats> levels;
  int top_dim = 0;
  double flops = 0.0;
  double seconds = 0.0;
  std::int64_t fill_in_violations() const;
  /// Ratio of consecutive max cluster sizes r_{i+1} / r_i (largest over levels).
  double max_growth_ratio() const;
};

struct FactorLevel {
  ClusterPartition partition;  // over this level's DOFs
  std::vector<int> order;      // elimination order (cluster ids)
  std::vector<ClusterOperator> ops;  // indexed by cluster id
  int num_coarse = 0;

  /// Offset of each cluster's coarse block in the next level's numbering
  /// (clusters ascending by id).
  std::vector<int> coarse_offsets() const;
};

struct HierarchicalFactor {
  int num_dofs = 0;
  SymmetryFlag flag = SymmetryFlag::SPD;
  RankPolicy policy;
  std::vector<FactorLevel> levels;
  DenseFactor top;
  FactorStats stats;

  /// Bytes held by operators and the top factorization.
  std::size_t memory_bytes() const;
};

/// Hooks that fix the per-level choices. The default plans sequentially:
/// partitioner cluster order, coarse clusters grouped by the partitioner.
class LevelPlanner {
 public:
  virtual ~LevelPlanner() = default;

  virtual ClusterPartition partition_level0(const CSRMatrix& a, const PartitionConfig& config);
  /// Groups `live` previous-level clusters; the returned partition indexes
  /// positions in `live`. `pattern` and `weights` are restricted to `live`.
  virtual ClusterPartition partition_coarse(int level, const BlockPattern& pattern,
                                            std::span<const int> weights,
                                            std::span<const int> live,
                                            const PartitionConfig& config);
  virtual std::vector<int> order(int level, const BlockMatrix& a, const BlockPattern& pattern);
  /// Eliminates every cluster in `order`. Default: one after another on `a`.
  virtual void eliminate_level(int level, BlockMatrix& a, const BlockPattern& pattern,
                               std::span<const int> order, const FactorConfig& config,
                               FactorLevel& out, LevelStats& stats);
};

/// Records each write of `e` into the fill-in counters of `stats`.
void check_fill_in(const Elimination& e, const BlockPattern& allowed, LevelStats& stats);

HierarchicalFactor hierarchical_factor(const CSRMatrix& a, SymmetryFlag flag,
                                       const FactorConfig& config, LevelPlanner* planner = nullptr);

/// Same, starting from an already clustered level-0 matrix.
HierarchicalFactor hierarchical_factor(BlockMatrix a, const ClusterPartition& partition,
                                       const FactorConfig& config, LevelPlanner* planner = nullptr);

/// Forward application of one operator to the segment y_s of its cluster.
struct ForwardStep {
  Vector stash;                // scaled fine part, kept for the backward pass
  Vector coarse;               // new segment of s (length k)
  std::vector<Vector> deltas;  // y_j -= deltas[q] for j = op.neighbors[q]
};
ForwardStep forward_step(const ClusterOperator& op, const Vector& ys);

/// Backward application: x_s from the stash, the coarse solution x_c and the
/// current segments of the neighbors (in op.neighbors order).
Vector backward_step(const ClusterOperator& op, const Vector& stash, const Vector& xc,
                     std::span<const Vector* const> neighbor_x);

/// x = (A^fac)^{-1} b. Throws DimensionMismatch.
Vector apply_solve(const HierarchicalFactor& f, const Vector& b);

/// Binary format: magic "HSF1", little-endian, versioned payload.
void save_factor(const HierarchicalFactor& f, std::ostream& out);
HierarchicalFactor load_factor(std::istream& in);
void save_factor(const HierarchicalFactor& f, const std::string& path);
HierarchicalFactor load_factor(const std::string& path);

}  // namespace hsolve
