#include "hsolve/factor.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <string>

#include "hsolve/error.hpp"

namespace hsolve {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::size_t matrix_bytes(const Matrix& m) { return static_cast<std::size_t>(m.size()) * sizeof(double); }

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Residual check shared by both sides of the basis change.
bool solve_ok(const Matrix& a, const Matrix& x, const Matrix& rhs) {
  return x.allFinite() && (a * x - rhs).norm() <= 1e-8 * rhs.norm();
}

double gemm_flops(Eigen::Index m, Eigen::Index n, Eigen::Index k) {
  return 2.0 * static_cast<double>(m) * static_cast<double>(n) * static_cast<double>(k);
}

void make_passthrough(Elimination& e, int m) {
  e.op.passthrough = true;
  e.op.coarse_size = m;
  e.op.neighbors.clear();
  e.writes.clear();
}

}  // namespace

std::size_t ClusterOperator::payload_bytes() const {
  std::size_t total = a_ss.payload_bytes() + fine.payload_bytes() + matrix_bytes(u) +
                      matrix_bytes(v_row) + matrix_bytes(v_col) + matrix_bytes(q_fwd) +
                      matrix_bytes(q_bwd) + neighbors.size() * sizeof(int);
  for (const Matrix& w : wr) total += matrix_bytes(w);
  for (const Matrix& w : wc) total += matrix_bytes(w);
  return total;
}

Elimination low_rank_eliminate(const BlockMatrix& a, const BlockPattern& initial, int s,
                               const RankPolicy& policy) {
  Elimination e;
  ClusterOperator& op = e.op;
  op.id = s;
  const Matrix* a_ss_ptr = a.find(s, s);
  if (a_ss_ptr == nullptr) {
    throw Error(ErrorKind::SingularDiagonal, "cluster " + std::to_string(s) + " has no diagonal block", s);
  }
  const Matrix& a_ss = *a_ss_ptr;
  const int m = static_cast<int>(a_ss.rows());
  op.size = m;
  if (m == 0) {
    make_passthrough(e, 0);
    return e;
  }
  const SymmetryFlag flag = a.flag();
  const bool symmetric = is_symmetric(flag);
  const bool spd = flag == SymmetryFlag::SPD;

  std::vector<int> far;
  for (const auto& [j, b] : a.row(s)) {
    if (j == s || b.cols() == 0) continue;
    (initial.contains(s, j) ? op.neighbors : far).push_back(j);
  }
  auto row_block = [&](int j) -> const Matrix& { return *a.find(s, j); };
  auto col_block = [&](int j) -> const Matrix& {
    const Matrix* b = a.find(j, s);
    if (b == nullptr) {
      throw Error(ErrorKind::AsymmetricPattern,
                  "block (" + std::to_string(j) + "," + std::to_string(s) + ") missing");
    }
    return *b;
  };

  // Fill-in compression: one basis for all well-separated blocks, taking
  // the transposed column blocks along for general matrices.
  Eigen::Index far_cols = 0;
  for (int w : far) far_cols += row_block(w).cols();
  LowRankBasis basis;
  if (far_cols > 0) {
    Matrix fill(m, symmetric ? far_cols : 2 * far_cols);
    Eigen::Index c = 0;
    for (int w : far) {
      const Matrix& b = row_block(w);
      fill.middleCols(c, b.cols()) = b;
      c += b.cols();
    }
    if (!symmetric) {
      for (int w : far) {
        const Matrix& b = col_block(w);
        fill.middleCols(c, b.rows()) = b.transpose();
        c += b.rows();
      }
    }
    basis = truncated_lowrank(fill, policy);
    const double lo = static_cast<double>(std::min<Eigen::Index>(m, fill.cols()));
    e.flops += 4.0 * m * static_cast<double>(fill.cols()) * lo + 8.0 * lo * lo * lo;
  }
  const int k = basis.rank();
  if (k == m) {
    make_passthrough(e, m);
    return e;
  }
  op.coarse_size = k;

  std::vector<Matrix> row_fine(op.neighbors.size());  // R_j = X_f A_sj
  std::vector<Matrix> col_fine;                       // C_j = A_js Y_f (when needed)
  std::vector<Matrix> row_coarse(op.neighbors.size());
  std::vector<Matrix> col_coarse;
  Matrix coarse_diag;
  bool scaled = false;  // row_fine already carries L^{-1} P

  if (k == 0) {
    // No fill-in to keep: plain block elimination of the whole cluster.
    try {
      op.fine = DenseFactor::factor(a_ss, spd);
    } catch (const Error&) {
      throw Error(ErrorKind::SingularDiagonal, "cluster " + std::to_string(s) + ": singular A_ss", s);
    }
    e.flops += (spd ? 1.0 : 2.0) * m * m * static_cast<double>(m) / 3.0;
    for (std::size_t q = 0; q < op.neighbors.size(); ++q) row_fine[q] = row_block(op.neighbors[q]);
    if (op.fine.kind() == DenseFactor::Kind::Lu) {
      col_fine.resize(op.neighbors.size());
      for (std::size_t q = 0; q < op.neighbors.size(); ++q) {
        col_fine[q] = symmetric ? Matrix(row_fine[q].transpose()) : col_block(op.neighbors[q]);
      }
    }
  } else {
    try {
      op.a_ss = DenseFactor::factor(a_ss, spd);
    } catch (const Error&) {
      throw Error(ErrorKind::SingularDiagonal, "cluster " + std::to_string(s) + ": singular A_ss", s);
    }
    e.flops += (spd ? 1.0 : 2.0) * m * m * static_cast<double>(m) / 3.0;
    op.u = basis.u;
    const Matrix t = op.a_ss.solve(op.u);
    if (!solve_ok(a_ss, t, op.u)) {
      e.compression_skipped = true;
      make_passthrough(e, m);
      return e;
    }
    op.v_row = orthogonal_complement(t);
    Matrix t_col;
    if (!symmetric) {
      t_col = op.u;
      op.a_ss.solve_transpose_in_place(t_col);
      if (!solve_ok(a_ss.transpose(), t_col, op.u)) {
        e.compression_skipped = true;
        make_passthrough(e, m);
        return e;
      }
      op.v_col = orthogonal_complement(t_col);
    }
    const Matrix& v_col = symmetric ? op.v_row : op.v_col;
    const Matrix y_fine = op.a_ss.solve(v_col);
    Matrix f = op.v_row.transpose() * y_fine;
    if (symmetric) f = symmetrized(f);
    try {
      op.fine = DenseFactor::factor(f, spd);
    } catch (const Error&) {
      e.compression_skipped = true;
      make_passthrough(e, m);
      return e;
    }
    // Solve-phase operators. Rows of q_fwd: L^{-1} P V_r^T A_ss^{-1}, then
    // U^T A_ss^{-1}; columns of q_bwd: A_ss^{-1} V_c U_F^{-1}, then A_ss^{-1} U.
    op.q_fwd.resize(m, m);
    if (symmetric) {
      op.q_fwd.topRows(m - k) = y_fine.transpose();
      op.q_fwd.bottomRows(k) = t.transpose();
    } else {
      Matrix left = op.v_row;
      op.a_ss.solve_transpose_in_place(left);
      op.q_fwd.topRows(m - k) = left.transpose();
      op.q_fwd.bottomRows(k) = t_col.transpose();
    }
    op.fine.lower_solve_in_place(op.q_fwd.topRows(m - k));
    if (!symmetric || op.fine.kind() == DenseFactor::Kind::Lu) {
      op.q_bwd.resize(m, m);
      Matrix right = y_fine.transpose();
      op.fine.upper_transpose_solve_in_place(right);
      op.q_bwd.leftCols(m - k) = right.transpose();
      op.q_bwd.rightCols(k) = t;
    }
    e.flops += 2.0 * gemm_flops(m, m, m);

    coarse_diag = op.u.transpose() * t;
    if (symmetric) coarse_diag = symmetrized(coarse_diag);
    e.flops += 4.0 * m * m * static_cast<double>(m) + 2.0 * gemm_flops(m, m, m);

    // Couplings straight from the folded operators: q_fwd A_sj stacks
    // [L^{-1} P V_r^T A_ss^{-1} A_sj; U^T A_ss^{-1} A_sj], and A_js q_bwd
    // likewise for the column side.
    const bool need_cols = !symmetric || op.fine.kind() == DenseFactor::Kind::Lu;
    if (need_cols) op.wc.resize(op.neighbors.size());
    if (!symmetric) col_coarse.resize(op.neighbors.size());
    for (std::size_t q = 0; q < op.neighbors.size(); ++q) {
      const Matrix& b = row_block(op.neighbors[q]);
      const Matrix r = op.q_fwd * b;
      row_fine[q] = r.topRows(m - k);
      row_coarse[q] = r.bottomRows(k);
      e.flops += gemm_flops(m, b.cols(), m);
      if (need_cols) {
        const Matrix c = symmetric ? Matrix(b.transpose() * op.q_bwd)
                                    : Matrix(col_block(op.neighbors[q]) * op.q_bwd);
        op.wc[q] = c.leftCols(m - k);
        if (!symmetric) col_coarse[q] = c.rightCols(k);
        e.flops += gemm_flops(c.rows(), m, m);
      }
    }
    scaled = true;
  }

  // Scaled couplings and the Schur update on neighbor pairs.
  const std::size_t nn = op.neighbors.size();
  op.wr.resize(nn);
  for (std::size_t q = 0; q < nn; ++q) {
    op.wr[q] = std::move(row_fine[q]);
    if (!scaled) op.fine.lower_solve_in_place(op.wr[q]);
  }
  if (!scaled && !col_fine.empty()) {
    op.wc.resize(nn);
    for (std::size_t q = 0; q < nn; ++q) {
      Matrix t = col_fine[q].transpose();
      op.fine.upper_transpose_solve_in_place(t);
      op.wc[q] = t.transpose();
    }
  }
  for (std::size_t qi = 0; qi < nn; ++qi) {
    const Matrix left = op.left_coupling(qi);
    for (std::size_t qj = symmetric ? qi : 0; qj < nn; ++qj) {
      const int i = op.neighbors[qi];
      const int j = op.neighbors[qj];
      Matrix delta = left * op.wr[qj];
      e.flops += gemm_flops(left.rows(), op.wr[qj].cols(), left.cols());
      if (symmetric && i == j) delta = symmetrized(delta);
      if (symmetric && i != j) e.writes.push_back({BlockWrite::Kind::Subtract, j, i, delta.transpose()});
      e.writes.push_back({BlockWrite::Kind::Subtract, i, j, std::move(delta)});
    }
  }

  // Surviving coarse part of s.
  if (k == 0) {
    e.writes.push_back({BlockWrite::Kind::Erase, s, s, {}});
    for (int j : op.neighbors) {
      e.writes.push_back({BlockWrite::Kind::Erase, s, j, {}});
      e.writes.push_back({BlockWrite::Kind::Erase, j, s, {}});
    }
    for (int w : far) {
      e.writes.push_back({BlockWrite::Kind::Erase, s, w, {}});
      e.writes.push_back({BlockWrite::Kind::Erase, w, s, {}});
    }
    return e;
  }
  e.writes.push_back({BlockWrite::Kind::Set, s, s, coarse_diag});
  for (std::size_t q = 0; q < nn; ++q) {
    const int j = op.neighbors[q];
    e.writes.push_back({BlockWrite::Kind::Set, j, s,
                        symmetric ? Matrix(row_coarse[q].transpose()) : col_coarse[q]});
    e.writes.push_back({BlockWrite::Kind::Set, s, j, std::move(row_coarse[q])});
  }
  Eigen::Index c = 0;
  for (int w : far) {
    const Eigen::Index cols = row_block(w).cols();
    Matrix sw = coarse_diag * basis.z.middleCols(c, cols);
    Matrix ws = symmetric ? Matrix(sw.transpose())
                          : Matrix(basis.z.middleCols(far_cols + c, cols).transpose() * coarse_diag);
    c += cols;
    e.writes.push_back({BlockWrite::Kind::Set, w, s, std::move(ws)});
    e.writes.push_back({BlockWrite::Kind::Set, s, w, std::move(sw)});
  }
  return e;
}

void apply_write(BlockMatrix& a, const BlockWrite& w) {
  switch (w.kind) {
    case BlockWrite::Kind::Set:
      a.put(w.row, w.col, w.value);
      break;
    case BlockWrite::Kind::Subtract:
      if (Matrix* b = a.find(w.row, w.col)) {
        if (b->rows() != w.value.rows() || b->cols() != w.value.cols()) {
          throw Error(ErrorKind::DimensionMismatch,
                      "update of block (" + std::to_string(w.row) + "," + std::to_string(w.col) +
                          ") has wrong shape");
        }
        *b -= w.value;
      } else {
        a.put(w.row, w.col, -w.value);
      }
      break;
    case BlockWrite::Kind::Erase:
      a.erase(w.row, w.col);
      break;
  }
}

void apply_elimination(BlockMatrix& a, const Elimination& e) {
  if (e.op.passthrough) return;
  a.set_cluster_size(e.op.id, e.op.coarse_size);
  for (const BlockWrite& w : e.writes) apply_write(a, w);
}

void check_fill_in(const Elimination& e, const BlockPattern& allowed, LevelStats& stats) {
  for (const BlockWrite& w : e.writes) {
    if (w.kind == BlockWrite::Kind::Erase) continue;
    ++stats.fill_in_checked;
    if (!allowed.contains(w.row, w.col)) ++stats.fill_in_violations;
  }
}

int FactorConfig::resolved_stop_threshold() const {
  return stop_threshold > 0 ? stop_threshold : std::max(2 * partition.target_cluster_size, 128);
}

std::int64_t FactorStats::fill_in_violations() const {
  std::int64_t total = 0;
  for (const LevelStats& l : levels) total += l.fill_in_violations;
  return total;
}

double FactorStats::max_growth_ratio() const {
  double ratio = 0.0;
  for (std::size_t i = 1; i < levels.size(); ++i) {
    if (levels[i - 1].max_cluster_size > 0) {
      ratio = std::max(ratio, static_cast<double>(levels[i].max_cluster_size) /
                                  levels[i - 1].max_cluster_size);
    }
  }
  return ratio;
}

std::vector<int> FactorLevel::coarse_offsets() const {
  std::vector<int> offset(ops.size() + 1, 0);
  for (std::size_t c = 0; c < ops.size(); ++c) offset[c + 1] = offset[c] + ops[c].coarse_size;
  return offset;
}

std::size_t HierarchicalFactor::memory_bytes() const {
  std::size_t total = top.payload_bytes();
  for (const FactorLevel& l : levels) {
    for (const ClusterOperator& op : l.ops) total += op.payload_bytes();
  }
  return total;
}

ClusterPartition LevelPlanner::partition_level0(const CSRMatrix& a, const PartitionConfig& config) {
  return partition_graph(a.adjacency(), config);
}

ClusterPartition LevelPlanner::partition_coarse(int, const BlockPattern& pattern,
                                                std::span<const int> weights, std::span<const int>,
                                                const PartitionConfig& config) {
  return coarse_partition(pattern, weights, config);
}

std::vector<int> LevelPlanner::order(int, const BlockMatrix& a, const BlockPattern&) {
  std::vector<int> order(static_cast<std::size_t>(a.num_clusters()));
  std::iota(order.begin(), order.end(), 0);
  return order;
}

void LevelPlanner::eliminate_level(int, BlockMatrix& a, const BlockPattern& pattern,
                                   std::span<const int> order, const FactorConfig& config,
                                   FactorLevel& out, LevelStats& stats) {
  const BlockPattern allowed = pattern_square(pattern);
  for (int s : order) {
    Elimination e = low_rank_eliminate(a, pattern, s, config.policy);
    if (config.check_fill_in) check_fill_in(e, allowed, stats);
    apply_elimination(a, e);
    stats.flops += e.flops;
    if (e.compression_skipped) stats.compression_skipped.push_back(s);
    out.ops[s] = std::move(e.op);
  }
}

namespace {

DenseFactor factor_top(Matrix dense, SymmetryFlag flag) {
  if (is_symmetric(flag)) dense = symmetrized(dense);
  return DenseFactor::factor(dense, flag == SymmetryFlag::SPD);
}

// Restriction of the surviving coarse matrix to clusters with k > 0, and the
// next level's block matrix built from a grouping of those clusters.
struct CoarseLevel {
  std::vector<int> live;
  BlockPattern pattern;
  std::vector<int> weights;
};

CoarseLevel live_clusters(const BlockMatrix& a) {
  CoarseLevel c;
  std::vector<int> position(static_cast<std::size_t>(a.num_clusters()), -1);
  for (int i = 0; i < a.num_clusters(); ++i) {
    if (a.cluster_size(i) > 0) {
      position[i] = static_cast<int>(c.live.size());
      c.live.push_back(i);
      c.weights.push_back(a.cluster_size(i));
    }
  }
  const BlockPattern full = block_pattern(a);
  c.pattern.rows.resize(c.live.size());
  for (std::size_t q = 0; q < c.live.size(); ++q) {
    for (int j : full.rows[c.live[q]]) {
      if (position[j] >= 0) c.pattern.rows[q].push_back(position[j]);
    }
  }
  return c;
}

std::pair<BlockMatrix, ClusterPartition> next_level(const BlockMatrix& a, const CoarseLevel& c,
                                                    const ClusterPartition& groups) {
  std::vector<int> offset(static_cast<std::size_t>(a.num_clusters()) + 1, 0);
  for (int i = 0; i < a.num_clusters(); ++i) offset[i + 1] = offset[i] + a.cluster_size(i);
  const int num_coarse = offset.back();

  std::vector<int> group_of(static_cast<std::size_t>(a.num_clusters()), -1);
  std::vector<int> local_offset(static_cast<std::size_t>(a.num_clusters()), 0);
  std::vector<std::vector<int>> dofs(groups.clusters.size());
  std::vector<int> sizes(groups.clusters.size(), 0);
  for (int g = 0; g < groups.size(); ++g) {
    for (int q : groups.clusters[g]) {
      const int i = c.live[q];
      group_of[i] = g;
      local_offset[i] = sizes[g];
      sizes[g] += a.cluster_size(i);
      for (int d = offset[i]; d < offset[i + 1]; ++d) dofs[g].push_back(d);
    }
  }
  BlockMatrix next(sizes, a.flag());
  for (int g = 0; g < groups.size(); ++g) next.at(g, g);
  for (int i : c.live) {
    for (const auto& [j, b] : a.row(i)) {
      if (b.size() == 0 || group_of[j] < 0) continue;
      next.at(group_of[i], group_of[j]).block(local_offset[i], local_offset[j], b.rows(), b.cols()) = b;
    }
  }
  return {std::move(next), ClusterPartition::from_clusters(num_coarse, std::move(dofs))};
}

HierarchicalFactor run_levels(BlockMatrix a, ClusterPartition partition, const FactorConfig& config,
                              LevelPlanner& planner) {
  const auto t0 = Clock::now();
  HierarchicalFactor f;
  f.num_dofs = partition.num_dofs;
  f.flag = a.flag();
  f.policy = config.policy;
  const int threshold = config.resolved_stop_threshold();
  int stalled = 0;
  for (int level = 0;; ++level) {
    const auto tl = Clock::now();
    FactorLevel out;
    LevelStats stats;
    stats.dofs = partition.num_dofs;
    stats.clusters = partition.size();
    for (const auto& cl : partition.clusters) {
      stats.max_cluster_size = std::max(stats.max_cluster_size, static_cast<int>(cl.size()));
    }
    const BlockPattern pattern = block_pattern(a);
    out.order = planner.order(level, a, pattern);
    out.ops.resize(static_cast<std::size_t>(a.num_clusters()));
    planner.eliminate_level(level, a, pattern, out.order, config, out, stats);
    for (int i = 0; i < a.num_clusters(); ++i) {
      ClusterOperator& op = out.ops[i];
      if (op.id < 0) {
        throw Error(ErrorKind::InvalidArgument,
                    "level " + std::to_string(level) + ": cluster " + std::to_string(i) + " was not eliminated");
      }
      stats.max_rank = std::max(stats.max_rank, op.passthrough ? 0 : op.coarse_size);
      stats.passthrough += op.passthrough ? 1 : 0;
    }
    stats.coarse_dofs = a.num_dofs();
    out.num_coarse = stats.coarse_dofs;
    out.partition = std::move(partition);
    stats.seconds = seconds_since(tl);
    f.stats.flops += stats.flops;
    const int dofs = stats.dofs;
    const int coarse = stats.coarse_dofs;
    f.levels.push_back(std::move(out));
    f.stats.levels.push_back(std::move(stats));

    if (coarse <= threshold || level + 1 >= config.max_levels) break;
    stalled = coarse >= 0.95 * dofs ? stalled + 1 : 0;
    if (stalled >= 2) {
      throw Error(ErrorKind::LevelOverflow,
                  "coarse size did not shrink for two levels (level " + std::to_string(level) + ")",
                  level);
    }
    const CoarseLevel c = live_clusters(a);
    const ClusterPartition groups =
        planner.partition_coarse(level + 1, c.pattern, c.weights, c.live, config.partition);
    auto [next, next_partition] = next_level(a, c, groups);
    a = std::move(next);
    partition = std::move(next_partition);
  }
  const Matrix dense = a.to_dense();
  f.stats.top_dim = static_cast<int>(dense.rows());
  f.top = factor_top(dense, f.flag);
  f.stats.flops += dense.rows() * dense.rows() * static_cast<double>(dense.rows()) / 3.0;
  f.stats.seconds = seconds_since(t0);
  return f;
}

}  // namespace

HierarchicalFactor hierarchical_factor(const CSRMatrix& a, SymmetryFlag flag,
                                       const FactorConfig& config, LevelPlanner* planner) {
  LevelPlanner fallback;
  LevelPlanner& p = planner != nullptr ? *planner : fallback;
  if (a.n <= config.resolved_stop_threshold()) {
    if (is_symmetric(flag) && !a.pattern_symmetric()) {
      throw Error(ErrorKind::AsymmetricPattern, "hierarchical_factor: pattern is not symmetric");
    }
    const auto t0 = Clock::now();
    HierarchicalFactor f;
    f.num_dofs = a.n;
    f.flag = flag;
    f.policy = config.policy;
    f.top = factor_top(a.to_dense(), flag);
    f.stats.top_dim = a.n;
    f.stats.seconds = seconds_since(t0);
    return f;
  }
  ClusterPartition partition = p.partition_level0(a, config.partition);
  BlockMatrix blocks = assemble(a, partition, flag);
  return run_levels(std::move(blocks), std::move(partition), config, p);
}

HierarchicalFactor hierarchical_factor(BlockMatrix a, const ClusterPartition& partition,
                                       const FactorConfig& config, LevelPlanner* planner) {
  LevelPlanner fallback;
  return run_levels(std::move(a), partition, config, planner != nullptr ? *planner : fallback);
}

ForwardStep forward_step(const ClusterOperator& op, const Vector& ys) {
  ForwardStep out;
  if (op.passthrough) {
    out.coarse = ys;
    return out;
  }
  if (op.identity_sparsifier()) {
    out.stash = ys;
    op.fine.lower_solve_in_place(out.stash);
  } else {
    const Vector r = op.q_fwd * ys;
    out.stash = r.head(op.fine_size());
    out.coarse = r.tail(op.coarse_size);
  }
  out.deltas.reserve(op.neighbors.size());
  for (std::size_t q = 0; q < op.neighbors.size(); ++q) {
    if (op.wc.empty()) {
      out.deltas.push_back(op.wr[q].transpose() * out.stash);
    } else {
      out.deltas.push_back(op.wc[q] * out.stash);
    }
  }
  return out;
}

Vector backward_step(const ClusterOperator& op, const Vector& stash, const Vector& xc,
                     std::span<const Vector* const> neighbor_x) {
  if (op.passthrough) return xc;
  Vector z = stash;
  for (std::size_t q = 0; q < op.neighbors.size(); ++q) z.noalias() -= op.wr[q] * *neighbor_x[q];
  if (op.identity_sparsifier()) {
    op.fine.upper_solve_in_place(z);
    return z;
  }
  Vector zc(op.size);
  zc << z, xc;
  if (op.q_bwd.size() > 0) return op.q_bwd * zc;
  return op.q_fwd.transpose() * zc;
}

Vector apply_solve(const HierarchicalFactor& f, const Vector& b) {
  if (b.size() != f.num_dofs) {
    throw Error(ErrorKind::DimensionMismatch, "apply_solve: right-hand side has wrong length");
  }
  const std::size_t num_levels = f.levels.size();
  std::vector<std::vector<Vector>> stash(num_levels);
  Vector y = b;
  for (std::size_t l = 0; l < num_levels; ++l) {
    const FactorLevel& level = f.levels[l];
    std::vector<Vector> seg(level.partition.clusters.size());
    for (std::size_t c = 0; c < seg.size(); ++c) seg[c] = y(level.partition.clusters[c]);
    stash[l].resize(seg.size());
    for (int s : level.order) {
      ForwardStep step = forward_step(level.ops[s], seg[s]);
      const auto& nb = level.ops[s].neighbors;
      for (std::size_t q = 0; q < nb.size(); ++q) seg[nb[q]] -= step.deltas[q];
      stash[l][s] = std::move(step.stash);
      seg[s] = std::move(step.coarse);
    }
    Vector coarse(level.num_coarse);
    Eigen::Index pos = 0;
    for (const Vector& v : seg) {
      coarse.segment(pos, v.size()) = v;
      pos += v.size();
    }
    y = std::move(coarse);
  }
  Vector x = y;
  if (f.top.size() > 0) f.top.solve_in_place(x);
  for (std::size_t l = num_levels; l-- > 0;) {
    const FactorLevel& level = f.levels[l];
    const std::vector<int> offset = level.coarse_offsets();
    std::vector<Vector> seg(level.ops.size());
    for (std::size_t c = 0; c < seg.size(); ++c) seg[c] = x.segment(offset[c], offset[c + 1] - offset[c]);
    std::vector<const Vector*> nbx;
    for (auto it = level.order.rbegin(); it != level.order.rend(); ++it) {
      const ClusterOperator& op = level.ops[*it];
      nbx.clear();
      for (int j : op.neighbors) nbx.push_back(&seg[j]);
      seg[*it] = backward_step(op, stash[l][*it], seg[*it], nbx);
    }
    Vector fine(level.partition.num_dofs);
    for (std::size_t c = 0; c < seg.size(); ++c) fine(level.partition.clusters[c]) = seg[c];
    x = std::move(fine);
  }
  return x;
}

}  // namespace hsolve
