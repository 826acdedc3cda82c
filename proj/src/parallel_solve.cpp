// Solve phase over the ownership of a parallel factor. Every cluster step
// runs on the owner of the cluster in canonical order, which is also the
// order apply_solve uses, so the result is the same vector. Updates of a
// neighbor segment and reads of a neighbor solution cross workers as
// messages; coarse segments follow their next-level cluster, and the top
// solve runs on worker 0.

#include <map>

#include "hsolve/error.hpp"
#include "hsolve/parallel.hpp"

namespace hsolve {

namespace {

constexpr std::int64_t kHeader = 16;

class SolveLog {
 public:
  explicit SolveLog(CommLog* log) : log_(log) {}

  void send(const DomainDecomposition* d, int level, Phase phase, int from, int to, Eigen::Index values) {
    if (log_ == nullptr || from == to) return;
    const std::int64_t bytes = kHeader + static_cast<std::int64_t>(values) * 8;
    if (static_cast<int>(log_->sent_bytes.size()) <= level) log_->sent_bytes.resize(level + 1, 0);
    log_->sent.push_back({from, level, phase, -1, to, bytes, 0.0});
    log_->sent_bytes[level] += bytes;
    log_->count_received(level, bytes);
    if (phase == Phase::Solve && d != nullptr && !d->reachable(from, to)) ++log_->locality_violations;
  }

 private:
  CommLog* log_;
};

}  // namespace

Vector parallel_solve(const ParallelFactor& pf, const Vector& b, CommLog* log) {
  const HierarchicalFactor& f = pf.factor;
  if (b.size() != f.num_dofs) {
    throw Error(ErrorKind::DimensionMismatch, "parallel_solve: right-hand side has wrong length");
  }
  if (pf.levels.size() < f.levels.size()) {
    throw Error(ErrorKind::InvalidArgument, "parallel_solve: missing decompositions");
  }
  if (log != nullptr && log->workers < 1) log->workers = 1;
  SolveLog out(log);
  const std::size_t num_levels = f.levels.size();
  // Owner of coarse DOF d of level l: the owner of its cluster at level l+1
  // (worker 0 above the last level).
  auto next_owner = [&](std::size_t l, Eigen::Index dof) {
    if (l + 1 >= num_levels) return 0;
    return pf.levels[l + 1].owner[f.levels[l + 1].partition.cluster_of[static_cast<std::size_t>(dof)]];
  };

  std::vector<std::vector<Vector>> stash(num_levels);
  Vector y = b;
  for (std::size_t l = 0; l < num_levels; ++l) {
    const FactorLevel& level = f.levels[l];
    const DomainDecomposition& d = pf.levels[l];
    const int li = static_cast<int>(l);
    std::vector<Vector> seg(level.partition.clusters.size());
    for (std::size_t c = 0; c < seg.size(); ++c) seg[c] = y(level.partition.clusters[c]);
    stash[l].resize(seg.size());
    for (int s : level.order) {
      ForwardStep step = forward_step(level.ops[s], seg[s]);
      const auto& nb = level.ops[s].neighbors;
      std::map<int, Eigen::Index> batch;
      for (std::size_t q = 0; q < nb.size(); ++q) {
        seg[nb[q]] -= step.deltas[q];
        if (d.owner[nb[q]] != d.owner[s]) batch[d.owner[nb[q]]] += step.deltas[q].size();
      }
      for (const auto& [to, values] : batch) out.send(&d, li, Phase::Solve, d.owner[s], to, values);
      stash[l][s] = std::move(step.stash);
      seg[s] = std::move(step.coarse);
    }
    Vector coarse(level.num_coarse);
    Eigen::Index pos = 0;
    for (std::size_t c = 0; c < seg.size(); ++c) {
      coarse.segment(pos, seg[c].size()) = seg[c];
      if (seg[c].size() > 0) {
        out.send(&d, li + 1, Phase::CoarseSetup, d.owner[c], next_owner(l, pos), seg[c].size());
      }
      pos += seg[c].size();
    }
    y = std::move(coarse);
  }
  Vector x = y;
  if (f.top.size() > 0) f.top.solve_in_place(x);
  for (std::size_t l = num_levels; l-- > 0;) {
    const FactorLevel& level = f.levels[l];
    const DomainDecomposition& d = pf.levels[l];
    const int li = static_cast<int>(l);
    const std::vector<int> offset = level.coarse_offsets();
    std::vector<Vector> seg(level.ops.size());
    for (std::size_t c = 0; c < seg.size(); ++c) {
      seg[c] = x.segment(offset[c], offset[c + 1] - offset[c]);
      if (seg[c].size() > 0) {
        out.send(&d, li + 1, Phase::CoarseSetup, next_owner(l, offset[c]), d.owner[c], seg[c].size());
      }
    }
    std::vector<const Vector*> nbx;
    for (auto it = level.order.rbegin(); it != level.order.rend(); ++it) {
      const int s = *it;
      const ClusterOperator& op = level.ops[s];
      nbx.clear();
      for (int j : op.neighbors) {
        nbx.push_back(&seg[j]);
        out.send(&d, li, Phase::Solve, d.owner[j], d.owner[s], seg[j].size());
      }
      seg[s] = backward_step(op, stash[l][s], seg[s], nbx);
    }
    Vector fine(level.partition.num_dofs);
    for (std::size_t c = 0; c < seg.size(); ++c) fine(level.partition.clusters[c]) = seg[c];
    x = std::move(fine);
  }
  return x;
}

}  // namespace hsolve
