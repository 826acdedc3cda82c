#pragma once

// Algebraic clustering by recursive bisection.
//
// A part of weight W that must become t = ceil(W / r) clusters is ordered and
// cut at the weighted position floor(t/2)/t. The ordering is the BFS level
// order from a pseudo-peripheral vertex, or, when it cuts fewer edges, an
// order by d_a - d_b for a pair of far-apart landmark vertices (BFS
// distances d). Leaves are emitted left to right, which is the elimination
// order within a level.

#include <cstdint>
#include <span>
#include <vector>

#include "hsolve/block_matrix.hpp"

namespace hsolve {

struct PartitionConfig {
  int target_cluster_size = 64;
  double max_imbalance = 1.5;
  /// 0 starts the peripheral search at the lowest vertex id; any other
  /// value picks a seed-dependent start vertex, giving a different (still
  /// deterministic) partition.
  std::uint64_t seed = 0;
};

using Adjacency = std::vector<std::vector<int>>;

/// Partition of the vertices of an undirected graph. `weights` defaults to 1.
ClusterPartition partition_graph(const Adjacency& adj, const PartitionConfig& config,
                                 std::span<const int> weights = {});

/// Exactly `parts` pieces of balanced weight (the worker decomposition of a
/// quotient graph). Throws InvalidArgument unless 1 <= parts <= vertex count.
ClusterPartition split_graph(const Adjacency& adj, int parts, std::span<const int> weights = {});

/// Groups the vertices of a coarse quotient graph (previous-level clusters,
/// weighted by their coarse size) into next-level clusters. When `owner` is
/// given, groups never mix owners and appear in ascending owner order.
ClusterPartition coarse_partition(const BlockPattern& coarse, std::span<const int> weights,
                                  const PartitionConfig& config, std::span<const int> owner = {});

/// Number of graph edges {u,v} whose endpoints lie in different clusters.
std::int64_t edge_cut(const Adjacency& adj, const ClusterPartition& p);

Adjacency to_adjacency(const BlockPattern& p);

}  // namespace hsolve
