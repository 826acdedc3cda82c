#include <gtest/gtest.h>

#include <deque>
#include <map>
#include <set>

#include "hsolve/partition.hpp"

using namespace hsolve;

namespace {

Adjacency path(int n) {
  Adjacency adj(n);
  for (int i = 0; i + 1 < n; ++i) {
    adj[i].push_back(i + 1);
    adj[i + 1].push_back(i);
  }
  return adj;
}

Adjacency grid3(int n) {
  Adjacency adj(n * n * n);
  auto id = [n](int x, int y, int z) { return x + n * (y + n * z); };
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        auto& a = adj[id(x, y, z)];
        if (x > 0) a.push_back(id(x - 1, y, z));
        if (x + 1 < n) a.push_back(id(x + 1, y, z));
        if (y > 0) a.push_back(id(x, y - 1, z));
        if (y + 1 < n) a.push_back(id(x, y + 1, z));
        if (z > 0) a.push_back(id(x, y, z - 1));
        if (z + 1 < n) a.push_back(id(x, y, z + 1));
      }
  return adj;
}

// Sub-cubes of side b, the geometric reference partition.
ClusterPartition cubes(int n, int b) {
  const int m = n / b;
  std::vector<std::vector<int>> c(m * m * m);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) c[x / b + m * (y / b + m * (z / b))].push_back(x + n * (y + n * z));
  return ClusterPartition::from_clusters(n * n * n, c);
}

// Hop diameter of the subgraph induced by one cluster (-1 if disconnected).
int induced_diameter(const Adjacency& adj, const std::vector<int>& cluster) {
  std::set<int> members(cluster.begin(), cluster.end());
  int diameter = 0;
  for (int s : cluster) {
    std::map<int, int> dist{{s, 0}};
    std::deque<int> q{s};
    while (!q.empty()) {
      const int u = q.front();
      q.pop_front();
      for (int v : adj[u]) {
        if (members.count(v) && !dist.count(v)) {
          dist[v] = dist[u] + 1;
          diameter = std::max(diameter, dist[v]);
          q.push_back(v);
        }
      }
    }
    if (dist.size() != cluster.size()) return -1;
  }
  return diameter;
}

PartitionConfig with_r(int r, std::uint64_t seed = 0) {
  PartitionConfig c;
  c.target_cluster_size = r;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(PartitionGraph, PathOfFour) {
  const ClusterPartition p = partition_graph(path(4), with_r(2));
  ASSERT_EQ(p.size(), 2);
  EXPECT_EQ(p.clusters[0], (std::vector<int>{0, 1}));
  EXPECT_EQ(p.clusters[1], (std::vector<int>{2, 3}));
}

TEST(PartitionGraph, IsolatedVerticesAreMerged) {
  const ClusterPartition p = partition_graph(Adjacency(8), with_r(2));
  ASSERT_EQ(p.size(), 4);
  for (const auto& c : p.clusters) EXPECT_EQ(c.size(), 2u);
}

TEST(PartitionGraph, SingleVertex) {
  const ClusterPartition p = partition_graph(Adjacency(1), with_r(4));
  ASSERT_EQ(p.size(), 1);
  EXPECT_EQ(p.clusters[0], std::vector<int>{0});
}

TEST(PartitionGraph, GridMatchesSubCubes) {
  const int n = 16;
  const Adjacency adj = grid3(n);
  const ClusterPartition p = partition_graph(adj, with_r(64));
  ASSERT_EQ(p.size(), 64);
  int worst = 0;
  for (const auto& c : p.clusters) {
    EXPECT_EQ(c.size(), 64u);
    worst = std::max(worst, induced_diameter(adj, c));
  }
  const ClusterPartition oracle = cubes(n, 4);
  int oracle_worst = 0;
  for (const auto& c : oracle.clusters) oracle_worst = std::max(oracle_worst, induced_diameter(adj, c));
  EXPECT_EQ(oracle_worst, 9);  // 3 + 3 + 3 hops corner to corner
  EXPECT_GT(worst, 0);
  EXPECT_LE(worst, oracle_worst);
  const std::int64_t oracle_cut = edge_cut(adj, oracle);
  EXPECT_EQ(oracle_cut, 2304);
  EXPECT_LE(edge_cut(adj, p), 2 * oracle_cut);
}

TEST(PartitionGraph, SizesAndCountOnOddGrid) {
  const Adjacency adj = grid3(11);
  const PartitionConfig cfg = with_r(50);
  const ClusterPartition p = partition_graph(adj, cfg);
  const int expected = (1331 + 49) / 50;
  EXPECT_LE(std::abs(p.size() - expected), 1);
  for (const auto& c : p.clusters) {
    EXPECT_LE(static_cast<double>(c.size()), cfg.max_imbalance * 50);
  }
}

TEST(PartitionGraph, DeterministicAndSeedDependent) {
  const Adjacency adj = grid3(10);
  const ClusterPartition a = partition_graph(adj, with_r(40, 7));
  const ClusterPartition b = partition_graph(adj, with_r(40, 7));
  EXPECT_EQ(a.clusters, b.clusters);
  bool any_differs = false;
  for (std::uint64_t seed = 1; seed <= 5 && !any_differs; ++seed) {
    any_differs = partition_graph(adj, with_r(40, seed)).clusters != a.clusters;
  }
  EXPECT_TRUE(any_differs);
}

TEST(PartitionGraph, DisjointCoverWithWeightsAndComponents) {
  // two grids side by side plus isolated vertices
  Adjacency adj = grid3(5);
  const int base = static_cast<int>(adj.size());
  for (auto& row : grid3(4)) {
    adj.emplace_back();
    for (int v : row) adj.back().push_back(v + base);
  }
  adj.resize(adj.size() + 7);
  std::vector<int> weights(adj.size());
  for (std::size_t v = 0; v < weights.size(); ++v) weights[v] = 1 + static_cast<int>(v % 3);
  const ClusterPartition p = partition_graph(adj, with_r(20), weights);
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p.num_dofs, static_cast<int>(adj.size()));
}

TEST(PartitionGraph, InvalidConfigThrows) {
  EXPECT_ANY_THROW(partition_graph(path(3), with_r(0)));
}

TEST(CoarsePartition, SingleCluster) {
  const ClusterPartition p = coarse_partition(BlockPattern::diagonal(1), {}, with_r(4));
  ASSERT_EQ(p.size(), 1);
}

TEST(CoarsePartition, PathOfEightGivesPairs) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i + 1 < 8; ++i) pairs.emplace_back(i, i + 1);
  const ClusterPartition p = coarse_partition(BlockPattern::from_pairs(8, pairs), {}, with_r(2));
  ASSERT_EQ(p.size(), 4);
  for (int c = 0; c < 4; ++c) EXPECT_EQ(p.clusters[c], (std::vector<int>{2 * c, 2 * c + 1}));
}

TEST(CoarsePartition, OwnersAreNotMixed) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i + 1 < 12; ++i) pairs.emplace_back(i, i + 1);
  const std::vector<int> owner{1, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 0};
  const ClusterPartition p =
      coarse_partition(BlockPattern::from_pairs(12, pairs), {}, with_r(3), owner);
  p.validate();
  int last_owner = 0;
  for (const auto& c : p.clusters) {
    for (int v : c) EXPECT_EQ(owner[v], owner[c.front()]);
    EXPECT_GE(owner[c.front()], last_owner);
    last_owner = owner[c.front()];
  }
}
