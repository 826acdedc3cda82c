#include <gtest/gtest.h>

#include <random>

#include "hsolve/block_matrix.hpp"
#include "hsolve/error.hpp"

using namespace hsolve;

namespace {

CSRMatrix laplacian_1d(int n) {
  std::vector<int> r, c;
  std::vector<double> v;
  for (int i = 0; i < n; ++i) {
    r.push_back(i), c.push_back(i), v.push_back(2.0);
    if (i > 0) r.push_back(i), c.push_back(i - 1), v.push_back(-1.0);
    if (i + 1 < n) r.push_back(i), c.push_back(i + 1), v.push_back(-1.0);
  }
  return CSRMatrix::from_triplets(n, r, c, v);
}

CSRMatrix laplacian_3d(int n) {
  std::vector<int> r, c;
  std::vector<double> v;
  auto id = [n](int x, int y, int z) { return x + n * (y + n * z); };
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const int i = id(x, y, z);
        r.push_back(i), c.push_back(i), v.push_back(6.0);
        const int d[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (auto& o : d) {
          const int X = x + o[0], Y = y + o[1], Z = z + o[2];
          if (X < 0 || Y < 0 || Z < 0 || X >= n || Y >= n || Z >= n) continue;
          r.push_back(i), c.push_back(id(X, Y, Z)), v.push_back(-1.0);
        }
      }
  return CSRMatrix::from_triplets(n * n * n, r, c, v);
}

ClusterPartition random_partition(int n, int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<int>> clusters(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) clusters[i].push_back(i);  // keep every cluster nonempty
  std::uniform_int_distribution<int> pick(0, m - 1);
  for (int i = m; i < n; ++i) clusters[pick(rng)].push_back(i);
  return ClusterPartition::from_clusters(n, clusters);
}

}  // namespace

TEST(CSRMatrix, TripletsSortAndSumDuplicates) {
  const std::vector<int> r{1, 0, 1, 0};
  const std::vector<int> c{0, 1, 0, 0};
  const std::vector<double> v{2.0, 3.0, 4.0, 1.0};
  const CSRMatrix m = CSRMatrix::from_triplets(2, r, c, v);
  EXPECT_EQ(m.row_ptr, (std::vector<int>{0, 2, 3}));
  EXPECT_EQ(m.col_idx, (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(m.values, (std::vector<double>{1.0, 3.0, 6.0}));
}

TEST(ClusterPartition, RejectsOverlapAndGaps) {
  EXPECT_THROW(ClusterPartition::from_clusters(3, {{0, 1}, {1, 2}}), Error);
  EXPECT_THROW(ClusterPartition::from_clusters(3, {{0, 1}}), Error);
  EXPECT_THROW(ClusterPartition::from_clusters(2, {{0, 1}, {}}), Error);
}

TEST(BlockPattern, BlockDiagonal) {
  BlockMatrix a({2, 2, 2}, SymmetryFlag::SPD);
  for (int i = 0; i < 3; ++i) a.set(i, i, Matrix::Identity(2, 2));
  EXPECT_EQ(block_pattern(a), BlockPattern::diagonal(3));
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(neighbors(block_pattern(a), i).empty());
}

TEST(BlockPattern, OneDimensionalLaplacianIsTridiagonal) {
  const BlockMatrix a =
      assemble(laplacian_1d(6), ClusterPartition::contiguous(6, 2), SymmetryFlag::SPD);
  const BlockPattern p = block_pattern(a);
  EXPECT_EQ(p, BlockPattern::from_pairs(3, {{0, 1}, {1, 2}}));
  EXPECT_EQ(neighbors(p, 1), (std::vector<int>{0, 2}));
}

TEST(BlockPattern, GridInteriorHasFourNeighbors) {
  // 5x5 grid of clusters, 5-point coupling
  std::vector<std::pair<int, int>> pairs;
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) {
      if (x + 1 < 5) pairs.emplace_back(x + 5 * y, x + 1 + 5 * y);
      if (y + 1 < 5) pairs.emplace_back(x + 5 * y, x + 5 * (y + 1));
    }
  const BlockPattern p = BlockPattern::from_pairs(25, pairs);
  EXPECT_EQ(neighbors(p, 12), (std::vector<int>{7, 11, 13, 17}));
}

TEST(BlockPattern, RandomSparseMatchesEntryScan) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<int> r, c;
  std::vector<double> v;
  for (int i = 0; i < 64; ++i) {
    r.push_back(i), c.push_back(i), v.push_back(4.0);
    for (int j = i + 1; j < 64; ++j) {
      if (u(rng) < 0.04) {
        r.push_back(i), c.push_back(j), v.push_back(-1.0);
        r.push_back(j), c.push_back(i), v.push_back(-1.0);
      }
    }
  }
  const CSRMatrix csr = CSRMatrix::from_triplets(64, r, c, v);
  const ClusterPartition part = random_partition(64, 8, 7);
  const BlockPattern p = block_pattern(assemble(csr, part, SymmetryFlag::SPD));
  // oracle: scan every scalar entry of the dense matrix
  const Matrix d = csr.to_dense();
  for (int ci = 0; ci < 8; ++ci)
    for (int cj = 0; cj < 8; ++cj) {
      bool nz = ci == cj;
      for (int i : part.clusters[ci])
        for (int j : part.clusters[cj]) nz = nz || d(i, j) != 0.0;
      EXPECT_EQ(p.contains(ci, cj), nz) << ci << "," << cj;
    }
}

TEST(PatternSquare, TridiagonalBecomesPentadiagonal) {
  const BlockPattern tri = BlockPattern::from_pairs(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  const BlockPattern penta =
      BlockPattern::from_pairs(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 2}, {1, 3}, {2, 4}});
  EXPECT_EQ(pattern_square(tri), penta);
}

TEST(PatternSquare, DenseStaysDense) {
  std::vector<std::pair<int, int>> all;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) all.emplace_back(i, j);
  const BlockPattern dense = BlockPattern::from_pairs(4, all);
  EXPECT_EQ(pattern_square(dense), dense);
}

TEST(PatternSquare, MatchesBooleanTripleLoop) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<int, int>> pairs;
  const int m = 20;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (u(rng) < 0.1) pairs.emplace_back(i, j);
  const BlockPattern p = BlockPattern::from_pairs(m, pairs);
  const BlockPattern sq = pattern_square(p);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      bool any = false;
      for (int k = 0; k < m; ++k) any = any || (p.contains(i, k) && p.contains(k, j));
      EXPECT_EQ(sq.contains(i, j), any);
    }
}

TEST(Assemble, IdentityGivesIdentityDiagonalBlocks) {
  std::vector<int> r, c;
  std::vector<double> v;
  for (int i = 0; i < 7; ++i) r.push_back(i), c.push_back(i), v.push_back(1.0);
  const CSRMatrix id = CSRMatrix::from_triplets(7, r, c, v);
  const ClusterPartition part = ClusterPartition::from_clusters(7, {{0, 3}, {1, 2, 6}, {4, 5}});
  const BlockMatrix a = assemble(id, part, SymmetryFlag::SPD);
  EXPECT_EQ(a.num_blocks(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(*a.find(i, i), Matrix::Identity(a.cluster_size(i), a.cluster_size(i)));
}

TEST(Assemble, LaplacianCornerEntry) {
  const BlockMatrix a =
      assemble(laplacian_1d(4), ClusterPartition::contiguous(4, 2), SymmetryFlag::SPD);
  const Matrix* off = a.find(0, 1);
  ASSERT_NE(off, nullptr);
  Matrix expected = Matrix::Zero(2, 2);
  expected(1, 0) = -1.0;
  EXPECT_EQ(*off, expected);
}

TEST(Assemble, RoundTripPreservesCsr) {
  const CSRMatrix csr = laplacian_3d(8);
  const ClusterPartition part = random_partition(512, 16, 3);
  const BlockMatrix a = assemble(csr, part, SymmetryFlag::SPD);
  std::size_t nnz = 0;
  for (int i = 0; i < a.num_clusters(); ++i)
    for (const auto& [j, b] : a.row(i)) nnz += static_cast<std::size_t>((b.array() != 0.0).count());
  EXPECT_EQ(nnz, csr.col_idx.size());
  EXPECT_EQ(flatten(a, part), csr);
  const BlockPattern p = block_pattern(a);
  for (int i = 0; i < p.size(); ++i)
    for (int j : p.rows[i]) EXPECT_TRUE(p.contains(j, i));
}

TEST(Assemble, Errors) {
  EXPECT_THROW(assemble(laplacian_1d(4), ClusterPartition::contiguous(5, 2), SymmetryFlag::SPD),
               Error);
  const std::vector<int> r{0, 0, 1};
  const std::vector<int> c{0, 1, 1};
  const std::vector<double> v{1.0, 2.0, 1.0};
  const CSRMatrix upper = CSRMatrix::from_triplets(2, r, c, v);
  try {
    assemble(upper, ClusterPartition::contiguous(2, 1), SymmetryFlag::SPD);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AsymmetricPattern);
  }
  EXPECT_NO_THROW(assemble(upper, ClusterPartition::contiguous(2, 1), SymmetryFlag::General));
}

TEST(BfsDistances, PathGraph) {
  const BlockPattern path = BlockPattern::from_pairs(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  EXPECT_EQ(bfs_distances(path, 0, 2), (std::vector<int>{0, 1, 2, -1, -1}));
}
