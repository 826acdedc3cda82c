#include "hsolve/partition.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "hsolve/error.hpp"

namespace hsolve {

namespace {

class Bisector {
 public:
  Bisector(const Adjacency& adj, std::span<const int> weights, const PartitionConfig& config)
      : adj_(adj), weights_(weights), config_(config), stamp_(adj.size(), 0),
        dist_(adj.size(), -1), ordered_(adj.size(), 0),
        local_(adj.size(), 0), side_(adj.size(), 0) {}

  std::int64_t weight(int v) const { return weights_.empty() ? 1 : weights_[v]; }

  std::int64_t weight(const std::vector<int>& set) const {
    std::int64_t w = 0;
    for (int v : set) w += weight(v);
    return w;
  }

  int parts_for(std::int64_t w) const {
    const std::int64_t r = std::max(1, config_.target_cluster_size);
    return static_cast<int>(std::max<std::int64_t>(1, (w + r - 1) / r));
  }

  // Connected components of the whole graph, each sorted, ordered by min id.
  std::vector<std::vector<int>> components() {
    std::vector<int> all(adj_.size());
    std::iota(all.begin(), all.end(), 0);
    mark(all);
    std::vector<std::vector<int>> comps;
    std::vector<char> seen(adj_.size(), 0);
    for (int v : all) {
      if (seen[v]) continue;
      std::vector<int> comp;
      std::deque<int> queue{v};
      seen[v] = 1;
      while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        comp.push_back(u);
        for (int x : adj_[u]) {
          if (!seen[x]) {
            seen[x] = 1;
            queue.push_back(x);
          }
        }
      }
      std::sort(comp.begin(), comp.end());
      comps.push_back(std::move(comp));
    }
    return comps;
  }

  // Splits `set` into `parts` clusters. Part counts divisible by 2, 3 or 5
  // are cut into that many equal slices at once, so boxes whose cluster
  // count factors that way end up as sub-boxes; other counts are halved
  // with proportional weights.
  void section(std::vector<int> set, int parts, std::vector<std::vector<int>>& out) {
    if (parts <= 1 || set.size() <= 1) {
      std::sort(set.begin(), set.end());
      out.push_back(std::move(set));
      return;
    }
    std::vector<int> piece_parts;
    const int q = parts % 2 == 0 ? 2 : parts % 3 == 0 ? 3 : parts % 5 == 0 ? 5 : 0;
    if (q == 0) {
      piece_parts = {parts / 2, parts - parts / 2};
    } else {
      piece_parts.assign(static_cast<std::size_t>(q), parts / q);
    }
    if (set.size() < piece_parts.size()) piece_parts = {1, parts - 1};
    std::vector<double> targets;
    const double total = static_cast<double>(weight(set));
    int acc = 0;
    for (std::size_t i = 0; i + 1 < piece_parts.size(); ++i) {
      acc += piece_parts[i];
      targets.push_back(total * acc / parts);
    }
    bool connected = false;
    std::vector<int> best = level_order(set, connected);
    std::vector<std::size_t> best_splits = split_points(best, targets);
    if (connected && set.size() > 2) {
      std::int64_t best_cut = cut_size(best, best_splits);
      for (std::vector<int>& order : difference_orders(best)) {
        std::vector<std::size_t> splits = split_points(order, targets);
        const std::int64_t cut = cut_size(order, splits);
        if (cut < best_cut) {
          best_cut = cut;
          best = std::move(order);
          best_splits = std::move(splits);
        }
      }
    }
    best_splits.push_back(best.size());
    std::size_t begin = 0;
    for (std::size_t i = 0; i < piece_parts.size(); ++i) {
      std::vector<int> piece(best.begin() + static_cast<std::ptrdiff_t>(begin),
                             best.begin() + static_cast<std::ptrdiff_t>(best_splits[i]));
      begin = best_splits[i];
      section(std::move(piece), piece_parts[i], out);
    }
  }

 private:
  void mark(const std::vector<int>& set) {
    ++current_;
    for (int v : set) stamp_[v] = current_;
  }
  bool in_set(int v) const { return stamp_[v] == current_ && ordered_[v] != current_; }

  // BFS from `start` within the marked set; returns visit order and fills dist_.
  std::vector<int> bfs(int start, std::vector<int>& touched) {
    std::vector<int> order;
    std::deque<int> queue{start};
    dist_[start] = 0;
    touched.push_back(start);
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      order.push_back(u);
      for (int x : adj_[u]) {
        if (in_set(x) && dist_[x] < 0) {
          dist_[x] = dist_[u] + 1;
          touched.push_back(x);
          queue.push_back(x);
        }
      }
    }
    return order;
  }

  void reset(std::vector<int>& touched) {
    for (int v : touched) dist_[v] = -1;
    touched.clear();
  }

  int degree_in_set(int v) const {
    int d = 0;
    for (int x : adj_[v]) d += in_set(x) ? 1 : 0;
    return d;
  }

  int pseudo_peripheral(int start) {
    std::vector<int> touched;
    int current = start;
    int previous = start;
    int eccentricity = -1;
    for (int iter = 0; iter < 16; ++iter) {
      const std::vector<int> order = bfs(current, touched);
      const int depth = dist_[order.back()];
      int best = order.back();
      for (auto it = order.rbegin(); it != order.rend() && dist_[*it] == depth; ++it) {
        const int d = degree_in_set(*it);
        const int bd = degree_in_set(best);
        if (d < bd || (d == bd && *it < best)) best = *it;
      }
      reset(touched);
      if (depth <= eccentricity) {
        // the previous start is at least as eccentric; prefer the lower id
        return std::min(current, previous);
      }
      eccentricity = depth;
      previous = current;
      current = best;
    }
    return current;
  }

  // Prefix lengths whose weights are closest to the ascending `targets`,
  // keeping at least one vertex in every piece.
  std::vector<std::size_t> split_points(const std::vector<int>& order,
                                        const std::vector<double>& targets) const {
    std::vector<std::size_t> splits;
    std::size_t cut = 0;
    std::int64_t acc = 0;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const double target = targets[t];
      while (cut < order.size()) {
        const std::int64_t next = acc + weight(order[cut]);
        if (static_cast<double>(next) > target &&
            std::abs(static_cast<double>(next) - target) > std::abs(static_cast<double>(acc) - target)) {
          break;
        }
        acc = next;
        ++cut;
      }
      const std::size_t lo = splits.empty() ? 1 : splits.back() + 1;
      const std::size_t hi = order.size() - (targets.size() - t);
      const std::size_t split = std::clamp(cut, lo, hi);
      while (cut < split) acc += weight(order[cut++]);
      splits.push_back(split);
    }
    return splits;
  }

  // Edges between different pieces of `order` cut at `splits`.
  std::int64_t cut_size(const std::vector<int>& order, const std::vector<std::size_t>& splits) {
    std::size_t piece = 0;
    for (std::size_t q = 0; q < order.size(); ++q) {
      while (piece < splits.size() && q >= splits[piece]) ++piece;
      side_[order[q]] = static_cast<int>(piece);
    }
    std::int64_t cut = 0;
    for (int v : order) {
      for (int x : adj_[v]) cut += (stamp_[x] == current_ && side_[x] != side_[v]) ? 1 : 0;
    }
    return cut / 2;
  }

  // Distances from `start` to every vertex of the marked set, indexed like
  // `order` positions are looked up through local_.
  std::vector<int> distances(int start, std::size_t size) {
    std::vector<int> touched;
    const std::vector<int> visit = bfs(start, touched);
    std::vector<int> d(size, 0);
    for (int v : visit) d[local_[v]] = dist_[v];
    reset(touched);
    return d;
  }

  // Alternative orderings of a connected set: sort by d_a - d_b for pairs
  // of landmark vertices. Landmarks are found by jumping to farthest
  // vertices from probes spread over the set; on grid-like graphs they land
  // on corners, and pairs of corners sharing an edge give cuts across the
  // long axis instead of the diagonal level sets of a single BFS.
  std::vector<std::vector<int>> difference_orders(const std::vector<int>& bfs_order) {
    const std::size_t size = bfs_order.size();
    mark(bfs_order);  // level_order consumed the previous stamp
    for (std::size_t q = 0; q < size; ++q) local_[bfs_order[q]] = static_cast<int>(q);
    std::vector<int> landmarks;
    std::vector<std::vector<int>> dist;
    auto farthest = [&](const std::vector<int>& d) {
      std::size_t best = 0;
      for (std::size_t q = 1; q < size; ++q) {
        if (d[q] > d[best] || (d[q] == d[best] && bfs_order[q] < bfs_order[best])) best = q;
      }
      return bfs_order[best];
    };
    auto add = [&](int v) {
      if (std::find(landmarks.begin(), landmarks.end(), v) != landmarks.end()) return false;
      landmarks.push_back(v);
      dist.push_back(distances(v, size));
      return true;
    };
    add(bfs_order.front());
    add(farthest(dist[0]));
    for (int probe_round = 0; probe_round < 3 && landmarks.size() < kMaxLandmarks; ++probe_round) {
      std::vector<int> spread(size, std::numeric_limits<int>::max());
      for (const auto& d : dist) {
        for (std::size_t q = 0; q < size; ++q) spread[q] = std::min(spread[q], d[q]);
      }
      const int probe = farthest(spread);
      const int corner = farthest(distances(probe, size));
      const std::vector<int> from_corner = distances(corner, size);
      add(corner);
      if (landmarks.size() < kMaxLandmarks) add(farthest(from_corner));
    }
    std::vector<std::vector<int>> orders;
    const std::vector<int>& base = dist[0];
    for (std::size_t a = 0; a < landmarks.size(); ++a) {
      for (std::size_t b = a + 1; b < landmarks.size(); ++b) {
        const auto& da = dist[a];
        const auto& db = dist[b];
        // order by (d_a - d_b, distance from the first landmark, position):
        // two stable counting passes, since all keys are small integers
        int lo = 0, hi = 0, depth = 0;
        for (std::size_t q = 0; q < size; ++q) {
          lo = std::min(lo, da[q] - db[q]);
          hi = std::max(hi, da[q] - db[q]);
          depth = std::max(depth, base[q]);
        }
        std::vector<int> by_base(size);
        std::vector<int> count(static_cast<std::size_t>(std::max(depth, hi - lo)) + 2, 0);
        for (std::size_t q = 0; q < size; ++q) ++count[base[q] + 1];
        for (std::size_t c = 1; c < count.size(); ++c) count[c] += count[c - 1];
        for (std::size_t q = 0; q < size; ++q) by_base[count[base[q]]++] = static_cast<int>(q);
        std::fill(count.begin(), count.end(), 0);
        for (std::size_t q = 0; q < size; ++q) ++count[da[q] - db[q] - lo + 1];
        for (std::size_t c = 1; c < count.size(); ++c) count[c] += count[c - 1];
        std::vector<int> order(size);
        for (int q : by_base) order[count[da[q] - db[q] - lo]++] = bfs_order[q];
        orders.push_back(std::move(order));
      }
    }
    return orders;
  }

  std::vector<int> level_order(const std::vector<int>& set, bool& connected) {
    std::vector<int> sorted = set;
    std::sort(sorted.begin(), sorted.end());
    mark(sorted);
    std::size_t first = 0;
    if (config_.seed != 0) {
      std::uint64_t h = (config_.seed ^ sorted.size()) * 0x9E3779B97F4A7C15ULL;
      h ^= h >> 29;
      first = static_cast<std::size_t>(h % sorted.size());
    }
    std::vector<int> order;
    order.reserve(sorted.size());
    std::vector<int> touched;
    std::size_t scan = 0;
    bool use_first = true;
    // one component at a time, each from its own peripheral vertex
    while (order.size() < sorted.size()) {
      int root = -1;
      if (use_first) {
        root = sorted[first];
        use_first = false;
      } else {
        while (ordered_[sorted[scan]] == current_) ++scan;
        root = sorted[scan];
      }
      const int start = pseudo_peripheral(root);
      const std::vector<int> comp = bfs(start, touched);
      reset(touched);
      for (int v : comp) ordered_[v] = current_;
      order.insert(order.end(), comp.begin(), comp.end());
      connected = comp.size() == sorted.size();
    }
    return order;
  }

  const Adjacency& adj_;
  std::span<const int> weights_;
  const PartitionConfig& config_;
  std::vector<int> stamp_;
  std::vector<int> dist_;
  std::vector<int> ordered_;
  std::vector<int> local_;
  std::vector<int> side_;
  int current_ = 1;
  static constexpr std::size_t kMaxLandmarks = 8;
};

}  // namespace

ClusterPartition partition_graph(const Adjacency& adj, const PartitionConfig& config,
                                 std::span<const int> weights) {
  if (config.target_cluster_size < 1 || config.max_imbalance < 1.0) {
    throw Error(ErrorKind::InvalidArgument, "partition_graph: invalid config");
  }
  const int n = static_cast<int>(adj.size());
  if (!weights.empty() && static_cast<int>(weights.size()) != n) {
    throw Error(ErrorKind::DimensionMismatch, "partition_graph: weights length");
  }
  Bisector bisector(adj, weights, config);
  std::vector<std::vector<int>> clusters;
  std::vector<int> bucket;
  std::int64_t bucket_weight = 0;
  const std::int64_t r = config.target_cluster_size;
  for (auto& comp : bisector.components()) {
    const std::int64_t w = bisector.weight(comp);
    if (w <= r) {
      if (!bucket.empty() && bucket_weight + w > r) {
        clusters.push_back(std::move(bucket));
        bucket.clear();
        bucket_weight = 0;
      }
      bucket.insert(bucket.end(), comp.begin(), comp.end());
      bucket_weight += w;
      continue;
    }
    bisector.section(std::move(comp), bisector.parts_for(w), clusters);
  }
  if (!bucket.empty()) clusters.push_back(std::move(bucket));
  for (auto& c : clusters) std::sort(c.begin(), c.end());
  return ClusterPartition::from_clusters(n, std::move(clusters));
}

ClusterPartition split_graph(const Adjacency& adj, int parts, std::span<const int> weights) {
  const int n = static_cast<int>(adj.size());
  if (parts < 1 || parts > n) {
    throw Error(ErrorKind::InvalidArgument, "split_graph: need 1 <= parts <= vertex count");
  }
  if (!weights.empty() && static_cast<int>(weights.size()) != n) {
    throw Error(ErrorKind::DimensionMismatch, "split_graph: weights length");
  }
  const PartitionConfig config;
  Bisector bisector(adj, weights, config);
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::vector<int>> parts_out;
  bisector.section(std::move(all), parts, parts_out);
  return ClusterPartition::from_clusters(n, std::move(parts_out));
}

Adjacency to_adjacency(const BlockPattern& p) {
  Adjacency adj(p.rows.size());
  for (int i = 0; i < p.size(); ++i) adj[i] = neighbors(p, i);
  return adj;
}

ClusterPartition coarse_partition(const BlockPattern& coarse, std::span<const int> weights,
                                  const PartitionConfig& config, std::span<const int> owner) {
  const int m = coarse.size();
  if (owner.empty()) return partition_graph(to_adjacency(coarse), config, weights);

  int num_owners = 0;
  for (int o : owner) num_owners = std::max(num_owners, o + 1);
  std::vector<std::vector<int>> clusters;
  for (int o = 0; o < num_owners; ++o) {
    std::vector<int> members;
    std::vector<int> local(static_cast<std::size_t>(m), -1);
    for (int v = 0; v < m; ++v) {
      if (owner[v] == o) {
        local[v] = static_cast<int>(members.size());
        members.push_back(v);
      }
    }
    if (members.empty()) continue;
    Adjacency sub(members.size());
    std::vector<int> sub_weights;
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (int x : coarse.rows[members[a]]) {
        if (x != members[a] && local[x] >= 0) sub[a].push_back(local[x]);
      }
      sub_weights.push_back(weights.empty() ? 1 : weights[members[a]]);
    }
    const ClusterPartition part = partition_graph(sub, config, sub_weights);
    for (const auto& c : part.clusters) {
      std::vector<int> global;
      for (int a : c) global.push_back(members[a]);
      clusters.push_back(std::move(global));
    }
  }
  return ClusterPartition::from_clusters(m, std::move(clusters));
}

std::int64_t edge_cut(const Adjacency& adj, const ClusterPartition& p) {
  std::int64_t cut = 0;
  for (std::size_t u = 0; u < adj.size(); ++u) {
    for (int v : adj[u]) {
      if (static_cast<int>(u) < v && p.cluster_of[u] != p.cluster_of[v]) ++cut;
    }
  }
  return cut;
}

}  // namespace hsolve
