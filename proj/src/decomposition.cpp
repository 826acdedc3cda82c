#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "json.hpp"

#include "hsolve/error.hpp"
#include "hsolve/parallel.hpp"
#include "hsolve/partition.hpp"

namespace hsolve {

const char* to_string(ClusterClass c) {
  switch (c) {
    case ClusterClass::D1: return "d1";
    case ClusterClass::D2: return "d2";
    case ClusterClass::D3: return "d3";
  }
  return "?";
}

const char* to_string(ColoringMode m) {
  return m == ColoringMode::Strict ? "strict" : "owner-aware";
}

ColoringMode parse_coloring_mode(const std::string& name) {
  if (name == "strict") return ColoringMode::Strict;
  if (name == "owner-aware" || name == "owner") return ColoringMode::OwnerAware;
  throw Error(ErrorKind::InvalidArgument, "unknown coloring mode '" + name + "'");
}

bool DomainDecomposition::reachable(int from, int to) const {
  if (from == to) return true;
  return std::binary_search(n1[from].begin(), n1[from].end(), to) ||
         std::binary_search(n2[from].begin(), n2[from].end(), to);
}

std::vector<int> DomainDecomposition::clusters_of(int worker) const {
  std::vector<int> out;
  for (int c = 0; c < num_clusters(); ++c) {
    if (owner[c] == worker) out.push_back(c);
  }
  return out;
}

DomainDecomposition decompose(const BlockPattern& pattern, std::vector<int> owner, int workers) {
  const int m = pattern.size();
  if (workers < 1 || static_cast<int>(owner.size()) != m) {
    throw Error(ErrorKind::InvalidArgument, "decompose: owner vector does not match the pattern");
  }
  for (int o : owner) {
    if (o < 0 || o >= workers) throw Error(ErrorKind::InvalidArgument, "decompose: owner out of range");
  }
  DomainDecomposition d;
  d.workers = workers;
  d.owner = std::move(owner);
  d.klass.assign(static_cast<std::size_t>(m), ClusterClass::D3);
  d.color.assign(static_cast<std::size_t>(m), -1);
  std::vector<std::set<int>> n1(static_cast<std::size_t>(workers));
  for (int i = 0; i < m; ++i) {
    for (int j : pattern.rows[i]) {
      if (d.owner[j] != d.owner[i]) {
        d.klass[i] = ClusterClass::D1;
        n1[d.owner[i]].insert(d.owner[j]);
      }
    }
  }
  for (int i = 0; i < m; ++i) {
    if (d.klass[i] != ClusterClass::D3) continue;
    for (int j : pattern.rows[i]) {
      if (d.klass[j] == ClusterClass::D1) d.klass[i] = ClusterClass::D2;
    }
  }
  d.n1.resize(static_cast<std::size_t>(workers));
  d.n2.resize(static_cast<std::size_t>(workers));
  for (int p = 0; p < workers; ++p) {
    d.n1[p].assign(n1[p].begin(), n1[p].end());
    std::set<int> two;
    for (int q : n1[p]) two.insert(n1[q].begin(), n1[q].end());
    two.erase(p);
    d.n2[p].assign(two.begin(), two.end());
  }
  return d;
}

DomainDecomposition decompose(const BlockPattern& pattern, int workers) {
  const int m = pattern.size();
  if (workers < 1 || workers > m) {
    throw Error(ErrorKind::InvalidArgument, "decompose: need 1 <= workers <= cluster count");
  }
  std::vector<int> owner(static_cast<std::size_t>(m), 0);
  if (workers > 1) owner = split_graph(to_adjacency(pattern), workers).cluster_of;
  return decompose(pattern, std::move(owner), workers);
}

DomainDecomposition decompose(const BlockMatrix& a, int workers) {
  return decompose(block_pattern(a), workers);
}

namespace {

Coloring greedy_coloring(const DomainDecomposition& d, const BlockPattern& pattern, ColoringMode mode) {
  Coloring c;
  c.mode = mode;
  c.color.assign(static_cast<std::size_t>(d.num_clusters()), -1);
  std::vector<int> mark;
  for (int s = 0; s < d.num_clusters(); ++s) {
    if (d.klass[s] != ClusterClass::D1) continue;
    const std::vector<int> dist = bfs_distances(pattern, s, 2);
    mark.assign(static_cast<std::size_t>(c.num_colors) + 1, 0);
    for (int t = 0; t < d.num_clusters(); ++t) {
      if (t == s || dist[t] < 0 || c.color[t] < 0) continue;
      if (mode == ColoringMode::OwnerAware && d.owner[t] == d.owner[s]) continue;
      mark[c.color[t]] = 1;
    }
    int color = 0;
    while (mark[color]) ++color;
    c.color[s] = color;
    c.num_colors = std::max(c.num_colors, color + 1);
  }
  return c;
}

}  // namespace

Coloring color_d1(const DomainDecomposition& d, const BlockPattern& pattern, ColoringMode mode) {
  if (pattern.size() != d.num_clusters()) {
    throw Error(ErrorKind::DimensionMismatch, "color_d1: pattern does not match the decomposition");
  }
  Coloring strict = greedy_coloring(d, pattern, ColoringMode::Strict);
  if (mode == ColoringMode::Strict) return strict;
  Coloring owner = greedy_coloring(d, pattern, ColoringMode::OwnerAware);
  if (owner.num_colors <= strict.num_colors) return owner;
  strict.mode = ColoringMode::OwnerAware;
  strict.fell_back = true;
  return strict;
}

void apply_coloring(DomainDecomposition& d, const Coloring& c) {
  d.color = c.color;
  d.num_colors = c.num_colors;
  d.coloring = c.mode;
}

std::int64_t coloring_conflicts(const DomainDecomposition& d, const BlockPattern& pattern,
                                const std::vector<int>& color, ColoringMode mode) {
  std::vector<int> d1;
  for (int s = 0; s < d.num_clusters(); ++s) {
    if (d.klass[s] == ClusterClass::D1) d1.push_back(s);
  }
  std::int64_t conflicts = 0;
  for (std::size_t a = 0; a < d1.size(); ++a) {
    for (std::size_t b = a + 1; b < d1.size(); ++b) {
      const int s = d1[a];
      const int t = d1[b];
      if (color[s] < 0 || color[s] != color[t]) continue;
      if (mode == ColoringMode::OwnerAware && d.owner[s] == d.owner[t]) continue;
      bool close = pattern.contains(s, t);
      for (std::size_t q = 0; !close && q < pattern.rows[s].size(); ++q) {
        close = pattern.contains(pattern.rows[s][q], t);
      }
      if (close) ++conflicts;
    }
  }
  return conflicts;
}

std::vector<int> canonical_order(const DomainDecomposition& d) {
  std::vector<int> order(static_cast<std::size_t>(d.num_clusters()));
  for (int c = 0; c < d.num_clusters(); ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (d.klass[a] != d.klass[b]) return d.klass[a] < d.klass[b];
    if (d.klass[a] == ClusterClass::D1 && d.color[a] != d.color[b]) return d.color[a] < d.color[b];
    return a < b;
  });
  return order;
}

double speedup(double t_base, double t_p) { return t_base / t_p; }

double strong_efficiency(double speedup, int p0, int p) {
  return speedup * static_cast<double>(p0) / static_cast<double>(p);
}

double weak_efficiency(double t_base, double t_p) { return t_base / t_p; }

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / sxx;
}

ScalingMetrics scaling_report(const std::vector<TimingSample>& samples) {
  if (samples.size() < 2) {
    throw Error(ErrorKind::InsufficientSamples, "scaling_report: need at least two samples");
  }
  ScalingMetrics m;
  // Strong scaling: runs of the same N against the smallest p of that N.
  for (const TimingSample& t : samples) {
    const TimingSample* base = nullptr;
    for (const TimingSample& u : samples) {
      if (u.n == t.n && (base == nullptr || u.workers < base->workers)) base = &u;
    }
    if (base == &t) continue;
    const double s = speedup(base->seconds, t.seconds);
    m.s.push_back({t.n, t.workers, s});
    m.es.push_back({t.n, t.workers, strong_efficiency(s, base->workers, t.workers)});
  }
  // Weak scaling: runs of the same N/p against the smallest p of that N/p.
  auto same_load = [](const TimingSample& a, const TimingSample& b) {
    return a.n * b.workers == b.n * a.workers;
  };
  for (const TimingSample& t : samples) {
    const TimingSample* base = nullptr;
    for (const TimingSample& u : samples) {
      if (same_load(u, t) && (base == nullptr || u.workers < base->workers)) base = &u;
    }
    if (base == &t || base->workers == t.workers) continue;
    m.ew.push_back({t.n, t.workers, weak_efficiency(base->seconds, t.seconds)});
  }
  std::vector<double> load, volume;
  for (const TimingSample& t : samples) {
    if (t.volume > 0.0) {
      load.push_back(static_cast<double>(t.n) / t.workers);
      volume.push_back(t.volume);
    }
  }
  m.volume_exponent = loglog_slope(load, volume);
  return m;
}

std::string to_json(const ScalingMetrics& m) {
  auto points = [](const std::vector<ScalingPoint>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const ScalingPoint& q : v) a.push_back({{"N", q.n}, {"p", q.workers}, {"value", q.value}});
    return a;
  };
  nlohmann::json j = {{"S", points(m.s)}, {"Es", points(m.es)}, {"Ew", points(m.ew)}};
  if (std::isnan(m.volume_exponent)) {
    j["volume_exponent"] = nullptr;
  } else {
    j["volume_exponent"] = m.volume_exponent;
  }
  return j.dump();
}

}  // namespace hsolve
