// HSF1 binary format. Every integer is a little-endian int64 and every real
// an IEEE-754 double in little-endian byte order, so files move between
// hosts unchanged.
//
//   "HSF1" version num_dofs flag policy(mode rank epsilon relative)
//   level_count { partition order num_coarse ops[clusters] }
//   top

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "hsolve/error.hpp"
#include "hsolve/factor.hpp"

namespace hsolve {

namespace {

constexpr std::array<char, 4> kMagic{'H', 'S', 'F', '1'};
constexpr std::int64_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void i64(std::int64_t v) {
    std::uint64_t u = static_cast<std::uint64_t>(v);
    bytes(u);
  }
  void f64(double v) { bytes(std::bit_cast<std::uint64_t>(v)); }
  void ints(const std::vector<int>& v) {
    i64(static_cast<std::int64_t>(v.size()));
    for (int x : v) i64(x);
  }
  void matrix(const Matrix& m) {
    i64(m.rows());
    i64(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) f64(m(i, j));
    }
  }
  void factor(const DenseFactor& f) {
    i64(static_cast<std::int64_t>(f.kind()));
    matrix(f.factors());
    ints(f.perm());
  }

 private:
  void bytes(std::uint64_t u) {
    std::array<char, 8> b{};
    for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((u >> (8 * k)) & 0xff);
    out_.write(b.data(), 8);
  }
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::int64_t i64() { return static_cast<std::int64_t>(bytes()); }
  int count(std::int64_t limit = std::int64_t{1} << 31) {
    const std::int64_t v = i64();
    if (v < 0 || v > limit) fail("implausible count");
    return static_cast<int>(v);
  }
  double f64() { return std::bit_cast<double>(bytes()); }
  std::vector<int> ints() {
    std::vector<int> v(static_cast<std::size_t>(count()));
    for (int& x : v) x = static_cast<int>(i64());
    return v;
  }
  Matrix matrix() {
    const int rows = count();
    const int cols = count();
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = f64();
    }
    return m;
  }
  DenseFactor factor() {
    const auto kind = static_cast<DenseFactor::Kind>(count(1));
    Matrix f = matrix();
    return DenseFactor::from_parts(kind, std::move(f), ints());
  }
  [[noreturn]] void fail(const std::string& why) {
    throw Error(ErrorKind::ParseError, "HSF1: " + why);
  }

 private:
  std::uint64_t bytes() {
    std::array<unsigned char, 8> b{};
    in_.read(reinterpret_cast<char*>(b.data()), 8);
    if (!in_) fail("unexpected end of file");
    std::uint64_t u = 0;
    for (int k = 0; k < 8; ++k) u |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    return u;
  }
  std::istream& in_;
};

void write_op(Writer& w, const ClusterOperator& op) {
  w.i64(op.id);
  w.i64(op.size);
  w.i64(op.coarse_size);
  w.i64(op.passthrough ? 1 : 0);
  w.factor(op.a_ss);
  w.matrix(op.u);
  w.matrix(op.v_row);
  w.matrix(op.v_col);
  w.factor(op.fine);
  w.matrix(op.q_fwd);
  w.matrix(op.q_bwd);
  w.ints(op.neighbors);
  w.i64(static_cast<std::int64_t>(op.wc.size()));
  for (std::size_t q = 0; q < op.neighbors.size(); ++q) w.matrix(op.wr[q]);
  for (const Matrix& m : op.wc) w.matrix(m);
}

ClusterOperator read_op(Reader& r) {
  ClusterOperator op;
  op.id = static_cast<int>(r.i64());
  op.size = r.count();
  op.coarse_size = r.count();
  op.passthrough = r.count(1) == 1;
  op.a_ss = r.factor();
  op.u = r.matrix();
  op.v_row = r.matrix();
  op.v_col = r.matrix();
  op.fine = r.factor();
  op.q_fwd = r.matrix();
  op.q_bwd = r.matrix();
  op.neighbors = r.ints();
  const int num_wc = r.count();
  for (std::size_t q = 0; q < op.neighbors.size(); ++q) op.wr.push_back(r.matrix());
  for (int q = 0; q < num_wc; ++q) op.wc.push_back(r.matrix());
  return op;
}

}  // namespace

void save_factor(const HierarchicalFactor& f, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  Writer w(out);
  w.i64(kVersion);
  w.i64(f.num_dofs);
  w.i64(static_cast<std::int64_t>(f.flag));
  w.i64(static_cast<std::int64_t>(f.policy.mode));
  w.i64(f.policy.rank);
  w.f64(f.policy.epsilon);
  w.i64(f.policy.relative ? 1 : 0);
  w.i64(static_cast<std::int64_t>(f.levels.size()));
  for (const FactorLevel& level : f.levels) {
    w.i64(level.partition.num_dofs);
    w.i64(level.partition.size());
    for (const auto& c : level.partition.clusters) w.ints(c);
    w.ints(level.order);
    w.i64(level.num_coarse);
    for (const ClusterOperator& op : level.ops) write_op(w, op);
  }
  w.factor(f.top);
  w.i64(f.stats.top_dim);
  if (!out) throw Error(ErrorKind::Io, "HSF1: write failed");
}

HierarchicalFactor load_factor(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  Reader r(in);
  if (!in || magic != kMagic) r.fail("bad magic");
  if (r.i64() != kVersion) r.fail("unsupported version");
  HierarchicalFactor f;
  f.num_dofs = r.count();
  f.flag = static_cast<SymmetryFlag>(r.count(2));
  f.policy.mode = static_cast<RankPolicy::Mode>(r.count(1));
  f.policy.rank = r.count();
  f.policy.epsilon = r.f64();
  f.policy.relative = r.count(1) == 1;
  const int num_levels = r.count(1 << 16);
  for (int l = 0; l < num_levels; ++l) {
    FactorLevel level;
    const int dofs = r.count();
    const int clusters = r.count();
    std::vector<std::vector<int>> lists(static_cast<std::size_t>(clusters));
    for (auto& c : lists) c = r.ints();
    try {
      level.partition = ClusterPartition::from_clusters(dofs, std::move(lists));
    } catch (const Error& e) {
      r.fail(e.what());
    }
    level.order = r.ints();
    level.num_coarse = r.count();
    level.ops.reserve(static_cast<std::size_t>(clusters));
    for (int c = 0; c < clusters; ++c) level.ops.push_back(read_op(r));
    f.levels.push_back(std::move(level));
  }
  f.top = r.factor();
  f.stats.top_dim = r.count();
  return f;
}

void save_factor(const HierarchicalFactor& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
  save_factor(f, out);
}

HierarchicalFactor load_factor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  return load_factor(in);
}

}  // namespace hsolve
