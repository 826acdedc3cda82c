#include "hsolve/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "hsolve/error.hpp"

namespace hsolve {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

[[noreturn]] void parse_error(std::int64_t line, const std::string& why) {
  throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + why, line);
}

}  // namespace

SymmetryFlag classify_symmetry(const CSRMatrix& a) {
  if (!a.values_symmetric(1e-12)) return SymmetryFlag::General;
  for (int i = 0; i < a.n; ++i) {
    double d = 0.0;
    for (int p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
      if (a.col_idx[p] == i) d = a.values[p];
    }
    if (!(d > 0.0)) return SymmetryFlag::SymmetricIndefinite;
  }
  return SymmetryFlag::SPD;
}

MatrixMarketData read_matrix_market(std::istream& in) {
  std::string line;
  std::int64_t lineno = 1;
  if (!std::getline(in, line)) parse_error(lineno, "empty input");
  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket" || lower(object) != "matrix") parse_error(lineno, "missing banner");
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (format != "coordinate") {
    throw Error(ErrorKind::UnsupportedField, "only coordinate format is supported");
  }
  if (field != "real" && field != "integer" && field != "double") {
    throw Error(ErrorKind::UnsupportedField, "unsupported field '" + field + "'");
  }
  if (symmetry != "general" && symmetry != "symmetric" && symmetry != "skew-symmetric") {
    throw Error(ErrorKind::UnsupportedField, "unsupported symmetry '" + symmetry + "'");
  }
  do {
    ++lineno;
    if (!std::getline(in, line)) parse_error(lineno, "missing size line");
  } while (line.empty() || line[0] == '%');
  long long rows = 0, cols = 0, entries = 0;
  {
    std::istringstream size(line);
    if (!(size >> rows >> cols >> entries) || rows < 0 || cols < 0 || entries < 0) {
      parse_error(lineno, "bad size line");
    }
  }
  if (rows != cols) throw Error(ErrorKind::UnsupportedField, "matrix is not square");
  std::vector<int> r, c;
  std::vector<double> v;
  r.reserve(static_cast<std::size_t>(entries) * 2);
  c.reserve(r.capacity());
  v.reserve(r.capacity());
  for (long long e = 0; e < entries;) {
    ++lineno;
    if (!std::getline(in, line)) parse_error(lineno, "expected " + std::to_string(entries) + " entries");
    if (line.empty() || line[0] == '%') continue;
    std::istringstream entry(line);
    long long i = 0, j = 0;
    double x = 0.0;
    if (!(entry >> i >> j >> x)) parse_error(lineno, "bad entry");
    if (i < 1 || i > rows || j < 1 || j > cols) parse_error(lineno, "index out of range");
    r.push_back(static_cast<int>(i - 1));
    c.push_back(static_cast<int>(j - 1));
    v.push_back(x);
    if (symmetry != "general" && i != j) {
      r.push_back(static_cast<int>(j - 1));
      c.push_back(static_cast<int>(i - 1));
      v.push_back(symmetry == "symmetric" ? x : -x);
    }
    ++e;
  }
  MatrixMarketData out;
  out.matrix = CSRMatrix::from_triplets(static_cast<int>(rows), r, c, v);
  out.flag = symmetry == "skew-symmetric" ? SymmetryFlag::General : classify_symmetry(out.matrix);
  return out;
}

MatrixMarketData read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  return read_matrix_market(in);
}

void write_matrix_market(std::ostream& out, const CSRMatrix& a, SymmetryFlag flag) {
  const bool sym = is_symmetric(flag);
  std::size_t count = 0;
  for (int i = 0; i < a.n; ++i) {
    for (int p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) count += (!sym || a.col_idx[p] <= i) ? 1 : 0;
  }
  out << "%%MatrixMarket matrix coordinate real " << (sym ? "symmetric" : "general") << '\n';
  out << a.n << ' ' << a.n << ' ' << count << '\n';
  out << std::setprecision(17);
  for (int i = 0; i < a.n; ++i) {
    for (int p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
      if (sym && a.col_idx[p] > i) continue;
      out << i + 1 << ' ' << a.col_idx[p] + 1 << ' ' << a.values[p] << '\n';
    }
  }
  if (!out) throw Error(ErrorKind::Io, "write failed");
}

void write_matrix_market(const std::string& path, const CSRMatrix& a, SymmetryFlag flag) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
  write_matrix_market(out, a, flag);
}

}  // namespace hsolve
