#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "hsolve/error.hpp"
#include "hsolve/krylov.hpp"
#include "hsolve/matrix_market.hpp"
#include "hsolve/parallel.hpp"
#include "hsolve/problems.hpp"

#ifndef HSOLVE_VERSION
#define HSOLVE_VERSION "0.0.0"
#endif

namespace hsolve::cli {

namespace {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct RunConfig {
  std::string problem = "poisson";
  int n = 16;
  double freq = 1.0;
  double peclet = 10.0;
  std::uint64_t seed = 1;
  std::string matrix;
  int rank = -1;      // unset unless --rank
  double tol = -1.0;  // unset unless --tol
  bool relative = false;
  int cluster_size = 64;
  int workers = 1;
  std::string backend = "sim";
  std::string schedule = "async";
  std::string coloring = "strict";
  std::string krylov = "auto";
  double solve_tol = 1e-12;
  int restart = 50;
  int maxit = 1000;
  double latency = 1e-5;
  double bandwidth = 1e9;
  double flop_rate = 1e9;
  std::string out_json;
  std::string out_csv;
};

struct Input {
  CSRMatrix matrix;
  SymmetryFlag flag = SymmetryFlag::SPD;
};

RankPolicy policy_of(const RunConfig& c) {
  if (c.tol >= 0.0) return RankPolicy::tolerance(c.tol, c.relative);
  return RankPolicy::fixed(c.rank >= 0 ? c.rank : 8);
}

std::string policy_name(const RankPolicy& p) {
  std::ostringstream s;
  if (p.mode == RankPolicy::Mode::FixedRank) {
    s << "K=" << p.rank;
  } else {
    s << (p.relative ? "eps_rel=" : "eps=") << p.epsilon;
  }
  return s.str();
}

Input load(const RunConfig& c, int n) {
  if (!c.matrix.empty()) {
    MatrixMarketData d = read_matrix_market(c.matrix);
    return {std::move(d.matrix), d.flag};
  }
  ProblemSpec s;
  s.kind = parse_problem_kind(c.problem);
  s.n = n;
  s.seed = c.seed;
  s.frequency = c.freq;
  s.peclet = c.peclet;
  Problem p = generate(s);
  return {std::move(p.matrix), p.flag};
}

FactorConfig factor_config(const RunConfig& c, const RankPolicy& policy) {
  FactorConfig f;
  f.partition.target_cluster_size = c.cluster_size;
  f.policy = policy;
  return f;
}

RuntimeOptions runtime_options(const RunConfig& c, int workers) {
  RuntimeOptions o;
  o.workers = workers;
  o.coloring = parse_coloring_mode(c.coloring);
  o.backend = c.backend == "concurrent" ? Backend::Threads : Backend::Simulator;
  o.cost.latency = c.latency;
  o.cost.bandwidth = c.bandwidth;
  o.cost.flop_rate = c.flop_rate;
  return o;
}

// One worker: plain sequential order. Several: the selected schedule.
ParallelFactor build(const Input& in, const RunConfig& c, const RankPolicy& policy, int workers) {
  const FactorConfig fc = factor_config(c, policy);
  const RuntimeOptions o = runtime_options(c, workers);
  if (workers == 1) return canonical_factor(in.matrix, in.flag, fc, o);
  if (c.schedule == "bsp") return bsp_factor(in.matrix, in.flag, fc, o);
  return async_factor(in.matrix, in.flag, fc, o);
}

LinearOperator preconditioner(const ParallelFactor& pf, int workers) {
  if (workers == 1) return factor_operator(pf.factor);
  return [&pf](const Vector& x) { return parallel_solve(pf, x); };
}

bool use_cg(const RunConfig& c, SymmetryFlag flag) {
  if (c.krylov == "cg") return true;
  if (c.krylov == "gmres") return false;
  return flag == SymmetryFlag::SPD;
}

KrylovResult krylov_solve(const RunConfig& c, const Input& in, const LinearOperator& m, const Vector& b) {
  KrylovOptions o;
  o.tol = c.solve_tol;
  o.max_iterations = c.maxit;
  o.restart = c.restart;
  const LinearOperator a = matrix_operator(in.matrix);
  return use_cg(c, in.flag) ? pcg(a, m, b, o) : gmres(a, m, b, o);
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Io:
    case ErrorKind::ParseError:
    case ErrorKind::UnsupportedField:
      return kIoError;
    case ErrorKind::InvalidArgument:
    case ErrorKind::InsufficientSamples:
      return kBadConfig;
    default:
      return kNumericFailure;
  }
}

// Resolved flags under their command-line names; written back as key = value
// lines it is a --config file that reproduces the run.
json resolved_flags(const RunConfig& c) {
  json cfg;
  if (c.matrix.empty()) {
    cfg["problem"] = c.problem;
    cfg["n"] = c.n;
    cfg["freq"] = c.freq;
    cfg["peclet"] = c.peclet;
  } else {
    cfg["matrix"] = c.matrix;
  }
  cfg["seed"] = c.seed;
  const RankPolicy policy = policy_of(c);
  if (policy.mode == RankPolicy::Mode::FixedRank) {
    cfg["rank"] = policy.rank;
  } else {
    cfg["tol"] = policy.epsilon;
    cfg["relative"] = policy.relative;
  }
  cfg["cluster-size"] = c.cluster_size;
  cfg["workers"] = c.workers;
  cfg["backend"] = c.backend;
  cfg["schedule"] = c.schedule;
  cfg["coloring"] = c.coloring;
  cfg["krylov"] = c.krylov;
  cfg["solve-tol"] = c.solve_tol;
  cfg["restart"] = c.restart;
  cfg["maxit"] = c.maxit;
  cfg["latency"] = c.latency;
  cfg["bandwidth"] = c.bandwidth;
  cfg["flop-rate"] = c.flop_rate;
  return cfg;
}

std::string config_file(const RunConfig& c) {
  const json flags = resolved_flags(c);
  std::ostringstream s;
  for (const auto& [key, value] : flags.items()) s << key << " = " << value.dump() << '\n';
  return s.str();
}

json echo(const RunConfig& c, const std::string& command) {
  return {{"command", command},
          {"version", HSOLVE_VERSION},
          {"policy", policy_name(policy_of(c))},
          {"config", resolved_flags(c)}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
  f << text;
  if (!f) throw Error(ErrorKind::Io, "write to " + path + " failed");
}

void emit(const json& j, const RunConfig& c, std::ostream& out) {
  const std::string text = j.dump(2) + "\n";
  out << text;
  if (!c.out_json.empty()) write_text(c.out_json, text);
}

json factor_json(const HierarchicalFactor& f) {
  json levels = json::array();
  for (std::size_t l = 0; l < f.stats.levels.size(); ++l) {
    const LevelStats& s = f.stats.levels[l];
    levels.push_back({{"level", l},
                      {"dofs", s.dofs},
                      {"clusters", s.clusters},
                      {"coarse_dofs", s.coarse_dofs},
                      {"max_cluster_size", s.max_cluster_size},
                      {"max_rank", s.max_rank},
                      {"passthrough", s.passthrough},
                      {"compression_skipped", s.compression_skipped.size()},
                      {"fill_in_violations", s.fill_in_violations},
                      {"flops", s.flops},
                      {"seconds", s.seconds}});
  }
  return {{"dofs", f.num_dofs},
          {"symmetry", to_string(f.flag)},
          {"levels", levels},
          {"top_dim", f.stats.top_dim},
          {"flops", f.stats.flops},
          {"seconds", f.stats.seconds},
          {"memory_bytes", f.memory_bytes()},
          {"max_growth_ratio", f.stats.max_growth_ratio()},
          {"fill_in_violations", f.stats.fill_in_violations()}};
}

std::int64_t max_of(const std::vector<std::int64_t>& v) {
  return v.empty() ? 0 : *std::max_element(v.begin(), v.end());
}

std::int64_t total_bytes(const CommLog& log) {
  std::int64_t b = 0;
  for (std::int64_t x : log.sent_bytes) b += x;
  return b;
}

json comm_json(const ParallelFactor& pf) {
  const CommLog& log = pf.log;
  json levels = json::array();
  for (std::size_t l = 0; l < pf.levels.size(); ++l) {
    const DomainDecomposition& d = pf.levels[l];
    std::array<int, 3> count{};
    for (ClusterClass k : d.klass) ++count[static_cast<int>(k)];
    levels.push_back({{"level", l},
                      {"clusters", d.num_clusters()},
                      {"d1", count[0]},
                      {"d2", count[1]},
                      {"d3", count[2]},
                      {"colors", d.num_colors}});
  }
  return {{"workers", log.workers},
          {"coloring", to_string(log.coloring)},
          {"levels", levels},
          {"messages_total", log.sent.size()},
          {"messages_max_worker", max_of(log.messages_per_worker())},
          {"bytes_total", total_bytes(log)},
          {"bytes_max_worker", max_of(log.bytes_per_worker())},
          {"locality_violations", log.locality_violations},
          {"conserved", log.conserved()},
          {"makespan", log.makespan},
          {"idle_total", log.total_idle()}};
}

// Virtual-clock breakdown of one factorization, averaged over workers:
// compute by class, idle (waiting on messages) and the top-level dense
// factorization on worker 0.
struct Breakdown {
  double d1 = 0.0, d2 = 0.0, d3 = 0.0, comm = 0.0, other = 0.0, makespan = 0.0;
};

Breakdown breakdown(const ParallelFactor& pf, const CostModel& cost, int workers) {
  Breakdown b;
  double level_flops = 0.0;
  for (const LevelStats& s : pf.factor.stats.levels) level_flops += s.flops;
  b.other = (pf.factor.stats.flops - level_flops) / cost.flop_rate;
  if (workers == 1) {
    b.d3 = level_flops / cost.flop_rate;
    b.makespan = b.d3 + b.other;
    return b;
  }
  for (const auto& [key, seconds] : pf.log.phase_time) {
    if (key.rfind("d1", 0) == 0) {
      b.d1 += seconds;
    } else if (key == "d2") {
      b.d2 += seconds;
    } else if (key == "d3") {
      b.d3 += seconds;
    }
  }
  b.d1 /= workers;
  b.d2 /= workers;
  b.d3 /= workers;
  b.comm = pf.log.total_idle() / workers;
  b.makespan = pf.log.makespan + b.other;
  return b;
}

Vector random_rhs(int n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Vector b(n);
  for (int i = 0; i < n; ++i) b(i) = rng.uniform() - 0.5;
  return b;
}

std::string factor_bytes(const HierarchicalFactor& f) {
  std::ostringstream s;
  save_factor(f, s);
  return s.str();
}

// ---- subcommands ----

int cmd_gen(const RunConfig& c, const std::string& path, std::ostream& out) {
  if (!c.matrix.empty()) throw Error(ErrorKind::InvalidArgument, "gen: --matrix is not a generator");
  const Input in = load(c, c.n);
  write_matrix_market(path, in.matrix, in.flag);
  json j = echo(c, "gen");
  j["result"] = {{"path", path}, {"rows", in.matrix.n}, {"nnz", in.matrix.nnz()}, {"symmetry", to_string(in.flag)}};
  emit(j, c, out);
  return kOk;
}

int cmd_factor(const RunConfig& c, const std::string& save, std::ostream& out) {
  const Input in = load(c, c.n);
  const auto t0 = Clock::now();
  const ParallelFactor pf = build(in, c, policy_of(c), c.workers);
  const double setup = since(t0);
  json j = echo(c, "factor");
  j["result"] = factor_json(pf.factor);
  j["result"]["setup_seconds"] = setup;
  if (c.workers > 1) j["result"]["comm"] = comm_json(pf);
  if (!save.empty()) save_factor(pf.factor, save);
  emit(j, c, out);
  return kOk;
}

int cmd_solve(const RunConfig& c, std::ostream& out) {
  const Input in = load(c, c.n);
  const auto t0 = Clock::now();
  const ParallelFactor pf = build(in, c, policy_of(c), c.workers);
  const double setup = since(t0);
  const Vector b = Vector::Ones(in.matrix.n);
  const auto t1 = Clock::now();
  const KrylovResult r = krylov_solve(c, in, preconditioner(pf, c.workers), b);
  const double solve = since(t1);
  const double true_residual = (b - in.matrix.multiply(r.x)).norm() / b.norm();

  json j = echo(c, "solve");
  j["result"] = {{"converged", r.report.converged()},
                 {"status", to_string(r.report.status)},
                 {"method", use_cg(c, in.flag) ? "cg" : "gmres"},
                 {"iterations", r.report.iterations},
                 {"initial_residual", r.report.residuals.empty() ? 0.0 : r.report.residuals.front()},
                 {"final_residual", r.report.final_residual()},
                 {"true_residual", true_residual},
                 {"residuals", r.report.residuals},
                 {"setup_seconds", setup},
                 {"solve_seconds", solve},
                 {"total_seconds", setup + solve},
                 {"memory_bytes", pf.factor.memory_bytes()},
                 {"factor", factor_json(pf.factor)}};
  if (!c.out_csv.empty()) {
    std::ostringstream csv;
    write_history_csv(csv, r.report);
    write_text(c.out_csv, csv.str());
  }
  emit(j, c, out);
  return r.report.converged() ? kOk : kNotConverged;
}

struct BenchOptions {
  std::vector<int> ns;
  std::vector<int> ps;
  std::vector<int> ranks;
  std::vector<double> tols;
  int repeat = 1;
};

constexpr const char* kBenchHeader =
    "N,p,policy,iterations,converged,setup_s,solve_s,total_s,d1_s,d2_s,d3_s,comm_s,other_s,"
    "makespan_s,flops,messages,bytes,max_worker_bytes,memory_bytes,status";

struct BenchRow {
  std::int64_t n = 0;
  int p = 1;
  std::string policy;
  int iterations = 0;
  bool converged = false;
  double setup = 0.0, solve = 0.0;
  Breakdown time;
  double flops = 0.0;
  std::int64_t messages = 0, bytes = 0, max_worker_bytes = 0;
  std::size_t memory = 0;
  std::string status = "ok";
};

void write_row(std::ostream& csv, const BenchRow& r) {
  csv << r.n << ',' << r.p << ',' << r.policy << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ','
      << r.setup << ',' << r.solve << ',' << r.setup + r.solve << ',' << r.time.d1 << ',' << r.time.d2 << ','
      << r.time.d3 << ',' << r.time.comm << ',' << r.time.other << ',' << r.time.makespan << ',' << r.flops
      << ',' << r.messages << ',' << r.bytes << ',' << r.max_worker_bytes << ',' << r.memory << ',' << r.status
      << '\n';
  csv.flush();
}

BenchRow bench_one(const RunConfig& c, int n, int p, const RankPolicy& policy, int repeat) {
  BenchRow row;
  row.p = p;
  row.policy = policy_name(policy);
  const Input in = load(c, n);
  row.n = in.matrix.n;
  const Vector b = Vector::Ones(in.matrix.n);
  row.setup = row.solve = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < std::max(1, repeat); ++rep) {
    const auto t0 = Clock::now();
    const ParallelFactor pf = build(in, c, policy, p);
    row.setup = std::min(row.setup, since(t0));
    const auto t1 = Clock::now();
    const KrylovResult r = krylov_solve(c, in, preconditioner(pf, p), b);
    row.solve = std::min(row.solve, since(t1));
    if (rep > 0) continue;
    row.iterations = r.report.iterations;
    row.converged = r.report.converged();
    row.time = breakdown(pf, runtime_options(c, p).cost, p);
    row.flops = pf.factor.stats.flops;
    row.messages = max_of(pf.log.messages_per_worker());
    row.bytes = total_bytes(pf.log);
    row.max_worker_bytes = max_of(pf.log.bytes_per_worker());
    row.memory = pf.factor.memory_bytes();
    if (!row.converged) row.status = "not_converged";
  }
  return row;
}

json scaling_json(const std::vector<BenchRow>& rows, const std::string& policy) {
  std::vector<TimingSample> samples;
  for (const BenchRow& r : rows) {
    if (r.policy != policy || r.status.rfind("error", 0) == 0) continue;
    samples.push_back({r.n, r.p, r.time.makespan, static_cast<double>(r.max_worker_bytes)});
  }
  try {
    json j = json::parse(to_json(scaling_report(samples)));
    j["policy"] = policy;
    return j;
  } catch (const Error& e) {
    return {{"policy", policy}, {"error", to_string(e.kind())}};
  }
}

int cmd_bench(const RunConfig& c, const BenchOptions& b, std::ostream& out) {
  std::vector<RankPolicy> policies;
  for (int k : b.ranks) policies.push_back(RankPolicy::fixed(k));
  for (double e : b.tols) policies.push_back(RankPolicy::tolerance(e, c.relative));
  if (policies.empty()) policies.push_back(policy_of(c));
  std::vector<int> ns = b.ns.empty() || !c.matrix.empty() ? std::vector<int>{c.n} : b.ns;
  const std::vector<int> ps = b.ps.empty() ? std::vector<int>{c.workers} : b.ps;

  std::ofstream file;
  if (!c.out_csv.empty()) {
    file.open(c.out_csv);
    if (!file) throw Error(ErrorKind::Io, "cannot open " + c.out_csv + " for writing");
  }
  std::ostream& csv = c.out_csv.empty() ? out : file;
  csv << kBenchHeader << '\n';

  std::vector<BenchRow> rows;
  int code = kOk;
  for (int n : ns) {
    for (int p : ps) {
      for (const RankPolicy& policy : policies) {
        BenchRow row;
        try {
          row = bench_one(c, n, p, policy, b.repeat);
          if (!row.converged && code == kOk) code = kNotConverged;
        } catch (const Error& e) {
          row = BenchRow{};
          row.n = c.matrix.empty() ? static_cast<std::int64_t>(n) * n * n : 0;
          row.p = p;
          row.policy = policy_name(policy);
          row.status = std::string("error:") + to_string(e.kind());
          if (code == kOk || code == kNotConverged) code = exit_code(e.kind());
        }
        write_row(csv, row);
        rows.push_back(row);
      }
    }
  }

  json j = echo(c, "bench");
  json scaling = json::array();
  json slopes = json::array();
  for (const RankPolicy& policy : policies) {
    const std::string name = policy_name(policy);
    scaling.push_back(scaling_json(rows, name));
    for (int p : ps) {
      std::vector<double> x, y;
      for (const BenchRow& r : rows) {
        if (r.policy == name && r.p == p && r.status.rfind("error", 0) != 0) {
          x.push_back(static_cast<double>(r.n));
          y.push_back(r.setup + r.solve);
        }
      }
      const double slope = loglog_slope(x, y);
      if (!std::isnan(slope)) slopes.push_back({{"policy", name}, {"p", p}, {"slope", slope}});
    }
  }
  j["rows"] = rows.size();
  j["scaling"] = scaling;
  j["time_slope"] = slopes;
  // The CSV goes to stdout when no file is given, so the summary does too
  // only when the CSV is in a file.
  if (c.out_csv.empty()) {
    if (!c.out_json.empty()) write_text(c.out_json, j.dump(2) + "\n");
  } else {
    emit(j, c, out);
  }
  return code;
}

int cmd_psim(const RunConfig& c, bool verify, std::ostream& out) {
  const Input in = load(c, c.n);
  const RankPolicy policy = policy_of(c);
  const ParallelFactor pf = build(in, c, policy, c.workers);
  json result = comm_json(pf);
  result["schedule"] = c.workers == 1 ? "sequential" : c.schedule;
  result["backend"] = c.backend;
  bool ok = pf.log.locality_violations == 0 && pf.log.conserved();

  const Vector b = random_rhs(in.matrix.n, c.seed);
  CommLog solve_log;
  solve_log.workers = c.workers;
  const Vector x = parallel_solve(pf, b, &solve_log);
  result["solve_messages"] = solve_log.sent.size();
  result["solve_bytes"] = total_bytes(solve_log);
  result["solve_locality_violations"] = solve_log.locality_violations;
  ok = ok && solve_log.locality_violations == 0;
  if (verify) {
    const ParallelFactor canon = canonical_factor(in.matrix, in.flag, factor_config(c, policy),
                                                  runtime_options(c, c.workers));
    const Vector x0 = apply_solve(canon.factor, b);
    const double scale = std::max(x0.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    const double diff = (x - x0).cwiseAbs().maxCoeff() / scale;
    const bool same = factor_bytes(pf.factor) == factor_bytes(canon.factor);
    result["max_solve_diff"] = diff;
    result["identical_factor"] = same;
    ok = ok && same && diff <= 1e-14;
  }
  if (!c.out_csv.empty()) {
    std::ostringstream csv;
    pf.log.write_csv(csv);
    write_text(c.out_csv, csv.str());
  }
  json j = echo(c, "psim");
  j["result"] = result;
  emit(j, c, out);
  return ok ? kOk : kNumericFailure;
}

int cmd_color_check(const RunConfig& c, std::ostream& out) {
  const Input in = load(c, c.n);
  const FactorConfig fc = factor_config(c, policy_of(c));
  const ClusterPartition part = partition_graph(in.matrix.adjacency(), fc.partition);
  const BlockPattern pattern = block_pattern(assemble(in.matrix, part, in.flag));
  const DomainDecomposition d = decompose(pattern, c.workers);
  const Coloring strict = color_d1(d, pattern, ColoringMode::Strict);
  const Coloring owner = color_d1(d, pattern, ColoringMode::OwnerAware);
  const std::int64_t strict_conflicts = coloring_conflicts(d, pattern, strict.color, ColoringMode::Strict);
  const std::int64_t owner_conflicts = coloring_conflicts(d, pattern, owner.color, ColoringMode::OwnerAware);
  std::array<int, 3> count{};
  for (ClusterClass k : d.klass) ++count[static_cast<int>(k)];
  json n1 = json::array();
  for (const auto& v : d.n1) n1.push_back(v);

  json j = echo(c, "color-check");
  j["result"] = {{"clusters", d.num_clusters()},
                 {"d1", count[0]},
                 {"d2", count[1]},
                 {"d3", count[2]},
                 {"n1", n1},
                 {"strict", {{"colors", strict.num_colors}, {"conflicts", strict_conflicts}}},
                 {"owner_aware",
                  {{"colors", owner.num_colors}, {"conflicts", owner_conflicts}, {"fell_back", owner.fell_back}}}};
  emit(j, c, out);
  const bool ok = strict_conflicts == 0 && owner_conflicts == 0 && owner.num_colors <= strict.num_colors;
  return ok ? kOk : kNumericFailure;
}

void add_common(CLI::App& app, RunConfig& c) {
  auto* problem = app.add_option("--problem", c.problem, "poisson | vcpoisson | helmholtz | convdiff")
                      ->check(CLI::IsMember({"poisson", "vcpoisson", "helmholtz", "convdiff"}));
  app.add_option("--n", c.n, "grid points per dimension")->check(CLI::Range(2, 4096));
  app.add_option("--freq", c.freq, "Helmholtz frequency (n/f points per wavelength)")
      ->check(CLI::PositiveNumber);
  app.add_option("--peclet", c.peclet, "convection-diffusion wind");
  app.add_option("--seed", c.seed, "seed of the random field / right-hand side");
  app.add_option("--matrix", c.matrix, "Matrix Market input instead of a generator")->excludes(problem);
  auto* rank = app.add_option("--rank", c.rank, "fixed rank K")->check(CLI::NonNegativeNumber);
  app.add_option("--tol", c.tol, "truncation tolerance (2-norm)")->check(CLI::NonNegativeNumber)->excludes(rank);
  app.add_flag("--relative", c.relative, "tolerance relative to the largest singular value");
  app.add_option("--cluster-size", c.cluster_size, "target cluster size r")->check(CLI::PositiveNumber);
  app.add_option("--workers", c.workers, "worker count p")->check(CLI::PositiveNumber);
  app.add_option("--backend", c.backend, "sim | concurrent")->check(CLI::IsMember({"sim", "concurrent"}));
  app.add_option("--schedule", c.schedule, "bsp | async")->check(CLI::IsMember({"bsp", "async"}));
  app.add_option("--coloring", c.coloring, "strict | owner-aware")
      ->check(CLI::IsMember({"strict", "owner-aware"}));
  app.add_option("--krylov", c.krylov, "auto | cg | gmres")->check(CLI::IsMember({"auto", "cg", "gmres"}));
  app.add_option("--solve-tol", c.solve_tol, "Krylov tolerance")->check(CLI::PositiveNumber);
  app.add_option("--restart", c.restart, "GMRES restart length")->check(CLI::PositiveNumber);
  app.add_option("--maxit", c.maxit, "Krylov iteration limit")->check(CLI::PositiveNumber);
  app.add_option("--latency", c.latency, "simulated message latency (s)")->check(CLI::NonNegativeNumber);
  app.add_option("--bandwidth", c.bandwidth, "simulated bandwidth (bytes/s)")->check(CLI::PositiveNumber);
  app.add_option("--flop-rate", c.flop_rate, "simulated flop rate")->check(CLI::PositiveNumber);
  app.add_option("--out-json", c.out_json, "write the JSON report here too");
  app.add_option("--out-csv", c.out_csv, "CSV output (history, bench table or comm log)");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical low-rank sparse solver"};
  app.set_version_flag("--version", HSOLVE_VERSION);
  app.set_config("--config", "", "key = value file with any of these flags");
  app.require_subcommand(1);

  RunConfig c;
  add_common(app, c);
  std::string save_config;
  app.add_option("--save-config", save_config, "write the resolved flags as a --config file")
      ->configurable(false);

  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "write a generated matrix in Matrix Market format");
  gen->add_option("--out", gen_out, "output path")->required();

  std::string save_factor_path;
  auto* factor = app.add_subcommand("factor", "factor and report level statistics");
  factor->add_option("--save", save_factor_path, "write the factor in binary form");

  auto* solve = app.add_subcommand("solve", "preconditioned CG / GMRES with the factor");

  BenchOptions bench_opts;
  auto* bench = app.add_subcommand("bench", "sweep n, p and rank policies");
  bench->add_option("--ns", bench_opts.ns, "grid sizes")->delimiter(',');
  bench->add_option("--ps", bench_opts.ps, "worker counts")->delimiter(',');
  bench->add_option("--ranks", bench_opts.ranks, "fixed ranks")->delimiter(',');
  bench->add_option("--tols", bench_opts.tols, "truncation tolerances")->delimiter(',');
  bench->add_option("--repeat", bench_opts.repeat, "timing repeats (minimum is kept)")
      ->check(CLI::PositiveNumber);

  bool verify = true;
  auto* psim = app.add_subcommand("psim", "parallel factorization on the simulated runtime");
  psim->add_flag("--verify,!--no-verify", verify, "compare with the canonical sequential order");

  auto* color = app.add_subcommand("color-check", "validate the boundary colorings by brute force");

  for (CLI::App* sub : {gen, factor, solve, bench, psim, color}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kBadConfig;
  }

  std::string command = "?";
  try {
    if (c.backend == "concurrent" && c.schedule != "async") {
      throw Error(ErrorKind::InvalidArgument, "--backend concurrent needs --schedule async");
    }
    if (!save_config.empty()) write_text(save_config, config_file(c));
    if (gen->parsed()) {
      command = "gen";
      return cmd_gen(c, gen_out, out);
    }
    if (factor->parsed()) {
      command = "factor";
      return cmd_factor(c, save_factor_path, out);
    }
    if (solve->parsed()) {
      command = "solve";
      return cmd_solve(c, out);
    }
    if (bench->parsed()) {
      command = "bench";
      return cmd_bench(c, bench_opts, out);
    }
    if (psim->parsed()) {
      command = "psim";
      return cmd_psim(c, verify, out);
    }
    command = "color-check";
    return cmd_color_check(c, out);
  } catch (const Error& e) {
    json j = echo(c, command);
    j["error"] = to_string(e.kind());
    j["message"] = e.what();
    const int code = exit_code(e.kind());
    j["exit_code"] = code;
    out << j.dump(2) << '\n';
    err << "error: " << e.what() << '\n';
    if (!c.out_json.empty() && e.kind() != ErrorKind::Io) {
      try {
        write_text(c.out_json, j.dump(2) + "\n");
      } catch (const Error&) {
      }
    }
    return code;
  } catch (const std::exception& e) {
    json j = echo(c, command);
    j["error"] = "internal";
    j["message"] = e.what();
    j["exit_code"] = static_cast<int>(kNumericFailure);
    out << j.dump(2) << '\n';
    err << "error: " << e.what() << '\n';
    return kNumericFailure;
  }
}

}  // namespace hsolve::cli
