#pragma once

// Distributed factorization over an abstract message-passing layer.
//
// Clusters are owned by workers. A cluster with an edge to a cluster of
// another worker is d1 (boundary), a local neighbor of a d1 cluster is d2,
// every other cluster is d3. The d1 clusters are colored so that no two of
// them that could touch each other's blocks run at the same time.
//
// The canonical order of a level is: d1 by (color, id), then d2 by id, then
// d3 by id. Every backend produces exactly the factor of a sequential run in
// that order. A worker starts cluster s once every earlier cluster adjacent
// to s in its current block row has finished and its updates have arrived;
// updates to one block are applied in canonical order of their senders.
//
// Workers store the blocks of their own rows and columns. Updates are
// computed by the eliminating worker and sent to the owners of the affected
// row and column. A coarse cluster is owned by the owner of its parts; once
// fewer than 4 p clusters remain, everything is gathered on worker 0.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "hsolve/block_matrix.hpp"
#include "hsolve/factor.hpp"

namespace hsolve {

enum class ClusterClass : std::uint8_t { D1 = 0, D2 = 1, D3 = 2 };
const char* to_string(ClusterClass c);

enum class ColoringMode : std::uint8_t { Strict = 0, OwnerAware = 1 };
const char* to_string(ColoringMode m);
ColoringMode parse_coloring_mode(const std::string& name);

struct DomainDecomposition {
  int workers = 1;
  std::vector<int> owner;               // cluster -> worker
  std::vector<ClusterClass> klass;      // cluster -> class
  std::vector<std::vector<int>> n1;     // worker -> adjacent workers, ascending
  std::vector<std::vector<int>> n2;     // worker -> N1(N1(P)) \ {P}, ascending
  std::vector<int> color;               // cluster -> color, -1 unless d1
  int num_colors = 0;
  ColoringMode coloring = ColoringMode::Strict;

  int num_clusters() const { return static_cast<int>(owner.size()); }
  /// True when `to` is `from` or lies in N1(from) or N2(from).
  bool reachable(int from, int to) const;
  std::vector<int> clusters_of(int worker) const;
};

/// Splits the quotient graph into `workers` balanced parts and classifies.
/// Throws InvalidArgument unless 1 <= workers <= cluster count.
DomainDecomposition decompose(const BlockPattern& pattern, int workers);
DomainDecomposition decompose(const BlockMatrix& a, int workers);
/// Classification for a given ownership (coarse levels inherit owners).
DomainDecomposition decompose(const BlockPattern& pattern, std::vector<int> owner, int workers);

struct Coloring {
  std::vector<int> color;  // -1 for clusters that are not d1
  int num_colors = 0;
  ColoringMode mode = ColoringMode::Strict;
  /// Owner-aware greedy used more colors than the strict one and was
  /// replaced by it (a strict coloring is always a valid owner-aware one).
  bool fell_back = false;
};

/// Greedy coloring of the d1 clusters in id order. Strict: d1 clusters at
/// quotient distance <= 2 differ. Owner-aware: only such pairs on different
/// workers must differ.
Coloring color_d1(const DomainDecomposition& d, const BlockPattern& pattern, ColoringMode mode);
/// Stores `c` in d.color / d.num_colors / d.coloring.
void apply_coloring(DomainDecomposition& d, const Coloring& c);
/// Brute-force count of same-colored d1 pairs that violate `mode`.
std::int64_t coloring_conflicts(const DomainDecomposition& d, const BlockPattern& pattern,
                                const std::vector<int>& color, ColoringMode mode);

/// Cluster ids in canonical order.
std::vector<int> canonical_order(const DomainDecomposition& d);

enum class Phase : std::uint8_t { D1Round = 0, D2Round = 1, D3Round = 2, CoarseSetup = 3, Solve = 4 };
const char* to_string(Phase p);

struct CommRecord {
  int worker = 0;  // sender
  int level = 0;
  Phase phase = Phase::D1Round;
  int color = -1;  // D1Round only
  int peer = 0;    // receiver
  std::int64_t bytes = 0;
  double time = 0.0;  // virtual send time
};

struct CommLog {
  int workers = 1;
  ColoringMode coloring = ColoringMode::Strict;
  std::vector<CommRecord> sent;
  std::vector<std::int64_t> sent_bytes;      // per level
  std::vector<std::int64_t> received_bytes;  // per level
  std::int64_t locality_violations = 0;      // CoarseSetup gathers are exempt
  std::vector<double> busy;                  // per worker, virtual seconds
  std::vector<double> idle;                  // per worker, virtual seconds
  std::map<std::string, double> phase_time;  // compute time by phase
  double makespan = 0.0;

  void count_received(int level, std::int64_t bytes);
  bool conserved() const { return sent_bytes == received_bytes; }
  std::vector<std::int64_t> messages_per_worker(bool include_gather = false) const;
  std::vector<std::int64_t> bytes_per_worker(bool include_gather = false) const;
  double total_idle() const;
  /// Columns: worker,level,phase,peer,bytes,virtual_time.
  void write_csv(std::ostream& out) const;
};

/// Virtual clock: a task costs flops / flop_rate, a message arrives
/// latency + bytes / bandwidth after it is sent.
struct CostModel {
  double flop_rate = 1e9;
  double latency = 1e-5;
  double bandwidth = 1e9;
};

enum class Backend : std::uint8_t { Simulator = 0, Threads = 1 };

struct RuntimeOptions {
  int workers = 1;
  ColoringMode coloring = ColoringMode::Strict;
  CostModel cost;
  Backend backend = Backend::Simulator;
  /// Live clusters below gather_factor * workers are gathered on worker 0.
  int gather_factor = 4;
  /// Fault injection for the watchdog: every d1 cluster gets color 0.
  bool trivial_coloring = false;
};

struct ParallelFactor {
  HierarchicalFactor factor;
  std::vector<DomainDecomposition> levels;
  CommLog log;
};

/// Sequential factorization in canonical order with the same ownership
/// rules; the oracle for the parallel runs. No messages.
ParallelFactor canonical_factor(const CSRMatrix& a, SymmetryFlag flag, const FactorConfig& config,
                                const RuntimeOptions& options);
/// Rounds: one per d1 color, then d2, then d3, with a barrier after each.
/// Throws DeadlockDetected when a task is not ready in its round.
ParallelFactor bsp_factor(const CSRMatrix& a, SymmetryFlag flag, const FactorConfig& config,
                          const RuntimeOptions& options);
/// Each worker runs its lowest ready task (d1 before d2 before d3) and sends
/// updates as soon as it finishes. Backend::Threads runs one thread per
/// worker. Throws DeadlockDetected when no worker can progress.
ParallelFactor async_factor(const CSRMatrix& a, SymmetryFlag flag, const FactorConfig& config,
                            const RuntimeOptions& options);

/// Distributed application of the factor: each worker owns the segments of
/// its clusters; neighbor updates and reads across workers are messages
/// (recorded in `log` when given, phase Solve). Same result as apply_solve.
Vector parallel_solve(const ParallelFactor& f, const Vector& b, CommLog* log = nullptr);

struct TimingSample {
  std::int64_t n = 0;  // problem size N
  int workers = 1;     // p
  double seconds = 0.0;
  double volume = 0.0;  // per-worker communication volume (bytes), optional
};

struct ScalingPoint {
  std::int64_t n = 0;
  int workers = 1;
  double value = 0.0;
};

struct ScalingMetrics {
  std::vector<ScalingPoint> s;   // T(N,p0) / T(N,p), p0 smallest p run for N
  std::vector<ScalingPoint> es;  // S p0 / p
  std::vector<ScalingPoint> ew;  // T(N0,p0) / T(N,p) at equal N/p
  /// Log-log slope of volume against N/p (NaN without two distinct N/p).
  double volume_exponent = 0.0;
};

double speedup(double t_base, double t_p);
double strong_efficiency(double speedup, int p0, int p);
double weak_efficiency(double t_base, double t_p);
/// Throws InsufficientSamples for fewer than two samples.
ScalingMetrics scaling_report(const std::vector<TimingSample>& samples);
/// JSON object with arrays S, Es, Ew and volume_exponent.
std::string to_json(const ScalingMetrics& m);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace hsolve
