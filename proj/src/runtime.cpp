#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "hsolve/error.hpp"
#include "hsolve/parallel.hpp"
#include "hsolve/partition.hpp"

namespace hsolve {

const char* to_string(Phase p) {
  switch (p) {
    case Phase::D1Round: return "d1";
    case Phase::D2Round: return "d2";
    case Phase::D3Round: return "d3";
    case Phase::CoarseSetup: return "coarse_setup";
    case Phase::Solve: return "solve";
  }
  return "?";
}

void CommLog::count_received(int level, std::int64_t bytes) {
  if (static_cast<int>(received_bytes.size()) <= level) received_bytes.resize(level + 1, 0);
  if (static_cast<int>(sent_bytes.size()) <= level) sent_bytes.resize(level + 1, 0);
  received_bytes[level] += bytes;
}

std::vector<std::int64_t> CommLog::messages_per_worker(bool include_gather) const {
  std::vector<std::int64_t> count(static_cast<std::size_t>(workers), 0);
  for (const CommRecord& r : sent) {
    if (include_gather || r.phase != Phase::CoarseSetup) ++count[r.worker];
  }
  return count;
}

std::vector<std::int64_t> CommLog::bytes_per_worker(bool include_gather) const {
  std::vector<std::int64_t> bytes(static_cast<std::size_t>(workers), 0);
  for (const CommRecord& r : sent) {
    if (include_gather || r.phase != Phase::CoarseSetup) bytes[r.worker] += r.bytes;
  }
  return bytes;
}

double CommLog::total_idle() const {
  double t = 0.0;
  for (double x : idle) t += x;
  return t;
}

void CommLog::write_csv(std::ostream& out) const {
  out << "worker,level,phase,peer,bytes,virtual_time\n";
  const auto precision = out.precision(17);
  for (const CommRecord& r : sent) {
    out << r.worker << ',' << r.level << ',' << to_string(r.phase);
    if (r.phase == Phase::D1Round) out << r.color;
    out << ',' << r.peer << ',' << r.bytes << ',' << r.time << '\n';
  }
  out.precision(precision);
}

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::int64_t kMessageHeader = 16;
constexpr std::int64_t kNoticeHeader = 24;
constexpr std::int64_t kWriteHeader = 24;

// Completion of one cluster as seen by one destination worker: the new
// size of the cluster and the writes that touch blocks stored there.
struct Notice {
  int origin = 0;
  int seq = 0;
  int new_size = 0;
  std::vector<BlockWrite> writes;

  std::int64_t bytes() const {
    std::int64_t b = kNoticeHeader;
    for (const BlockWrite& w : writes) b += kWriteHeader + static_cast<std::int64_t>(w.value.size()) * 8;
    return b;
  }
};

struct Message {
  int from = 0;
  int to = 0;
  Phase phase = Phase::D1Round;
  int color = -1;
  std::vector<Notice> notices;
  double send_time = 0.0;
  double arrival = 0.0;
  std::int64_t order = 0;  // send sequence, breaks arrival ties

  std::int64_t bytes() const {
    std::int64_t b = kMessageHeader;
    for (const Notice& n : notices) b += n.bytes();
    return b;
  }
};

// Read-only description of one level shared by all workers.
struct LevelContext {
  int level = 0;
  const BlockPattern* pattern = nullptr;
  BlockPattern allowed;
  const DomainDecomposition* decomposition = nullptr;
  std::vector<int> canon;  // cluster -> canonical position
  const FactorConfig* config = nullptr;

  int owner(int c) const { return decomposition->owner[c]; }
  Phase phase_of(int c) const {
    switch (decomposition->klass[c]) {
      case ClusterClass::D1: return Phase::D1Round;
      case ClusterClass::D2: return Phase::D2Round;
      case ClusterClass::D3: return Phase::D3Round;
    }
    return Phase::D3Round;
  }
};

struct TaskResult {
  double flops = 0.0;
  std::vector<std::pair<int, Notice>> outgoing;  // destination worker, notice
};

// The blocks one worker holds (rows and columns of its clusters) and the
// updates that arrived but were not yet applied.
class WorkerStore {
 public:
  WorkerStore(int id, const BlockMatrix& global, const LevelContext& ctx)
      : id_(id), ctx_(ctx), a_(global.sizes(), global.flag()),
        done_(static_cast<std::size_t>(global.num_clusters()), 0) {
    for (int i = 0; i < global.num_clusters(); ++i) {
      for (const auto& [j, b] : global.row(i)) {
        if (ctx.owner(i) == id || ctx.owner(j) == id) a_.put(i, j, b);
      }
    }
  }

  const BlockMatrix& blocks() const { return a_; }

  // Ready once every earlier cluster in the current row of s is known to
  // have finished; their updates to s arrived with the completion notice.
  bool ready(int s) const {
    const int rank = ctx_.canon[s];
    for (const auto& entry : a_.row(s)) {
      const int j = entry.first;
      if (j != s && ctx_.canon[j] < rank && !done_[j]) return false;
    }
    for (auto it = pending_.lower_bound({s, -1}); it != pending_.end() && it->first.first == s; ++it) {
      const int j = it->first.second;
      if (j != s && ctx_.canon[j] < rank && !done_[j]) return false;
    }
    return true;
  }

  void receive(const Notice& n) {
    done_[n.origin] = 1;
    a_.set_cluster_size(n.origin, n.new_size);
    for (std::size_t q = 0; q < n.writes.size(); ++q) queue(n.seq, n.writes[q]);
  }

  TaskResult execute(int s, LevelStats& stats, std::vector<int>& skipped) {
    materialize_cluster(s);
    Elimination e = low_rank_eliminate(a_, *ctx_.pattern, s, ctx_.config->policy);
    if (ctx_.config->check_fill_in) check_fill_in(e, ctx_.allowed, stats);
    stats.flops += e.flops;
    if (e.compression_skipped) skipped.push_back(s);

    TaskResult result;
    result.flops = e.flops;
    const int seq = ctx_.canon[s];
    const int new_size = e.op.passthrough ? a_.cluster_size(s) : e.op.coarse_size;
    // Every worker that holds or may later hold a block of row s hears
    // about the completion: fill-in can pair s with any cluster within
    // distance 2, possibly through an update from a third cluster.
    std::vector<int> dests;
    for (const auto& entry : a_.row(s)) dests.push_back(ctx_.owner(entry.first));
    for (int j : ctx_.allowed.rows[s]) dests.push_back(ctx_.owner(j));
    for (const BlockWrite& w : e.writes) {
      dests.push_back(ctx_.owner(w.row));
      dests.push_back(ctx_.owner(w.col));
    }
    std::sort(dests.begin(), dests.end());
    dests.erase(std::unique(dests.begin(), dests.end()), dests.end());
    for (int d : dests) {
      Notice n{s, seq, new_size, {}};
      for (const BlockWrite& w : e.writes) {
        if (ctx_.owner(w.row) == d || ctx_.owner(w.col) == d) n.writes.push_back(w);
      }
      if (d == id_) {
        receive(n);
      } else {
        result.outgoing.emplace_back(d, std::move(n));
      }
    }
    done_[s] = 1;
    a_.set_cluster_size(s, new_size);
    last_op_ = std::move(e.op);
    return result;
  }

  ClusterOperator take_op() { return std::move(last_op_); }

  void materialize_all() {
    for (auto& [key, list] : pending_) apply(list);
    pending_.clear();
  }

 private:
  struct Pending {
    int seq;
    BlockWrite write;
  };

  void queue(int seq, const BlockWrite& w) { pending_[{w.row, w.col}].push_back({seq, w}); }

  void apply(std::vector<Pending>& list) {
    std::stable_sort(list.begin(), list.end(), [](const Pending& x, const Pending& y) { return x.seq < y.seq; });
    for (const Pending& p : list) apply_write(a_, p.write);
  }

  void materialize_cluster(int s) {
    std::vector<int> partners;
    for (const auto& entry : a_.row(s)) partners.push_back(entry.first);
    for (auto it = pending_.lower_bound({s, -1}); it != pending_.end() && it->first.first == s; ++it) {
      partners.push_back(it->first.second);
    }
    partners.push_back(s);
    std::sort(partners.begin(), partners.end());
    partners.erase(std::unique(partners.begin(), partners.end()), partners.end());
    for (int j : partners) {
      for (const std::pair<int, int>& key : {std::pair{s, j}, std::pair{j, s}}) {
        auto it = pending_.find(key);
        if (it == pending_.end()) continue;
        apply(it->second);
        pending_.erase(it);
      }
    }
  }

  int id_;
  const LevelContext& ctx_;
  BlockMatrix a_;
  std::vector<char> done_;
  std::map<std::pair<int, int>, std::vector<Pending>> pending_;
  ClusterOperator last_op_;
};

// Collects the workers' rows into the global matrix for the next level.
BlockMatrix gather_rows(const std::vector<WorkerStore>& stores, const LevelContext& ctx,
                        const BlockMatrix& shape) {
  std::vector<int> sizes(static_cast<std::size_t>(shape.num_clusters()));
  for (int i = 0; i < shape.num_clusters(); ++i) sizes[i] = stores[ctx.owner(i)].blocks().cluster_size(i);
  BlockMatrix out(std::move(sizes), shape.flag());
  for (int i = 0; i < shape.num_clusters(); ++i) {
    const BlockMatrix& local = stores[ctx.owner(i)].blocks();
    for (const auto& [j, b] : local.row(i)) {
      const Matrix* ghost = stores[ctx.owner(j)].blocks().find(i, j);
      if (ghost == nullptr || ghost->rows() != b.rows() || ghost->cols() != b.cols() || *ghost != b) {
        throw Error(ErrorKind::InvalidArgument, "replicas of block (" + std::to_string(i) + "," +
                                                    std::to_string(j) + ") diverged");
      }
      out.put(i, j, b);
    }
  }
  return out;
}

enum class Schedule : std::uint8_t { Sequential, Bsp, Async };

class OwnershipPlanner : public LevelPlanner {
 public:
  OwnershipPlanner(const RuntimeOptions& options, Schedule schedule, ParallelFactor& out)
      : options_(options), schedule_(schedule), out_(out) {
    out_.log.workers = options.workers;
    out_.log.coloring = options.coloring;
    out_.log.busy.assign(static_cast<std::size_t>(options.workers), 0.0);
    out_.log.idle.assign(static_cast<std::size_t>(options.workers), 0.0);
    snapshot();
  }

  ClusterPartition partition_coarse(int level, const BlockPattern& pattern, std::span<const int> weights,
                                    std::span<const int> live, const PartitionConfig& config) override {
    const DomainDecomposition& prev = out_.levels.back();
    std::vector<int> owners(live.size());
    for (std::size_t q = 0; q < live.size(); ++q) owners[q] = prev.owner[live[q]];
    const bool gather = !gathered_ && options_.workers > 1 &&
                        static_cast<int>(live.size()) < options_.gather_factor * options_.workers;
    if (gather) {
      gathered_ = true;
      gather_sources_.assign(owners.begin(), owners.end());
      gather_weights_.assign(weights.begin(), weights.end());
      std::fill(owners.begin(), owners.end(), 0);
    } else {
      gather_sources_.clear();
    }
    ClusterPartition groups = coarse_partition(pattern, weights, config, owners);
    next_owner_.assign(static_cast<std::size_t>(groups.size()), 0);
    gather_group_.assign(live.size(), 0);
    for (int g = 0; g < groups.size(); ++g) {
      next_owner_[g] = owners[groups.clusters[g].front()];
      for (int q : groups.clusters[g]) gather_group_[q] = g;
    }
    (void)level;
    return groups;
  }

  std::vector<int> order(int level, const BlockMatrix& a, const BlockPattern& pattern) override {
    DomainDecomposition d = level == 0 ? decompose(pattern, options_.workers)
                                       : decompose(pattern, next_owner_, options_.workers);
    apply_coloring(d, color_d1(d, pattern, options_.coloring));
    if (options_.trivial_coloring) {
      for (int& c : d.color) c = c < 0 ? -1 : 0;
      d.num_colors = std::min(d.num_colors, 1);
    }
    if (!gather_sources_.empty()) log_gather(level, a);
    out_.levels.push_back(std::move(d));
    return canonical_order(out_.levels.back());
  }

  void eliminate_level(int level, BlockMatrix& a, const BlockPattern& pattern, std::span<const int> order,
                       const FactorConfig& config, FactorLevel& out, LevelStats& stats) override {
    ensure_level(level);
    if (schedule_ == Schedule::Sequential) {
      LevelPlanner::eliminate_level(level, a, pattern, order, config, out, stats);
      return;
    }
    LevelContext ctx;
    ctx.level = level;
    ctx.pattern = &pattern;
    ctx.allowed = pattern_square(pattern);
    ctx.decomposition = &out_.levels.back();
    ctx.config = &config;
    ctx.canon.assign(static_cast<std::size_t>(a.num_clusters()), 0);
    for (std::size_t q = 0; q < order.size(); ++q) ctx.canon[order[q]] = static_cast<int>(q);

    std::vector<WorkerStore> stores;
    stores.reserve(static_cast<std::size_t>(options_.workers));
    for (int w = 0; w < options_.workers; ++w) stores.emplace_back(w, a, ctx);
    std::vector<int> skipped;
    if (options_.backend == Backend::Threads && schedule_ == Schedule::Async) {
      run_threads(ctx, stores, order, out, stats, skipped);
    } else if (schedule_ == Schedule::Bsp) {
      run_bsp(ctx, stores, order, out, stats, skipped);
    } else {
      run_async(ctx, stores, order, out, stats, skipped);
    }
    std::sort(skipped.begin(), skipped.end(), [&](int x, int y) { return ctx.canon[x] < ctx.canon[y]; });
    stats.compression_skipped = std::move(skipped);
    for (WorkerStore& s : stores) s.materialize_all();
    a = gather_rows(stores, ctx, a);
  }

  void finish(const HierarchicalFactor& f) {
    // The top matrix is factored on worker 0.
    if (gathered_ || options_.workers == 1 || f.levels.empty()) return;
    const FactorLevel& last = f.levels.back();
    const DomainDecomposition& d = out_.levels.back();
    const int level = static_cast<int>(f.levels.size());
    std::vector<std::int64_t> bytes(static_cast<std::size_t>(options_.workers), 0);
    for (std::size_t c = 0; c < last.ops.size(); ++c) {
      const std::int64_t k = last.ops[c].passthrough ? last.ops[c].size : last.ops[c].coarse_size;
      bytes[d.owner[c]] += k * last.num_coarse * 8;
    }
    record_gather(level, bytes);
  }

 private:
  void ensure_level(int level) {
    CommLog& log = out_.log;
    if (static_cast<int>(log.sent_bytes.size()) <= level) log.sent_bytes.resize(level + 1, 0);
    if (static_cast<int>(log.received_bytes.size()) <= level) log.received_bytes.resize(level + 1, 0);
  }

  void log_gather(int level, const BlockMatrix& a) {
    std::vector<std::int64_t> bytes(static_cast<std::size_t>(options_.workers), 0);
    for (std::size_t q = 0; q < gather_sources_.size(); ++q) {
      if (gather_sources_[q] == 0) continue;
      std::int64_t width = 0;
      for (const auto& [j, b] : a.row(gather_group_[q])) width += b.cols();
      bytes[gather_sources_[q]] += static_cast<std::int64_t>(gather_weights_[q]) * width * 8;
    }
    gather_sources_.clear();
    record_gather(level, bytes);
  }

  void record_gather(int level, const std::vector<std::int64_t>& bytes) {
    ensure_level(level);
    CommLog& log = out_.log;
    for (int w = 1; w < options_.workers; ++w) {
      if (bytes[w] == 0) continue;
      const std::int64_t b = bytes[w] + kMessageHeader;
      log.sent.push_back({w, level, Phase::CoarseSetup, -1, 0, b, log.makespan});
      log.sent_bytes[level] += b;
      log.count_received(level, b);
    }
  }

  void send(const LevelContext& ctx, Message& m) {
    CommLog& log = out_.log;
    const std::int64_t b = m.bytes();
    m.arrival = m.send_time + options_.cost.latency + static_cast<double>(b) / options_.cost.bandwidth;
    m.order = send_count_++;
    log.sent.push_back({m.from, ctx.level, m.phase, m.color, m.to, b, m.send_time});
    log.sent_bytes[ctx.level] += b;
    if (!ctx.decomposition->reachable(m.from, m.to)) ++log.locality_violations;
  }

  void deliver(const LevelContext& ctx, WorkerStore& store, const Message& m) {
    for (const Notice& n : m.notices) store.receive(n);
    out_.log.count_received(ctx.level, m.bytes());
  }

  double cost(double flops) const { return flops / options_.cost.flop_rate; }

  void record_task(const LevelContext& ctx, int s, double seconds) {
    const Phase p = ctx.phase_of(s);
    std::string key = to_string(p);
    if (p == Phase::D1Round) key += std::to_string(ctx.decomposition->color[s]);
    out_.log.phase_time[key] += seconds;
  }

  void run_bsp(const LevelContext& ctx, std::vector<WorkerStore>& stores, std::span<const int> order,
               FactorLevel& out, LevelStats& stats, std::vector<int>& skipped) {
    const int p = options_.workers;
    const DomainDecomposition& d = *ctx.decomposition;
    // Rounds: (D1Round, color) for each color, then D2Round, then D3Round.
    std::vector<std::pair<Phase, int>> rounds;
    for (int c = 0; c < d.num_colors; ++c) rounds.emplace_back(Phase::D1Round, c);
    rounds.emplace_back(Phase::D2Round, -1);
    rounds.emplace_back(Phase::D3Round, -1);
    std::vector<double> clock(static_cast<std::size_t>(p), out_.log.makespan);
    for (const auto& [phase, color] : rounds) {
      std::vector<std::vector<Message>> outbox(static_cast<std::size_t>(p));
      bool any = false;
      for (int w = 0; w < p; ++w) {
        std::vector<Message>& box = outbox[w];
        for (int s : order) {
          if (ctx.owner(s) != w || ctx.phase_of(s) != phase) continue;
          if (phase == Phase::D1Round && d.color[s] != color) continue;
          any = true;
          if (!stores[w].ready(s)) {
            throw Error(ErrorKind::DeadlockDetected,
                        "level " + std::to_string(ctx.level) + ": cluster " + std::to_string(s) +
                            " waits on a cluster of the same round",
                        s);
          }
          TaskResult r = stores[w].execute(s, stats, skipped);
          out.ops[s] = stores[w].take_op();
          const double t = cost(r.flops);
          clock[w] += t;
          out_.log.busy[w] += t;
          record_task(ctx, s, t);
          for (auto& [dest, notice] : r.outgoing) {
            auto it = std::find_if(box.begin(), box.end(), [&](const Message& m) { return m.to == dest; });
            if (it == box.end()) {
              box.push_back({w, dest, phase, color, {}, 0.0, 0.0, 0});
              it = box.end() - 1;
            }
            it->notices.push_back(std::move(notice));
          }
        }
      }
      if (!any) continue;
      double barrier = *std::max_element(clock.begin(), clock.end());
      std::vector<Message> flight;
      for (int w = 0; w < p; ++w) {
        for (Message& m : outbox[w]) {
          m.send_time = clock[w];
          send(ctx, m);
          barrier = std::max(barrier, m.arrival);
          flight.push_back(std::move(m));
        }
      }
      for (const Message& m : flight) deliver(ctx, stores[m.to], m);
      for (int w = 0; w < p; ++w) {
        out_.log.idle[w] += barrier - clock[w];
        clock[w] = barrier;
      }
    }
    settle_idle(clock[0]);
  }

  void run_async(const LevelContext& ctx, std::vector<WorkerStore>& stores, std::span<const int> order,
                 FactorLevel& out, LevelStats& stats, std::vector<int>& skipped) {
    const int p = options_.workers;
    std::vector<std::vector<int>> todo(static_cast<std::size_t>(p));
    for (int s : order) todo[ctx.owner(s)].push_back(s);  // canonical order = priority
    std::vector<double> clock(static_cast<std::size_t>(p), out_.log.makespan);
    std::vector<std::vector<Message>> inbox(static_cast<std::size_t>(p));  // in flight, by destination
    std::size_t remaining = order.size();

    auto deliver_due = [&](int w) {
      std::vector<Message>& box = inbox[w];
      std::stable_sort(box.begin(), box.end(), [](const Message& x, const Message& y) {
        return x.arrival < y.arrival || (x.arrival == y.arrival && x.order < y.order);
      });
      std::size_t n = 0;
      while (n < box.size() && box[n].arrival <= clock[w]) deliver(ctx, stores[w], box[n++]);
      box.erase(box.begin(), box.begin() + static_cast<std::ptrdiff_t>(n));
    };
    auto first_ready = [&](int w) -> std::ptrdiff_t {
      for (std::size_t q = 0; q < todo[w].size(); ++q) {
        if (stores[w].ready(todo[w][q])) return static_cast<std::ptrdiff_t>(q);
      }
      return -1;
    };

    while (remaining > 0) {
      double best_time = std::numeric_limits<double>::infinity();
      int best_worker = -1;
      std::ptrdiff_t best_task = -1;
      for (int w = 0; w < p; ++w) {
        deliver_due(w);
        const std::ptrdiff_t q = todo[w].empty() ? -1 : first_ready(w);
        double t = std::numeric_limits<double>::infinity();
        if (q >= 0) {
          t = clock[w];
        } else if (!todo[w].empty() && !inbox[w].empty()) {
          t = inbox[w].front().arrival;
        }
        if (t < best_time) {
          best_time = t;
          best_worker = w;
          best_task = q;
        }
      }
      if (best_worker < 0) {
        throw Error(ErrorKind::DeadlockDetected,
                    "level " + std::to_string(ctx.level) + ": no worker can make progress");
      }
      const int w = best_worker;
      if (best_task < 0) {
        out_.log.idle[w] += best_time - clock[w];
        clock[w] = best_time;
        continue;
      }
      const int s = todo[w][static_cast<std::size_t>(best_task)];
      todo[w].erase(todo[w].begin() + best_task);
      --remaining;
      TaskResult r = stores[w].execute(s, stats, skipped);
      out.ops[s] = stores[w].take_op();
      const double t = cost(r.flops);
      clock[w] += t;
      out_.log.busy[w] += t;
      record_task(ctx, s, t);
      for (auto& [dest, notice] : r.outgoing) {
        Message m{w, dest, ctx.phase_of(s), ctx.decomposition->color[s], {}, clock[w], 0.0, 0};
        m.notices.push_back(std::move(notice));
        send(ctx, m);
        inbox[dest].push_back(std::move(m));
      }
    }
    double end = *std::max_element(clock.begin(), clock.end());
    for (int w = 0; w < p; ++w) {
      for (const Message& m : inbox[w]) end = std::max(end, m.arrival);
    }
    for (int w = 0; w < p; ++w) {
      clock[w] = end;
      deliver_due(w);
    }
    settle_idle(end);
  }

  // Idle time up to the end of the level for every worker.
  void settle_idle(double end) {
    CommLog& log = out_.log;
    const double start = log.makespan;
    for (int w = 0; w < options_.workers; ++w) {
      const double accounted = level_busy(w) + level_idle(w);
      log.idle[w] += std::max(0.0, (end - start) - accounted);
    }
    log.makespan = end;
    snapshot();
  }

  double level_busy(int w) const { return out_.log.busy[w] - busy_mark_[w]; }
  double level_idle(int w) const { return out_.log.idle[w] - idle_mark_[w]; }
  void snapshot() {
    busy_mark_ = out_.log.busy;
    idle_mark_ = out_.log.idle;
  }

  void run_threads(const LevelContext& ctx, std::vector<WorkerStore>& stores, std::span<const int> order,
                   FactorLevel& out, LevelStats& stats, std::vector<int>& skipped) {
    const int p = options_.workers;
    struct Mailbox {
      std::mutex mutex;
      std::condition_variable cv;
      std::deque<Message> queue;
    };
    std::vector<Mailbox> boxes(static_cast<std::size_t>(p));
    std::vector<std::vector<CommRecord>> sent(static_cast<std::size_t>(p));
    std::vector<LevelStats> local_stats(static_cast<std::size_t>(p));
    std::vector<std::vector<int>> local_skipped(static_cast<std::size_t>(p));
    std::vector<double> busy(static_cast<std::size_t>(p), 0.0);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(p));
    std::atomic<std::int64_t> progress{0};
    std::atomic<bool> abort{false};
    std::atomic<std::int64_t> received_bytes{0};
    const auto t0 = Clock::now();
    auto since = [&] { return std::chrono::duration<double>(Clock::now() - t0).count(); };

    auto body = [&](int w) {
      try {
        std::vector<int> todo;
        for (int s : order) {
          if (ctx.owner(s) == w) todo.push_back(s);
        }
        auto drain = [&](std::unique_lock<std::mutex>&) {
          while (!boxes[w].queue.empty()) {
            Message m = std::move(boxes[w].queue.front());
            boxes[w].queue.pop_front();
            for (const Notice& n : m.notices) stores[w].receive(n);
            received_bytes += m.bytes();
          }
        };
        auto last_progress = Clock::now();
        std::int64_t seen = progress.load();
        while (!todo.empty() && !abort) {
          {
            std::unique_lock lock(boxes[w].mutex);
            drain(lock);
          }
          auto it = std::find_if(todo.begin(), todo.end(), [&](int s) { return stores[w].ready(s); });
          if (it == todo.end()) {
            std::unique_lock lock(boxes[w].mutex);
            boxes[w].cv.wait_for(lock, std::chrono::milliseconds(50), [&] { return !boxes[w].queue.empty(); });
            if (progress.load() != seen) {
              seen = progress.load();
              last_progress = Clock::now();
            } else if (boxes[w].queue.empty() && Clock::now() - last_progress > std::chrono::seconds(10)) {
              abort = true;
              throw Error(ErrorKind::DeadlockDetected,
                          "level " + std::to_string(ctx.level) + ": worker " + std::to_string(w) + " starved");
            }
            continue;
          }
          const int s = *it;
          todo.erase(it);
          const auto ts = Clock::now();
          TaskResult r = stores[w].execute(s, local_stats[w], local_skipped[w]);
          out.ops[s] = stores[w].take_op();
          busy[w] += std::chrono::duration<double>(Clock::now() - ts).count();
          ++progress;
          for (auto& [dest, notice] : r.outgoing) {
            Message m{w, dest, ctx.phase_of(s), ctx.decomposition->color[s], {}, since(), 0.0, 0};
            m.notices.push_back(std::move(notice));
            sent[w].push_back({w, ctx.level, m.phase, m.color, dest, m.bytes(), m.send_time});
            {
              std::lock_guard lock(boxes[dest].mutex);
              boxes[dest].queue.push_back(std::move(m));
            }
            boxes[dest].cv.notify_one();
          }
        }
      } catch (...) {
        errors[w] = std::current_exception();
        abort = true;
      }
    };
    std::vector<std::thread> threads;
    for (int w = 0; w < p; ++w) threads.emplace_back(body, w);
    for (std::thread& t : threads) t.join();
    for (const std::exception_ptr& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    // Messages still queued (sent after the receiver finished its tasks).
    for (int w = 0; w < p; ++w) {
      for (const Message& m : boxes[w].queue) {
        for (const Notice& n : m.notices) stores[w].receive(n);
        received_bytes += m.bytes();
      }
    }
    const double end = since();
    CommLog& log = out_.log;
    for (int w = 0; w < p; ++w) {
      for (CommRecord r : sent[w]) {
        r.time += log.makespan;
        log.sent.push_back(r);
        log.sent_bytes[ctx.level] += r.bytes;
        if (!ctx.decomposition->reachable(r.worker, r.peer)) ++log.locality_violations;
      }
      stats.flops += local_stats[w].flops;
      stats.fill_in_checked += local_stats[w].fill_in_checked;
      stats.fill_in_violations += local_stats[w].fill_in_violations;
      skipped.insert(skipped.end(), local_skipped[w].begin(), local_skipped[w].end());
      log.busy[w] += busy[w];
    }
    log.count_received(ctx.level, received_bytes.load());
    settle_idle(log.makespan + end);
  }

  const RuntimeOptions& options_;
  Schedule schedule_;
  ParallelFactor& out_;
  bool gathered_ = false;
  std::vector<int> next_owner_;
  std::vector<int> gather_sources_;
  std::vector<int> gather_weights_;
  std::vector<int> gather_group_;
  std::int64_t send_count_ = 0;
  std::vector<double> busy_mark_;
  std::vector<double> idle_mark_;
};

ParallelFactor run(const CSRMatrix& a, SymmetryFlag flag, const FactorConfig& config,
                   const RuntimeOptions& options, Schedule schedule) {
  if (options.workers < 1) throw Error(ErrorKind::InvalidArgument, "runtime: need at least one worker");
  ParallelFactor out;
  OwnershipPlanner planner(options, schedule, out);
  out.factor = hierarchical_factor(a, flag, config, &planner);
  planner.finish(out.factor);
  return out;
}

}  // namespace

ParallelFactor canonical_factor(const CSRMatrix& a, SymmetryFlag flag, const FactorConfig& config,
                                const RuntimeOptions& options) {
  return run(a, flag, config, options, Schedule::Sequential);
}

ParallelFactor bsp_factor(const CSRMatrix& a, SymmetryFlag flag, const FactorConfig& config,
                          const RuntimeOptions& options) {
  return run(a, flag, config, options, Schedule::Bsp);
}

ParallelFactor async_factor(const CSRMatrix& a, SymmetryFlag flag, const FactorConfig& config,
                            const RuntimeOptions& options) {
  return run(a, flag, config, options, Schedule::Async);
}

}  // namespace hsolve
