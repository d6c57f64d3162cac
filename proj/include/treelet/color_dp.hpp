#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "treelet/common.hpp"
#include "treelet/graph.hpp"
#include "treelet/lanes.hpp"
#include "treelet/subset.hpp"

namespace treelet {

using Color = std::uint32_t;

/// col(v) = mix64(seed, v) mod k, so any worker can derive any vertex's color.
inline Color color_of(std::uint64_t seed, VertexId v, std::size_t k) noexcept {
  return static_cast<Color>(mix64(seed, v) % k);
}

struct Coloring {
  std::size_t k = 1;
  std::uint64_t seed = 0;
  std::vector<Color> colors;

  Color operator()(VertexId v) const { return colors[v]; }
};

Coloring random_coloring(std::size_t n_vertices, std::size_t k, std::uint64_t seed);

/// Dense per-vertex rows of C(k, |T_i|) counts for one sub-template on one worker.
class CountTable {
 public:
  CountTable() = default;
  CountTable(std::size_t entry, std::size_t rows, std::size_t width)
      : entry_(entry), rows_(rows), width_(width), data_(rows * width, 0.0) {}

  std::size_t entry() const noexcept { return entry_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t bytes() const noexcept { return data_.size() * sizeof(Count); }

  std::span<Count> row(std::size_t i) noexcept { return {data_.data() + i * width_, width_}; }
  std::span<const Count> row(std::size_t i) const noexcept { return {data_.data() + i * width_, width_}; }
  std::span<const Count> data() const noexcept { return data_; }

 private:
  std::size_t entry_ = 0;
  std::size_t rows_ = 0;
  std::size_t width_ = 0;
  std::vector<Count> data_;
};

/// Size-1 base case: row(i)[{col(local_vertices[i])}] = 1. The rank of a singleton {c} is c.
void init_base_counts(CountTable& table, std::span<const VertexId> local_vertices, std::uint64_t color_seed,
                      std::size_t k);
void init_base_counts(CountTable& table, std::span<const VertexId> local_vertices, const Coloring& coloring);

/// Divides every entry by the over-count factor once accumulation is complete.
void apply_over_count(CountTable& table, std::uint32_t d);

/// Rows received from one peer for one passive child. Rows that were all zero are
/// elided on the wire; they are still "expected" and read back as empty spans.
class RemoteRows {
 public:
  RemoteRows() = default;
  RemoteRows(WorkerId sender, std::size_t entry, std::size_t width, std::vector<VertexId> expected);
  /// Several buffers (one per chunk) can share one expected list.
  RemoteRows(WorkerId sender, std::size_t entry, std::size_t width,
             std::shared_ptr<const std::vector<VertexId>> expected);

  WorkerId sender() const noexcept { return sender_; }
  std::size_t entry() const noexcept { return entry_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t received_rows() const noexcept { return vertices_.size(); }
  // row data, arrival list and the sorted lookup index
  std::size_t bytes() const noexcept {
    return data_.size() * sizeof(Count) + vertices_.size() * sizeof(VertexId) +
           index_.size() * sizeof(std::pair<VertexId, std::uint32_t>);
  }
  const std::vector<VertexId>& expected() const noexcept { return *expected_; }
  /// Vertices whose rows arrived, in arrival order.
  const std::vector<VertexId>& received_vertices() const noexcept { return vertices_; }

  /// Stores a decoded row; throws ProtocolError for vertices outside the expected set.
  std::span<Count> insert(VertexId v);

  /// Row for v, empty when v's row was elided. Throws ProtocolError when v was not expected.
  std::span<const Count> row(VertexId v, WorkerId receiver) const;

 private:
  WorkerId sender_ = 0;
  std::size_t entry_ = 0;
  std::size_t width_ = 0;
  std::shared_ptr<const std::vector<VertexId>> expected_ = std::make_shared<const std::vector<VertexId>>();
  std::vector<std::pair<VertexId, std::uint32_t>> index_;  // (vertex, row), sorted by vertex
  std::vector<VertexId> vertices_;
  std::vector<Count> data_;
};

/// A slice [begin, end) of one local vertex's relevant neighbour list.
struct Task {
  std::uint32_t vertex = 0;  // local index
  std::uint32_t begin = 0;
  std::uint32_t end = 0;
  std::uint32_t group = 0;  // neighbour group (owner step) the slice belongs to
  bool shared = false;      // vertex has several tasks in the phase; its row needs atomic adds

  std::uint32_t size() const noexcept { return end - begin; }
};

struct TaskQueue {
  std::size_t max_task_size = 0;
  std::vector<Task> tasks;
};

/// Neighbour-list partitioning: lists shorter than s become one task, longer lists are cut
/// into consecutive slices of at most s, empty lists give none. The queue is then shuffled with `seed`.
TaskQueue build_task_queue(std::span<const std::uint32_t> list_lengths, std::size_t s, std::uint64_t seed);

/// One task per vertex in vertex order (no splitting, no shuffle).
TaskQueue build_vertex_queue(std::span<const std::uint32_t> list_lengths);

/// Recomputes Task::shared after queues have been concatenated.
void mark_shared(TaskQueue& q, std::size_t n_vertices);

enum class Schedule {
  dynamic_claim,  // lanes claim tasks through a shared index
  static_blocks   // lane l runs the l-th contiguous block of tasks
};

struct LaneTiming {
  double makespan = 0.0;  // max over lanes of thread CPU seconds
  double total = 0.0;     // sum over lanes
  double wall = 0.0;      // start of the phase to the last lane finishing
  double simulated = 0.0; // makespan of the same schedule replayed on simulate() lanes, from per-task CPU times
};

/// Replays measured task costs on `lanes` lanes: dynamic claim hands each task, in queue
/// order, to the lane that frees up first; static blocks sum each contiguous block.
double simulated_makespan(std::span<const double> costs, std::size_t lanes, Schedule schedule);

/// One task phase on a lane pool, split into start() and wait() so the calling
/// thread can do other work (communication) while lanes compute.
class TaskRun {
 public:
  /// Time every task and report a simulated makespan on `lanes` lanes (0: off).
  void simulate(std::size_t lanes) { sim_lanes_ = lanes; }

  template <class Fn>
  void start(LanePool& pool, std::span<const Task> tasks, Schedule schedule, Fn fn) {
    const std::size_t lanes = pool.size();
    busy_.assign(lanes, 0.0);
    end_.assign(lanes, 0.0);
    next_.store(0, std::memory_order_relaxed);
    schedule_ = schedule;
    costs_.assign(sim_lanes_ ? tasks.size() : 0, 0.0);
    t0_ = std::chrono::steady_clock::now();
    pool.start([this, tasks, schedule, lanes, fn](std::size_t lane) {
      const double c0 = thread_cpu_seconds();
      auto one = [&](std::size_t i) {
        if (sim_lanes_ == 0) return fn(tasks[i], lane);
        const double s0 = thread_cpu_seconds();
        fn(tasks[i], lane);
        costs_[i] = thread_cpu_seconds() - s0;
      };
      if (schedule == Schedule::dynamic_claim) {
        for (std::size_t i = next_.fetch_add(1, std::memory_order_relaxed); i < tasks.size();
             i = next_.fetch_add(1, std::memory_order_relaxed))
          one(i);
      } else {
        const std::size_t lo = tasks.size() * lane / lanes, hi = tasks.size() * (lane + 1) / lanes;
        for (std::size_t i = lo; i < hi; ++i) one(i);
      }
      busy_[lane] = thread_cpu_seconds() - c0;
      end_[lane] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    });
  }

  LaneTiming wait(LanePool& pool) {
    pool.wait();
    LaneTiming t;
    for (std::size_t l = 0; l < busy_.size(); ++l) {
      t.makespan = std::max(t.makespan, busy_[l]);
      t.total += busy_[l];
      t.wall = std::max(t.wall, end_[l]);
    }
    if (sim_lanes_) t.simulated = simulated_makespan(costs_, sim_lanes_, schedule_);
    return t;
  }

 private:
  std::size_t sim_lanes_ = 0;
  Schedule schedule_ = Schedule::dynamic_claim;
  std::vector<double> costs_;
  std::vector<double> busy_, end_;
  std::atomic<std::size_t> next_{0};
  std::chrono::steady_clock::time_point t0_;
};

/// Runs fn(task, lane) for every task on the pool.
template <class Fn>
LaneTiming execute_tasks(LanePool& pool, std::span<const Task> tasks, Schedule schedule, Fn&& fn) {
  TaskRun run;
  run.start(pool, tasks, schedule, std::ref(fn));
  return run.wait(pool);
}

/// acc[S] += sum over splits (S1, S2) of active_row[S1] * passive_row[S2].
inline void accumulate_pair(const SplitTable& splits, std::span<const Count> active_row,
                            std::span<const Count> passive_row, std::span<Count> acc) noexcept {
  const std::size_t per_row = splits.row_length();
  const SplitPair* p = splits.all().data();
  for (std::size_t r = 0; r < splits.rows(); ++r) {
    Count sum = 0.0;
    for (std::size_t j = 0; j < per_row; ++j, ++p) sum += active_row[p->active] * passive_row[p->passive];
    acc[r] += sum;
  }
}

/// Adds a finished task accumulator into the output row.
void commit_row(std::span<Count> out_row, std::span<const Count> acc, bool atomic) noexcept;

/// Accumulates sum over u in `neighbors` of the split products of C(v, T') and C(u, T'')
/// into `out`'s row for the task's vertex. Passive rows come from the local table through
/// `local_index` (global id -> local row).
void update_counts_local(const SplitTable& splits, const CountTable& active, const CountTable& passive,
                         std::span<const std::uint32_t> local_index, std::span<const VertexId> neighbors,
                         const Task& task, CountTable& out);

/// Same accumulation with passive rows taken from a received buffer.
void update_counts_remote(const SplitTable& splits, const CountTable& active, const RemoteRows& received,
                          WorkerId receiver, std::span<const VertexId> neighbors, const Task& task, CountTable& out);

/// Sum over local rows of the full-color-set entry (rank 0 of the single size-k subset).
Count colorful_partial_sum(const CountTable& full_table);

/// Partial sum divided by the root orbit size: colorful copies of the template.
inline Count colorful_total(const CountTable& full_table, std::uint32_t root_orbit) {
  return colorful_partial_sum(full_table) / static_cast<Count>(root_orbit);
}

}  // namespace treelet
