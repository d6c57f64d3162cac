#include "treelet/color_dp.hpp"

#include <algorithm>
#include <atomic>
#include <queue>
#include <random>
#include <string>

namespace treelet {

Coloring random_coloring(std::size_t n_vertices, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw std::invalid_argument("random_coloring: k must be >= 1");
  Coloring c;
  c.k = k;
  c.seed = seed;
  c.colors.resize(n_vertices);
  for (VertexId v = 0; v < n_vertices; ++v) c.colors[v] = color_of(seed, v, k);
  return c;
}

void init_base_counts(CountTable& table, std::span<const VertexId> local_vertices, std::uint64_t color_seed,
                      std::size_t k) {
  for (std::size_t i = 0; i < local_vertices.size(); ++i) {
    auto row = table.row(i);
    std::fill(row.begin(), row.end(), 0.0);
    row[color_of(color_seed, local_vertices[i], k)] = 1.0;
  }
}

void init_base_counts(CountTable& table, std::span<const VertexId> local_vertices, const Coloring& coloring) {
  for (std::size_t i = 0; i < local_vertices.size(); ++i) {
    auto row = table.row(i);
    std::fill(row.begin(), row.end(), 0.0);
    row[coloring(local_vertices[i])] = 1.0;
  }
}

void apply_over_count(CountTable& table, std::uint32_t d) {
  if (d <= 1) return;
  const Count inv = static_cast<Count>(d);
  for (std::size_t i = 0; i < table.rows(); ++i)
    for (auto& x : table.row(i)) x /= inv;
}

RemoteRows::RemoteRows(WorkerId sender, std::size_t entry, std::size_t width, std::vector<VertexId> expected)
    : RemoteRows(sender, entry, width, std::make_shared<const std::vector<VertexId>>(std::move(expected))) {}

RemoteRows::RemoteRows(WorkerId sender, std::size_t entry, std::size_t width,
                       std::shared_ptr<const std::vector<VertexId>> expected)
    : sender_(sender), entry_(entry), width_(width), expected_(std::move(expected)) {}

std::span<Count> RemoteRows::insert(VertexId v) {
  const auto& exp = *expected_;
  if (!std::binary_search(exp.begin(), exp.end(), v))
    throw ProtocolError("worker " + std::to_string(sender_) + " sent unrequested row for vertex " + std::to_string(v) +
                        " (sub-template " + std::to_string(entry_) + ")");
  const auto row = static_cast<std::uint32_t>(vertices_.size());
  // senders walk the list in order, so this is almost always an append
  auto it = index_.end();
  if (!index_.empty() && index_.back().first >= v)
    it = std::lower_bound(index_.begin(), index_.end(), std::pair{v, std::uint32_t{0}});
  if (it != index_.end() && it->first == v)
    throw ProtocolError("worker " + std::to_string(sender_) + " sent vertex " + std::to_string(v) + " twice");
  index_.insert(it, {v, row});
  vertices_.push_back(v);
  data_.resize(data_.size() + width_, 0.0);
  return {data_.data() + std::size_t{row} * width_, width_};
}

std::span<const Count> RemoteRows::row(VertexId v, WorkerId receiver) const {
  auto it = std::lower_bound(index_.begin(), index_.end(), std::pair{v, std::uint32_t{0}});
  if (it != index_.end() && it->first == v) return {data_.data() + std::size_t{it->second} * width_, width_};
  const auto& exp = *expected_;
  if (!std::binary_search(exp.begin(), exp.end(), v))
    throw ProtocolError("worker " + std::to_string(receiver) + " has no row for remote vertex " + std::to_string(v) +
                        " of sub-template " + std::to_string(entry_) + " from worker " + std::to_string(sender_));
  return {};
}

TaskQueue build_task_queue(std::span<const std::uint32_t> list_lengths, std::size_t s, std::uint64_t seed) {
  if (s == 0) throw std::invalid_argument("build_task_queue: task size must be >= 1");
  TaskQueue q;
  q.max_task_size = s;
  for (std::uint32_t v = 0; v < list_lengths.size(); ++v) {
    const std::uint32_t n = list_lengths[v];
    if (n == 0) continue;  // nothing to add
    if (n < s) {
      q.tasks.push_back({v, 0, n, 0, false});
      continue;
    }
    const bool shared = n > s;
    for (std::uint32_t pos = 0; pos < n;) {
      const auto l = static_cast<std::uint32_t>(std::min<std::size_t>(n - pos, s));
      q.tasks.push_back({v, pos, pos + l, 0, shared});
      pos += l;
    }
  }
  std::mt19937_64 rng(seed);
  std::shuffle(q.tasks.begin(), q.tasks.end(), rng);
  return q;
}

TaskQueue build_vertex_queue(std::span<const std::uint32_t> list_lengths) {
  TaskQueue q;
  q.max_task_size = 0;
  q.tasks.reserve(list_lengths.size());
  for (std::uint32_t v = 0; v < list_lengths.size(); ++v) {
    q.tasks.push_back({v, 0, list_lengths[v], 0, false});
    q.max_task_size = std::max<std::size_t>(q.max_task_size, list_lengths[v]);
  }
  return q;
}

double simulated_makespan(std::span<const double> costs, std::size_t lanes, Schedule schedule) {
  if (lanes == 0) throw std::invalid_argument("simulated_makespan: lanes must be >= 1");
  if (schedule == Schedule::static_blocks) {
    double worst = 0.0;
    for (std::size_t l = 0; l < lanes; ++l) {
      const std::size_t lo = costs.size() * l / lanes, hi = costs.size() * (l + 1) / lanes;
      double sum = 0.0;
      for (std::size_t i = lo; i < hi; ++i) sum += costs[i];
      worst = std::max(worst, sum);
    }
    return worst;
  }
  // min-heap of lane finish times
  std::priority_queue<double, std::vector<double>, std::greater<>> free_at;
  for (std::size_t l = 0; l < lanes; ++l) free_at.push(0.0);
  double end = 0.0;
  for (double c : costs) {
    const double t = free_at.top() + c;
    free_at.pop();
    free_at.push(t);
    end = std::max(end, t);
  }
  return end;
}

void mark_shared(TaskQueue& q, std::size_t n_vertices) {
  std::vector<std::uint32_t> per_vertex(n_vertices, 0);
  for (const auto& t : q.tasks) ++per_vertex[t.vertex];
  for (auto& t : q.tasks) t.shared = per_vertex[t.vertex] > 1;
}

void commit_row(std::span<Count> out_row, std::span<const Count> acc, bool atomic) noexcept {
  if (!atomic) {
    for (std::size_t i = 0; i < acc.size(); ++i) out_row[i] += acc[i];
    return;
  }
  for (std::size_t i = 0; i < acc.size(); ++i)
    if (acc[i] != 0.0) std::atomic_ref<Count>(out_row[i]).fetch_add(acc[i], std::memory_order_relaxed);
}

namespace {

std::span<Count> scratch(std::size_t width) {
  thread_local std::vector<Count> buf;
  buf.assign(width, 0.0);
  return buf;
}

bool all_zero(std::span<const Count> row) {
  return std::all_of(row.begin(), row.end(), [](Count x) { return x == 0.0; });
}

}  // namespace

void update_counts_local(const SplitTable& splits, const CountTable& active, const CountTable& passive,
                         std::span<const std::uint32_t> local_index, std::span<const VertexId> neighbors,
                         const Task& task, CountTable& out) {
  if (task.size() == 0) return;
  const auto active_row = active.row(task.vertex);
  if (all_zero(active_row)) return;
  auto acc = scratch(out.width());
  for (auto u : neighbors.subspan(task.begin, task.size()))
    accumulate_pair(splits, active_row, passive.row(local_index[u]), acc);
  commit_row(out.row(task.vertex), acc, task.shared);
}

void update_counts_remote(const SplitTable& splits, const CountTable& active, const RemoteRows& received,
                          WorkerId receiver, std::span<const VertexId> neighbors, const Task& task, CountTable& out) {
  if (task.size() == 0) return;
  const auto active_row = active.row(task.vertex);
  if (all_zero(active_row)) {
    // Still validate the lookups so protocol faults surface regardless of the coloring.
    for (auto u : neighbors.subspan(task.begin, task.size())) (void)received.row(u, receiver);
    return;
  }
  auto acc = scratch(out.width());
  bool any = false;
  for (auto u : neighbors.subspan(task.begin, task.size())) {
    const auto prow = received.row(u, receiver);
    if (prow.empty()) continue;
    accumulate_pair(splits, active_row, prow, acc);
    any = true;
  }
  if (any) commit_row(out.row(task.vertex), acc, task.shared);
}

Count colorful_partial_sum(const CountTable& full_table) {
  Count sum = 0.0;
  for (std::size_t i = 0; i < full_table.rows(); ++i) sum += full_table.row(i)[0];
  return sum;
}

}  // namespace treelet
