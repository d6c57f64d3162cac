#include "treelet/engine.hpp"

#include <algorithm>
#include <mutex>
#include <random>
#include <string>
#include <thread>

namespace treelet {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string where(WorkerId rank, std::size_t entry, std::size_t stage) {
  return "worker " + std::to_string(rank) + ", sub-template " + std::to_string(entry) + ", stage " +
         std::to_string(stage);
}

}  // namespace

WorkerEngine::WorkerEngine(const Graph& g, const Partition& part, const ExchangePlan& xplan, const TemplatePlan& plan,
                           WorkerId rank, Transport* transport, EngineConfig config)
    : g_(g),
      part_(part),
      xplan_(xplan),
      plan_(plan),
      rank_(rank),
      P_(part.num_workers),
      transport_(transport),
      cfg_(config),
      pool_(config.lanes),
      schedule_(config.load_balance ? Schedule::dynamic_claim : Schedule::static_blocks) {
  if (P_ > 1 && !transport_) throw std::invalid_argument("multi-worker engine needs a transport");
  if (P_ > 1 && (transport_->size() != P_ || transport_->rank() != rank_))
    throw std::invalid_argument("transport does not match the partition");
  if (P_ >= kMaxMetaWorkers) throw std::invalid_argument("at most 4095 workers");

  local_ = part.local_vertices.at(rank);
  local_index_.assign(g.num_vertices(), 0);
  for (std::uint32_t i = 0; i < local_.size(); ++i) local_index_[local_[i]] = i;

  // Neighbour lists regrouped as [local | owner p-1 | owner p-2 | ...] so ring step w
  // reads one contiguous slice.
  group_off_.assign(local_.size() * (P_ + 1), 0);
  std::vector<std::size_t> fill(P_);
  for (std::uint32_t i = 0; i < local_.size(); ++i) {
    const auto nb = g.neighbors(local_[i]);
    const std::size_t base = static_cast<std::size_t>(i) * (P_ + 1);
    std::fill(fill.begin(), fill.end(), 0);
    for (auto u : nb) ++fill[(rank_ + P_ - part.owner[u]) % P_];
    group_off_[base] = nbr_.size();
    for (std::size_t w = 0; w < P_; ++w) group_off_[base + w + 1] = group_off_[base + w] + fill[w];
    nbr_.resize(nbr_.size() + nb.size());
    for (std::size_t w = 0; w < P_; ++w) fill[w] = group_off_[base + w];
    for (auto u : nb) nbr_[fill[(rank_ + P_ - part.owner[u]) % P_]++] = u;
  }

  auto lengths = [&](std::size_t w) {
    std::vector<std::uint32_t> len(local_.size());
    for (std::uint32_t i = 0; i < local_.size(); ++i) len[i] = static_cast<std::uint32_t>(group(i, w).size());
    return len;
  };
  auto queue_for = [&](std::size_t w) {
    const auto len = lengths(w);
    TaskQueue q = cfg_.load_balance ? build_task_queue(len, cfg_.task_size, mix64(cfg_.task_seed, w * P_ + rank_))
                                    : build_vertex_queue(len);
    for (auto& t : q.tasks) t.group = static_cast<std::uint32_t>(w);
    return q;
  };
  local_queue_ = queue_for(0);

  if (P_ > 1) {
    if (cfg_.load_balance) {
      for (std::size_t w = 1; w < P_; ++w) {
        const auto q = queue_for(w);
        naive_queue_.tasks.insert(naive_queue_.tasks.end(), q.tasks.begin(), q.tasks.end());
      }
      naive_queue_.max_task_size = cfg_.task_size;
      std::mt19937_64 rng(mix64(cfg_.task_seed, 0xa11 + rank_));
      std::shuffle(naive_queue_.tasks.begin(), naive_queue_.tasks.end(), rng);
    } else {
      for (std::uint32_t i = 0; i < local_.size(); ++i)
        for (std::size_t w = 1; w < P_; ++w) {
          const auto n = static_cast<std::uint32_t>(group(i, w).size());
          naive_queue_.tasks.push_back({i, 0, n, static_cast<std::uint32_t>(w), false});
          naive_queue_.max_task_size = std::max<std::size_t>(naive_queue_.max_task_size, n);
        }
    }
    mark_shared(naive_queue_, local_.size());

    rev_off_.resize(P_);
    rev_local_.resize(P_);
    touch_count_.assign(local_.size(), 0);
    for (std::size_t w = 1; w < P_; ++w) {
      const auto& list = xplan_.rows(static_cast<WorkerId>((rank_ + P_ - w) % P_), rank_);
      auto slot = [&](VertexId u) {
        return static_cast<std::size_t>(std::lower_bound(list.begin(), list.end(), u) - list.begin());
      };
      auto& off = rev_off_[w];
      off.assign(list.size() + 1, 0);
      for (std::uint32_t i = 0; i < local_.size(); ++i)
        for (auto u : group(i, w)) ++off[slot(u) + 1];
      for (std::size_t j = 0; j < list.size(); ++j) off[j + 1] += off[j];
      auto& dst = rev_local_[w];
      dst.resize(off.back());
      auto cursor = off;
      for (std::uint32_t i = 0; i < local_.size(); ++i)
        for (auto u : group(i, w)) dst[cursor[slot(u)]++] = i;
    }
  }

  modes_ = resolve_modes(cfg_.policy, plan_);
  const std::size_t k = plan_.template_size();
  splits_.resize(plan_.entries().size());
  tables_.resize(plan_.entries().size());
  for (std::size_t i = 0; i < plan_.entries().size(); ++i) {
    const auto& e = plan_.entry(i);
    if (!e.is_leaf()) splits_[i].emplace(k, e.size, plan_.entry(e.active).size);
  }
  reset_metrics();
}

void WorkerEngine::reset_metrics() {
  metrics_ = WorkerMetrics{};
  metrics_.rank = rank_;
  metrics_.local_vertices = local_.size();
}

std::size_t WorkerEngine::remote_neighbor_entries(std::size_t w) const {
  std::size_t n = 0;
  for (std::uint32_t i = 0; i < local_.size(); ++i) n += group(i, w).size();
  return n;
}

void WorkerEngine::account(const LaneTiming& t) {
  metrics_.lane_makespan_cpu += t.makespan;
  metrics_.lane_total_cpu += t.total;
  metrics_.simulated_makespan += t.simulated;
}

void WorkerEngine::free_table(std::size_t idx) {
  if (!tables_[idx]) return;
  metrics_.memory.free_table(tables_[idx]->bytes());
  tables_[idx].reset();
}

Count WorkerEngine::colorful_partial(std::uint64_t color_seed) {
  const auto t0 = Clock::now();
  ++metrics_.colorings;
  metrics_.steps.clear();
  const auto& order = plan_.evaluation_order();
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    compute_entry(pos, order[pos], color_seed);
    for (std::size_t j = 1; j < tables_.size(); ++j)
      if (plan_.last_use(j) == pos) free_table(j);
  }
  const Count partial = colorful_partial_sum(*tables_[0]);
  free_table(0);
  metrics_.total_seconds += since(t0);
  return partial;
}

void WorkerEngine::compute_entry(std::size_t pos, std::size_t idx, std::uint64_t color_seed) {
  (void)pos;
  const auto& e = plan_.entry(idx);
  const std::size_t k = plan_.template_size();
  CountTable out(idx, local_.size(), binomial(k, e.size));
  metrics_.memory.add_table(out.bytes());
  metrics_.memory.note_table(out.bytes());

  if (e.is_leaf()) {
    const auto t0 = Clock::now();
    init_base_counts(out, local_, color_seed, k);
    metrics_.coloring_seconds += since(t0);
    tables_[idx] = std::move(out);
    return;
  }

  const auto& splits = *splits_[idx];
  const auto& active = *tables_[e.active];
  const auto& passive = *tables_[e.passive];

  TaskRun run;
  run.simulate(cfg_.simulated_lanes);
  run.start(pool_, local_queue_.tasks, schedule_, [&](const Task& task, std::size_t) {
    update_counts_local(splits, active, passive, local_index_, group(task.vertex, 0), task, out);
  });
  const auto timing = run.wait(pool_);
  metrics_.local_compute_seconds += timing.wall;
  account(timing);

  if (P_ > 1) {
    if (modes_[idx] == ExchangeMode::pipeline)
      remote_pipeline(idx, splits, active, out);
    else
      remote_alltoall(idx, splits, active, out);
  }

  apply_over_count(out, e.over_count);
  tables_[idx] = std::move(out);
}

WorkerEngine::Outbox WorkerEngine::open_outbox(std::size_t passive, WorkerId to) const {
  Outbox box;
  box.to = to;
  box.table = &*tables_[passive];
  box.list = &xplan_.rows(rank_, to);
  std::size_t total = 0;
  for (auto v : *box.list) {
    const auto row = box.table->row(local_index_[v]);
    if (!row_is_zero(row)) total += encoded_row_size(row);
  }
  // At most kMaxMetaOffset - 1 data chunks, so the closing empty frame still fits the offset field.
  box.target = std::max<std::size_t>({cfg_.chunk_bytes, 1, (total + kMaxMetaOffset - 2) / (kMaxMetaOffset - 1)});
  return box;
}

void WorkerEngine::send_chunk(Outbox& box, StepRecord& rec) {
  Frame frame;
  const auto& list = *box.list;
  while (box.next < list.size() && frame.payload.size() < box.target) {
    const VertexId v = list[box.next++];
    const auto row = box.table->row(local_index_[v]);
    if (row_is_zero(row)) continue;
    encode_row(frame.payload, v, row);
    ++rec.rows_sent;
  }
  // An empty frame closes the message.
  if (frame.payload.empty()) box.closed = true;
  frame.meta = encode_meta(rank_, box.to, box.offset++);
  const std::size_t n = frame.payload.size();
  metrics_.memory.add_send(n);
  rec.bytes_sent += n;
  transport_->send(box.to, std::move(frame));
  metrics_.memory.free_send(n);
}

bool WorkerEngine::receive_chunk(WorkerId from, std::size_t stage, std::uint32_t expect, RemoteRows& into,
                                 StepRecord& rec) {
  std::optional<Frame> frame;
  try {
    frame = transport_->recv(from, cfg_.recv_timeout);
  } catch (const TransportError& e) {
    throw TransportError(where(rank_, into.entry(), stage) + ": " + e.what());
  }
  if (!frame)
    throw ProtocolError(where(rank_, into.entry(), stage) + ": missing packet from worker " + std::to_string(from) +
                        " (chunk " + std::to_string(expect) + ")");
  const auto meta = decode_meta(frame->meta);
  if (meta.sender != from || meta.receiver != rank_ || meta.offset != expect)
    throw ProtocolError(where(rank_, into.entry(), stage) + ": expected chunk " + std::to_string(expect) +
                        " from worker " + std::to_string(from) + ", got meta (" + std::to_string(meta.sender) + ", " +
                        std::to_string(meta.receiver) + ", " + std::to_string(meta.offset) + ")");
  if (frame->payload.empty()) return false;
  const std::size_t before = into.bytes();
  rec.bytes_received += frame->payload.size();
  rec.rows_received += decode_rows(frame->payload, into);
  metrics_.memory.add_recv(into.bytes() - before);
  return true;
}

void WorkerEngine::index_chunk(std::size_t w, std::size_t c, Chunk& chunk) {
  const auto& list = chunk.rows.expected();
  const auto& off = rev_off_[w];
  const auto& adj = rev_local_[w];
  auto& cnt = touch_count_;
  std::vector<std::size_t> slots;
  slots.reserve(chunk.rows.received_vertices().size());
  for (auto u : chunk.rows.received_vertices()) {
    const auto j = static_cast<std::size_t>(std::lower_bound(list.begin(), list.end(), u) - list.begin());
    slots.push_back(j);
    for (std::size_t x = off[j]; x < off[j + 1]; ++x)
      if (cnt[adj[x]]++ == 0) chunk.touched.push_back(adj[x]);
  }
  std::sort(chunk.touched.begin(), chunk.touched.end());
  chunk.off.assign(chunk.touched.size() + 1, 0);
  std::vector<std::uint32_t> lengths(chunk.touched.size());
  for (std::size_t t = 0; t < chunk.touched.size(); ++t) {
    lengths[t] = cnt[chunk.touched[t]];
    chunk.off[t + 1] = chunk.off[t] + lengths[t];
    cnt[chunk.touched[t]] = chunk.off[t];  // now a fill cursor
  }
  chunk.nbrs.resize(chunk.off.back());
  const auto& got = chunk.rows.received_vertices();
  for (std::size_t r = 0; r < got.size(); ++r)
    for (std::size_t x = off[slots[r]]; x < off[slots[r] + 1]; ++x) chunk.nbrs[cnt[adj[x]]++] = got[r];
  for (auto v : chunk.touched) cnt[v] = 0;

  chunk.queue = cfg_.load_balance
                    ? build_task_queue(lengths, cfg_.task_size, mix64(cfg_.task_seed, mix64(w * P_ + rank_, c)))
                    : build_vertex_queue(lengths);
  for (auto& t : chunk.queue.tasks) t.group = static_cast<std::uint32_t>(w);
}

void WorkerEngine::remote_alltoall(std::size_t idx, const SplitTable& splits, const CountTable& active,
                                   CountTable& out) {
  const auto& e = plan_.entry(idx);
  const auto ring = ring_schedule(P_);
  const std::size_t width = binomial(plan_.template_size(), plan_.entry(e.passive).size);
  StepRecord rec;
  rec.entry = idx;
  rec.mode = ExchangeMode::alltoall;

  const auto t0 = Clock::now();
  for (std::size_t w = 1; w < P_; ++w) {
    auto box = open_outbox(e.passive, ring.step(w, rank_).send_to);
    while (!box.closed) send_chunk(box, rec);
  }
  std::vector<RemoteRows> received(P_);
  for (std::size_t w = 1; w < P_; ++w) {
    const WorkerId from = ring.step(w, rank_).recv_from;
    received[w] = RemoteRows(from, e.passive, width, xplan_.rows(from, rank_));
    metrics_.memory.add_recv(received[w].bytes());
    for (std::uint32_t c = 0; receive_chunk(from, 0, c, received[w], rec); ++c) ++rec.chunks_received;
    rec.remote_neighbor_reads += remote_neighbor_entries(w);
  }
  rec.comm_seconds = since(t0);
  for (const auto& r : received) rec.payload_bytes += r.bytes();
  rec.recv_buffer_bytes = rec.payload_bytes;

  TaskRun run;
  run.simulate(cfg_.simulated_lanes);
  run.start(pool_, naive_queue_.tasks, schedule_, [&](const Task& task, std::size_t) {
    update_counts_remote(splits, active, received[task.group], rank_, group(task.vertex, task.group), task, out);
  });
  const auto timing = run.wait(pool_);
  account(timing);
  rec.compute_seconds = timing.wall;

  metrics_.memory.free_recv(rec.payload_bytes);
  metrics_.comm_seconds += rec.comm_seconds;
  metrics_.remote_compute_seconds += rec.compute_seconds;
  metrics_.rows_sent += rec.rows_sent;
  metrics_.rows_received += rec.rows_received;
  metrics_.bytes_sent += rec.bytes_sent;
  metrics_.bytes_received += rec.bytes_received;
  metrics_.steps.push_back(rec);
}

void WorkerEngine::remote_pipeline(std::size_t idx, const SplitTable& splits, const CountTable& active,
                                   CountTable& out) {
  const auto& e = plan_.entry(idx);
  const auto ring = ring_schedule(P_);
  const std::size_t width = binomial(plan_.template_size(), plan_.entry(e.passive).size);

  for (std::size_t w = 1; w <= ring.steps(); ++w) {
    const auto link = ring.step(w, rank_);
    StepRecord rec;
    rec.entry = idx;
    rec.step = w;
    rec.mode = ExchangeMode::pipeline;
    rec.remote_neighbor_reads = remote_neighbor_entries(w);
    const auto& list = xplan_.rows(link.recv_from, rank_);
    const auto shared_list = std::make_shared<const std::vector<VertexId>>(list);

    auto box = open_outbox(e.passive, link.send_to);
    bool inbox_open = true;
    std::uint32_t expect = 0;
    std::size_t held = 0;
    std::vector<char> seen(list.size(), 0);

    // Moves the next outgoing frame and the next incoming chunk.
    auto transfer = [&]() -> std::optional<Chunk> {
      const auto t0 = Clock::now();
      std::optional<Chunk> got;
      if (!box.closed) send_chunk(box, rec);
      if (inbox_open) {
        Chunk c{RemoteRows(link.recv_from, e.passive, width, shared_list), {}, {}, {}, {}};
        metrics_.memory.add_recv(c.rows.bytes());
        if (receive_chunk(link.recv_from, w, expect, c.rows, rec)) {
          for (auto v : c.rows.received_vertices()) {
            auto& s = seen[static_cast<std::size_t>(std::lower_bound(list.begin(), list.end(), v) - list.begin())];
            if (s) throw ProtocolError("worker " + std::to_string(link.recv_from) + " sent vertex " + std::to_string(v) + " twice");
            s = 1;
          }
          index_chunk(w, expect, c);
          held += c.rows.bytes();
          rec.payload_bytes += c.rows.bytes();
          rec.recv_buffer_bytes = std::max(rec.recv_buffer_bytes, held);
          ++rec.chunks_received;
          got = std::move(c);
        } else {
          metrics_.memory.free_recv(c.rows.bytes());
          inbox_open = false;
        }
        ++expect;
      }
      rec.comm_seconds += since(t0);
      return got;
    };

    double overlapped = 0.0;
    std::optional<Chunk> pending = transfer();  // cold start
    while (pending || inbox_open || !box.closed) {
      if (!pending) {
        pending = transfer();
        continue;
      }
      Chunk cur = std::move(*pending);
      pending.reset();
      TaskRun run;
      run.simulate(cfg_.simulated_lanes);
      run.start(pool_, cur.queue.tasks, schedule_, [&](const Task& task, std::size_t) {
        Task t = task;
        t.vertex = cur.touched[task.vertex];
        const std::span<const VertexId> nb(cur.nbrs.data() + cur.off[task.vertex], cur.off[task.vertex + 1] - cur.off[task.vertex]);
        update_counts_remote(splits, active, cur.rows, rank_, nb, t, out);
      });
      double comm = 0.0;
      std::exception_ptr comm_error;
      if (inbox_open || !box.closed) {
        const double before = rec.comm_seconds;
        try {
          pending = transfer();
        } catch (...) {
          comm_error = std::current_exception();
        }
        comm = rec.comm_seconds - before;
      }
      const auto wait0 = Clock::now();
      const auto timing = run.wait(pool_);  // chunk barrier
      rec.barrier_wait += since(wait0);
      if (comm_error) std::rethrow_exception(comm_error);
      account(timing);
      rec.compute_seconds += timing.wall;
      overlapped += std::min(timing.wall, comm);
      held -= cur.rows.bytes();
      metrics_.memory.free_recv(cur.rows.bytes());
    }
    rec.overlap = rec.comm_seconds > 0.0 ? std::min(1.0, overlapped / rec.comm_seconds) : 0.0;

    metrics_.comm_seconds += rec.comm_seconds;
    metrics_.remote_compute_seconds += rec.compute_seconds;
    metrics_.rows_sent += rec.rows_sent;
    metrics_.rows_received += rec.rows_received;
    metrics_.bytes_sent += rec.bytes_sent;
    metrics_.bytes_received += rec.bytes_received;
    metrics_.steps.push_back(rec);
  }
}

std::string to_string(TransportKind k) { return k == TransportKind::socket ? "socket" : "inproc"; }

TransportKind parse_transport(const std::string& s) {
  if (s == "inproc") return TransportKind::inproc;
  if (s == "socket") return TransportKind::socket;
  throw std::invalid_argument("unknown transport '" + s + "' (expected inproc or socket)");
}

Cluster::Cluster(const Graph& g, const Template& t, ClusterConfig config)
    : g_(g), cfg_(config), plan_(partition_template(t)) {
  if (cfg_.workers == 0) throw std::invalid_argument("need at least one worker");
  part_ = partition_random(g_, cfg_.workers, cfg_.partition_seed);
  xplan_ = build_exchange_plan(g_, part_);
  if (cfg_.workers > 1)
    transports_ = cfg_.transport == TransportKind::socket ? make_loopback_socket_fabric(cfg_.workers)
                                                          : make_inproc_fabric(cfg_.workers);
  for (WorkerId p = 0; p < cfg_.workers; ++p)
    engines_.push_back(std::make_unique<WorkerEngine>(g_, part_, xplan_, plan_, p,
                                                      transports_.empty() ? nullptr : transports_[p].get(),
                                                      cfg_.engine));
}

Cluster::~Cluster() = default;

Count Cluster::colorful_total(std::uint64_t color_seed) {
  const auto orbit = static_cast<Count>(plan_.root_orbit());
  if (engines_.size() == 1) return engines_[0]->colorful_partial(color_seed) / orbit;

  std::vector<Count> partial(engines_.size(), 0.0);
  std::mutex mu;
  std::exception_ptr first;
  std::vector<std::thread> threads;
  for (std::size_t p = 0; p < engines_.size(); ++p)
    threads.emplace_back([&, p] {
      try {
        partial[p] = engines_[p]->colorful_partial(color_seed);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        if (!first) {
          first = std::current_exception();
          for (auto& tr : transports_) tr->abort(std::string("aborted after failure: ") + e.what());
        }
      }
    });
  for (auto& t : threads) t.join();
  if (first) std::rethrow_exception(first);
  Count sum = 0.0;
  for (Count x : partial) sum += x;
  return sum / orbit;
}

std::vector<WorkerMetrics> Cluster::worker_metrics() const {
  std::vector<WorkerMetrics> out;
  for (const auto& e : engines_) out.push_back(e->metrics());
  return out;
}

void Cluster::reset_metrics() {
  for (auto& e : engines_) e->reset_metrics();
}

}  // namespace treelet
