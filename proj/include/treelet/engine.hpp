#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "treelet/color_dp.hpp"
#include "treelet/comm.hpp"
#include "treelet/graph.hpp"
#include "treelet/lanes.hpp"
#include "treelet/template.hpp"
#include "treelet/transport.hpp"

namespace treelet {

struct EngineConfig {
  ModePolicy policy;
  bool load_balance = true;
  std::size_t lanes = 1;
  std::size_t task_size = 50;
  std::uint64_t task_seed = 0x5eed;
  std::size_t chunk_bytes = std::size_t{1} << 18;
  std::chrono::milliseconds recv_timeout{60000};
  std::size_t simulated_lanes = 0;  // >0: time each task and replay the schedule on this many lanes
};

/// One ring step of one sub-template (pipeline), or the whole exchange (all-to-all, step 0).
/// A pipelined step is consumed chunk by chunk: lanes update from chunk c while the
/// communication lane moves chunk c + 1.
struct StepRecord {
  std::size_t entry = 0;
  std::size_t step = 0;
  ExchangeMode mode = ExchangeMode::alltoall;
  double comm_seconds = 0.0;
  double compute_seconds = 0.0;  // remote update on this step's received rows
  double overlap = 0.0;          // sum over chunks of min(compute_c, comm_{c+1}) / comm; 0 if nothing overlapped
  double barrier_wait = 0.0;     // time the communication lane waited for computation at chunk barriers
  std::size_t chunks_received = 0;
  std::size_t rows_sent = 0;
  std::size_t rows_received = 0;
  std::size_t bytes_sent = 0;
  std::size_t bytes_received = 0;
  std::size_t payload_bytes = 0;      // decoded receive buffers for the whole step (all chunks)
  std::size_t recv_buffer_bytes = 0;  // most of it held at once
  std::size_t remote_neighbor_reads = 0;  // remote adjacency entries whose rows this step's data serves
};

/// Bytes requested for count tables and exchange buffers, with running peaks.
class MemoryAccount {
 public:
  void add_table(std::size_t b) { tables_ += b; touch(); }
  void free_table(std::size_t b) { tables_ -= b; }
  void add_recv(std::size_t b) { recv_ += b; touch(); }
  void free_recv(std::size_t b) { recv_ -= b; }
  void add_send(std::size_t b) { send_ += b; touch(); }
  void free_send(std::size_t b) { send_ -= b; }

  std::size_t peak_tables() const noexcept { return peak_tables_; }
  std::size_t peak_recv() const noexcept { return peak_recv_; }
  std::size_t peak_send() const noexcept { return peak_send_; }
  std::size_t peak_tables_plus_recv() const noexcept { return peak_combined_; }
  std::size_t max_single_table() const noexcept { return max_table_; }
  void note_table(std::size_t b) { max_table_ = std::max(max_table_, b); }

 private:
  void touch() {
    peak_tables_ = std::max(peak_tables_, tables_);
    peak_recv_ = std::max(peak_recv_, recv_);
    peak_send_ = std::max(peak_send_, send_);
    peak_combined_ = std::max(peak_combined_, tables_ + recv_);
  }
  std::size_t tables_ = 0, recv_ = 0, send_ = 0;
  std::size_t peak_tables_ = 0, peak_recv_ = 0, peak_send_ = 0, peak_combined_ = 0, max_table_ = 0;
};

struct WorkerMetrics {
  WorkerId rank = 0;
  std::size_t local_vertices = 0;
  std::size_t colorings = 0;
  double coloring_seconds = 0.0;
  double local_compute_seconds = 0.0;
  double remote_compute_seconds = 0.0;
  double comm_seconds = 0.0;
  double total_seconds = 0.0;
  double lane_makespan_cpu = 0.0;  // sum over compute phases of the busiest lane's CPU time
  double lane_total_cpu = 0.0;
  double simulated_makespan = 0.0;  // sum over compute phases, when EngineConfig::simulated_lanes > 0
  std::size_t rows_sent = 0;
  std::size_t rows_received = 0;
  std::size_t bytes_sent = 0;
  std::size_t bytes_received = 0;
  MemoryAccount memory;
  std::vector<StepRecord> steps;  // last coloring only
};

/// One worker's share of the distributed count: owns the rows of its local vertices.
class WorkerEngine {
 public:
  WorkerEngine(const Graph& g, const Partition& part, const ExchangePlan& xplan, const TemplatePlan& plan,
               WorkerId rank, Transport* transport, EngineConfig config);

  /// Sum over local vertices of the full-set entry of the full-template table.
  Count colorful_partial(std::uint64_t color_seed);

  const WorkerMetrics& metrics() const noexcept { return metrics_; }
  void reset_metrics();
  const std::vector<ExchangeMode>& modes() const noexcept { return modes_; }
  std::span<const VertexId> local_vertices() const noexcept { return local_; }

  /// Remote adjacency entries of local vertices served by worker (p - w) mod P.
  std::size_t remote_neighbor_entries(std::size_t w) const;

 private:
  std::span<const VertexId> group(std::uint32_t v, std::size_t w) const noexcept {
    const std::size_t base = static_cast<std::size_t>(v) * (P_ + 1);
    return {nbr_.data() + group_off_[base + w], nbr_.data() + group_off_[base + w + 1]};
  }

  struct Outbox {
    WorkerId to = 0;
    const CountTable* table = nullptr;
    const std::vector<VertexId>* list = nullptr;
    std::size_t next = 0;  // position in list
    std::size_t target = 0;
    std::uint32_t offset = 0;
    bool closed = false;
  };
  struct Chunk {
    RemoteRows rows;
    std::vector<std::uint32_t> touched;  // local vertices with a neighbour in this chunk
    std::vector<std::uint32_t> off;
    std::vector<VertexId> nbrs;
    TaskQueue queue;  // Task::vertex indexes `touched`
  };

  void compute_entry(std::size_t pos, std::size_t idx, std::uint64_t color_seed);
  Outbox open_outbox(std::size_t passive, WorkerId to) const;
  void send_chunk(Outbox& box, StepRecord& rec);
  bool receive_chunk(WorkerId from, std::size_t stage, std::uint32_t expect, RemoteRows& into, StepRecord& rec);
  void index_chunk(std::size_t w, std::size_t c, Chunk& chunk);
  void remote_alltoall(std::size_t idx, const SplitTable& splits, const CountTable& active, CountTable& out);
  void remote_pipeline(std::size_t idx, const SplitTable& splits, const CountTable& active, CountTable& out);
  void account(const LaneTiming& t);
  void free_table(std::size_t idx);

  const Graph& g_;
  const Partition& part_;
  const ExchangePlan& xplan_;
  const TemplatePlan& plan_;
  WorkerId rank_;
  std::size_t P_;
  Transport* transport_;
  EngineConfig cfg_;
  LanePool pool_;
  Schedule schedule_;

  std::vector<VertexId> local_;
  std::vector<std::uint32_t> local_index_;  // global id -> local row (valid for local vertices)
  std::vector<VertexId> nbr_;
  std::vector<std::size_t> group_off_;  // per local vertex, P + 1 offsets into nbr_
  TaskQueue local_queue_;
  TaskQueue naive_queue_;
  // Per ring step w: for each row the step receives, the local vertices adjacent to it.
  std::vector<std::vector<std::size_t>> rev_off_;
  std::vector<std::vector<std::uint32_t>> rev_local_;
  std::vector<std::uint32_t> touch_count_;

  std::vector<ExchangeMode> modes_;
  std::vector<std::optional<SplitTable>> splits_;
  std::vector<std::optional<CountTable>> tables_;
  WorkerMetrics metrics_;
};

enum class TransportKind { inproc, socket };

std::string to_string(TransportKind k);
TransportKind parse_transport(const std::string& s);

struct ClusterConfig {
  std::size_t workers = 1;
  TransportKind transport = TransportKind::inproc;
  std::uint64_t partition_seed = 0x9a7;
  EngineConfig engine;
};

/// P workers inside this process, each on its own thread, joined per coloring.
class Cluster {
 public:
  Cluster(const Graph& g, const Template& t, ClusterConfig config);
  ~Cluster();

  /// Colorful copies of the template under the coloring derived from color_seed.
  Count colorful_total(std::uint64_t color_seed);

  std::vector<WorkerMetrics> worker_metrics() const;
  void reset_metrics();

  const TemplatePlan& plan() const noexcept { return plan_; }
  const Partition& partition() const noexcept { return part_; }
  const ExchangePlan& exchange_plan() const noexcept { return xplan_; }
  const WorkerEngine& worker(WorkerId p) const { return *engines_.at(p); }
  const ClusterConfig& config() const noexcept { return cfg_; }

 private:
  const Graph& g_;
  ClusterConfig cfg_;
  TemplatePlan plan_;
  Partition part_;
  ExchangePlan xplan_;
  std::vector<std::unique_ptr<Transport>> transports_;
  std::vector<std::unique_ptr<WorkerEngine>> engines_;
};

}  // namespace treelet
