#include "treelet/runner.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <thread>

namespace treelet {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

}  // namespace

void validate(const HockneyParams& h) {
  if (!(h.alpha >= 0.0)) throw std::invalid_argument("hockney alpha must be >= 0");
  if (!(h.beta > 0.0)) throw std::invalid_argument("hockney beta must be > 0");
}

double predicted_remote_volume(const GraphSize& size, std::size_t workers) {
  if (workers == 0) throw std::invalid_argument("workers must be >= 1");
  const double P = static_cast<double>(workers);
  return size.adjacency / (P * P);
}

CostPrediction predict_costs(const TemplatePlan& plan, const GraphSize& size, std::size_t workers,
                             const HockneyParams& params, const CostModel& cost, double straggler_seconds) {
  validate(params);
  CostPrediction out;
  out.workers = workers;
  out.cost = cost;
  out.remote_volume = predicted_remote_volume(size, workers);
  const std::size_t k = plan.template_size();
  const double P = static_cast<double>(workers);
  for (auto idx : plan.evaluation_order()) {
    const auto& e = plan.entry(idx);
    if (e.is_leaf()) continue;
    StepPrediction s;
    s.entry = idx;
    s.size = e.size;
    s.active_size = plan.entry(e.active).size;
    const double width = static_cast<double>(binomial(k, e.size));
    s.remote_volume = out.remote_volume;
    s.computation = width * static_cast<double>(binomial(e.size, s.active_size)) * out.remote_volume;
    s.communication_seconds =
        params.alpha + straggler_seconds + params.beta * sizeof(Count) * width * out.remote_volume;
    s.peak_memory_bytes = sizeof(Count) * width * (size.vertices / P + out.remote_volume);
    out.entries.push_back(s);
  }
  return out;
}

std::vector<std::size_t> default_ping_sizes() {
  // up to the default chunk size; loopback sockets turn superlinear past it
  return {0, 1 << 12, 1 << 14, 1 << 15, 1 << 16, 1 << 17, 1 << 18};
}

namespace {

// Endpoint b echoes an empty frame for every ping; offset 1 stops it.
void echo_loop(Transport& b, WorkerId from) {
  for (;;) {
    auto f = b.recv(from, std::chrono::seconds(30));
    if (!f) throw TransportError("ping echo: no frame");
    const auto meta = decode_meta(f->meta);
    if (meta.offset == 1) return;
    b.send(from, Frame{encode_meta(b.rank(), from, 0), {}});
  }
}

// The payload copy is made before the clock starts; only the transport is timed.
double ping(Transport& a, WorkerId to, const std::vector<std::uint8_t>& payload) {
  Frame f{encode_meta(a.rank(), to, 0), payload};
  const auto t0 = Clock::now();
  a.send(to, std::move(f));
  auto reply = a.recv(to, std::chrono::seconds(30));
  if (!reply) throw TransportError("ping: no reply");
  return since(t0);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <class Body>
auto with_echo(Transport& a, Transport& b, Body body) {
  std::exception_ptr echo_error;
  std::thread echo([&] {
    try {
      echo_loop(b, a.rank());
    } catch (...) {
      echo_error = std::current_exception();
    }
  });
  try {
    auto result = body();
    a.send(b.rank(), Frame{encode_meta(a.rank(), b.rank(), 1), {}});
    echo.join();
    if (echo_error) std::rethrow_exception(echo_error);
    return result;
  } catch (...) {
    a.send(b.rank(), Frame{encode_meta(a.rank(), b.rank(), 1), {}});
    echo.join();
    throw;
  }
}

}  // namespace

double measure_round_trip(Transport& a, Transport& b, std::size_t bytes, std::size_t repetitions) {
  return with_echo(a, b, [&] {
    const std::vector<std::uint8_t> payload(bytes, 0xa5);
    ping(a, b.rank(), payload);  // warm-up
    std::vector<double> t;
    for (std::size_t r = 0; r < repetitions; ++r) t.push_back(ping(a, b.rank(), payload));
    return median(t);
  });
}

HockneyFit fit_hockney(Transport& a, Transport& b, const std::vector<std::size_t>& sizes, std::size_t repetitions) {
  if (sizes.size() < 5) throw std::invalid_argument("fit_hockney needs at least 5 payload sizes");
  if (repetitions == 0) throw std::invalid_argument("fit_hockney needs at least one repetition");
  HockneyFit fit;
  fit.samples = with_echo(a, b, [&] {
    std::vector<PingSample> samples;
    for (auto n : sizes) {
      const std::vector<std::uint8_t> payload(n, 0xa5);
      ping(a, b.rank(), payload);
      std::vector<double> t;
      for (std::size_t r = 0; r < repetitions; ++r) t.push_back(ping(a, b.rank(), payload));
      samples.push_back({n, median(t)});
    }
    return samples;
  });

  // Ordinary least squares of t = c0 + c1 * n. A round trip carries two latencies and n bytes.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(fit.samples.size());
  for (const auto& s : fit.samples) {
    const double x = static_cast<double>(s.bytes);
    sx += x;
    sy += s.seconds;
    sxx += x * x;
    sxy += x * s.seconds;
  }
  const double den = m * sxx - sx * sx;
  double c1 = den != 0.0 ? (m * sxy - sx * sy) / den : 0.0;
  double c0 = (sy - c1 * sx) / m;
  fit.params.beta = std::max(c1, 1e-15);
  fit.params.alpha = std::max(c0, 0.0) / 2.0;
  return fit;
}

HockneyFit fit_hockney(TransportKind kind, std::size_t repetitions) {
  auto fabric = kind == TransportKind::socket ? make_loopback_socket_fabric(2) : make_inproc_fabric(2);
  return fit_hockney(*fabric[0], *fabric[1], default_ping_sizes(), repetitions);
}

Template resolve_template(const std::string& path_or_name, VertexId root) {
  if (std::filesystem::exists(path_or_name)) return load_template(path_or_name, RootChoice{root});
  const auto names = named_template_names();
  if (std::find(names.begin(), names.end(), path_or_name) != names.end())
    return named_template(path_or_name).with_root(root);
  throw std::invalid_argument("template '" + path_or_name + "' is neither a file nor a bundled name");
}

json to_json(const RunConfig& c) {
  return {{"graph", c.graph_path},
          {"template", c.template_path},
          {"template_root", c.template_root},
          {"mode", to_string(c.mode)},
          {"load_balance", c.load_balance ? "on" : "off"},
          {"workers", c.workers},
          {"lanes", c.lanes},
          {"simulated_lanes", c.simulated_lanes},
          {"transport", to_string(c.transport)},
          {"task_size", c.task_size},
          {"epsilon", c.epsilon},
          {"delta", c.delta},
          {"niter", c.niter},
          {"niter_factor", c.niter_factor},
          {"seed", c.seed},
          {"adaptive_threshold", c.adaptive_threshold},
          {"alpha", c.hockney.alpha},
          {"beta", c.hockney.beta},
          {"out", c.out}};
}

json to_json(const CostPrediction& p) {
  json entries = json::array();
  for (const auto& s : p.entries)
    entries.push_back({{"entry", s.entry},
                       {"size", s.size},
                       {"active_size", s.active_size},
                       {"remote_volume", s.remote_volume},
                       {"computation", s.computation},
                       {"communication_seconds", s.communication_seconds},
                       {"peak_memory_bytes", s.peak_memory_bytes}});
  return {{"workers", p.workers},
          {"remote_volume_per_step", p.remote_volume},
          {"memory", p.cost.memory},
          {"computation", p.cost.computation},
          {"intensity", p.cost.intensity},
          {"index_set", to_string(p.cost.convention.index_set)},
          {"counting", to_string(p.cost.convention.counting)},
          {"entries", entries}};
}

json to_json(const StepRecord& s) {
  return {{"entry", s.entry},
          {"step", s.step},
          {"mode", to_string(s.mode)},
          {"comm_seconds", s.comm_seconds},
          {"compute_seconds", s.compute_seconds},
          {"overlap", s.overlap},
          {"barrier_wait_seconds", s.barrier_wait},
          {"rows_sent", s.rows_sent},
          {"rows_received", s.rows_received},
          {"bytes_sent", s.bytes_sent},
          {"bytes_received", s.bytes_received},
          {"payload_bytes", s.payload_bytes},
          {"chunks_received", s.chunks_received},
          {"recv_buffer_bytes", s.recv_buffer_bytes},
          {"remote_neighbor_reads", s.remote_neighbor_reads}};
}

json to_json(const WorkerMetrics& m) {
  json steps = json::array();
  for (const auto& s : m.steps) steps.push_back(to_json(s));
  return {{"rank", m.rank},
          {"local_vertices", m.local_vertices},
          {"colorings", m.colorings},
          {"phase_seconds",
           {{"coloring", m.coloring_seconds},
            {"local_compute", m.local_compute_seconds},
            {"remote_compute", m.remote_compute_seconds},
            {"communication", m.comm_seconds},
            {"total", m.total_seconds}}},
          {"lane_makespan_cpu_seconds", m.lane_makespan_cpu},
          {"lane_total_cpu_seconds", m.lane_total_cpu},
          {"simulated_makespan_seconds", m.simulated_makespan},
          {"rows_sent", m.rows_sent},
          {"rows_received", m.rows_received},
          {"bytes_sent", m.bytes_sent},
          {"bytes_received", m.bytes_received},
          {"peak_table_bytes", m.memory.peak_tables()},
          {"peak_recv_buffer_bytes", m.memory.peak_recv()},
          {"peak_send_buffer_bytes", m.memory.peak_send()},
          {"peak_table_plus_recv_bytes", m.memory.peak_tables_plus_recv()},
          {"max_single_table_bytes", m.memory.max_single_table()},
          {"steps", steps}};
}

namespace {

json summarize(const std::vector<WorkerMetrics>& workers) {
  double coloring = 0, local = 0, remote = 0, comm = 0, total = 0, makespan = 0, cpu = 0;
  double comm_sum = 0, compute_sum = 0;
  std::size_t peak_tables = 0, peak_recv = 0, peak_send = 0, peak_combined = 0, max_table = 0;
  json overlap = json::array();
  json per_worker = json::array();
  double overlap_sum = 0;
  std::size_t overlap_n = 0;
  for (const auto& m : workers) {
    coloring = std::max(coloring, m.coloring_seconds);
    local = std::max(local, m.local_compute_seconds);
    remote = std::max(remote, m.remote_compute_seconds);
    comm = std::max(comm, m.comm_seconds);
    total = std::max(total, m.total_seconds);
    makespan = std::max(makespan, m.lane_makespan_cpu);
    cpu += m.lane_total_cpu;
    comm_sum += m.comm_seconds;
    compute_sum += m.local_compute_seconds + m.remote_compute_seconds;
    peak_tables = std::max(peak_tables, m.memory.peak_tables());
    peak_recv = std::max(peak_recv, m.memory.peak_recv());
    peak_send = std::max(peak_send, m.memory.peak_send());
    peak_combined = std::max(peak_combined, m.memory.peak_tables_plus_recv());
    max_table = std::max(max_table, m.memory.max_single_table());
    for (const auto& s : m.steps)
      if (s.mode == ExchangeMode::pipeline) {
        overlap.push_back({{"rank", m.rank}, {"entry", s.entry}, {"step", s.step}, {"overlap", s.overlap}});
        overlap_sum += s.overlap;
        ++overlap_n;
      }
    per_worker.push_back(to_json(m));
  }
  const double ratio = comm_sum + compute_sum > 0 ? comm_sum / (comm_sum + compute_sum) : 0.0;
  return {{"phase_seconds",
           {{"coloring", coloring},
            {"local_compute", local},
            {"remote_compute", remote},
            {"communication", comm},
            {"total", total}}},
          {"comm_compute_ratio", ratio},
          {"overlap", overlap},
          {"mean_overlap", overlap_n ? overlap_sum / static_cast<double>(overlap_n) : 0.0},
          {"lane_makespan_cpu_seconds", makespan},
          {"lane_total_cpu_seconds", cpu},
          {"peak_table_bytes", peak_tables},
          {"peak_recv_buffer_bytes", peak_recv},
          {"peak_send_buffer_bytes", peak_send},
          {"peak_table_plus_recv_bytes", peak_combined},
          {"max_single_table_bytes", max_table},
          {"workers", per_worker}};
}

EstimatorConfig estimator_config(const RunConfig& c, std::size_t k) {
  EstimatorConfig e;
  e.epsilon = c.epsilon;
  e.delta = c.delta;
  e.k = k;
  e.niter = c.niter;
  e.niter_factor = c.niter_factor;
  e.seed = c.seed;
  return e;
}

EngineConfig engine_config(const RunConfig& c) {
  EngineConfig e;
  e.policy = {c.mode, c.adaptive_threshold};
  e.load_balance = c.load_balance;
  e.lanes = c.lanes;
  e.simulated_lanes = c.simulated_lanes;
  e.task_size = c.task_size;
  e.task_seed = mix64(c.seed, 0x7a5c);
  return e;
}

json describe(const Graph& g, const TemplatePlan& plan, const std::vector<ExchangeMode>& modes) {
  const auto stats = degree_stats(g);
  json entries = json::array();
  for (std::size_t i = 0; i < plan.entries().size(); ++i) {
    const auto& e = plan.entry(i);
    entries.push_back({{"index", i},
                       {"size", e.size},
                       {"code", e.code},
                       {"over_count", e.over_count},
                       {"exchange", e.is_leaf() ? "none" : to_string(modes[i])}});
  }
  return {{"graph", {{"vertices", g.num_vertices()}, {"edges", g.num_edges()},
                     {"average_degree", stats.average}, {"max_degree", stats.maximum}}},
          {"template", {{"k", plan.template_size()}, {"root_orbit", plan.root_orbit()}, {"entries", entries}}}};
}

json estimate_json(const Estimate& est) {
  return {{"estimate", est.value},
          {"niter", est.niter},
          {"groups", est.groups},
          {"iterations", est.iterations},
          {"group_means", est.group_means}};
}

void validate(const RunConfig& c) {
  if (c.workers == 0) throw std::invalid_argument("--workers must be >= 1");
  if (c.lanes == 0) throw std::invalid_argument("--lanes must be >= 1");
  if (c.task_size == 0) throw std::invalid_argument("--task-size must be >= 1");
  validate(c.hockney);
}

RunResult finish(const RunConfig& config, const Graph& g, const TemplatePlan& plan,
                 const std::vector<ExchangeMode>& modes, Estimate est, const std::vector<WorkerMetrics>& workers,
                 double wall, std::size_t P) {
  RunResult r;
  r.report = describe(g, plan, modes);
  r.report["config"] = to_json(config);
  const json e = estimate_json(est);
  for (auto& [key, value] : e.items()) r.report[key] = value;
  r.report["metrics"] = summarize(workers);
  r.report["metrics"]["wall_seconds"] = wall;
  const auto cost = cost_metrics(plan, plan.template_size(), calibrated_convention());
  r.report["prediction"] = to_json(predict_costs(plan, graph_size(g), P, config.hockney, cost));
  r.estimate = std::move(est);
  return r;
}

RunResult run_multiprocess(const RunConfig& config, const Graph& g, const Template& t, WorkerId rank,
                           const std::vector<PeerAddress>& peers) {
  const auto t0 = Clock::now();
  const std::size_t P = peers.size();
  auto transport = connect_socket_transport(rank, peers);
  const auto plan = partition_template(t);
  const auto part = partition_random(g, P, mix64(config.seed, 0x9a7));
  const auto xplan = build_exchange_plan(g, part);
  WorkerEngine engine(g, part, xplan, plan, rank, P > 1 ? transport.get() : nullptr, engine_config(config));
  const auto timeout = std::chrono::seconds(120);

  auto reduce = [&](std::uint64_t seed) -> Count {
    const Count partial = engine.colorful_partial(seed);
    auto pack = [](Count x) {
      std::vector<std::uint8_t> b;
      put_u64(b, std::bit_cast<std::uint64_t>(x));
      return b;
    };
    auto unpack = [&](WorkerId from) {
      auto f = transport->recv(from, timeout);
      if (!f || f->payload.size() != 8)
        throw ProtocolError("worker " + std::to_string(rank) + ": missing partial sum from worker " +
                            std::to_string(from));
      return std::bit_cast<Count>(get_u64(f->payload.data()));
    };
    Count total = partial;
    if (rank == 0) {
      for (WorkerId q = 1; q < P; ++q) total += unpack(q);
      for (WorkerId q = 1; q < P; ++q) transport->send(q, Frame{encode_meta(0, q, 0), pack(total)});
    } else {
      transport->send(0, Frame{encode_meta(rank, 0, 0), pack(partial)});
      total = unpack(0);
    }
    return total / static_cast<Count>(plan.root_orbit());
  };
  auto est = estimate(estimator_config(config, t.size()), reduce);
  auto result = finish(config, g, plan, engine.modes(), std::move(est), {engine.metrics()}, since(t0), P);
  result.report["rank"] = rank;
  return result;
}

}  // namespace

RunResult run(const RunConfig& config, const Graph& g, const Template& t) {
  validate(config);
  const auto t0 = Clock::now();
  ClusterConfig cc;
  cc.workers = config.workers;
  cc.transport = config.transport;
  cc.partition_seed = mix64(config.seed, 0x9a7);
  cc.engine = engine_config(config);
  Cluster cluster(g, t, cc);
  auto est = estimate(estimator_config(config, t.size()), [&](std::uint64_t s) { return cluster.colorful_total(s); });
  return finish(config, g, cluster.plan(), cluster.worker(0).modes(), std::move(est), cluster.worker_metrics(),
                since(t0), config.workers);
}

RunResult run(const RunConfig& config) {
  validate(config);
  const auto loaded = load_edge_list(config.graph_path);
  const auto t = resolve_template(config.template_path, config.template_root);
  if (config.transport == TransportKind::socket) {
    const char* rank = std::getenv("TREELET_RANK");
    const char* peers = std::getenv("TREELET_PEERS");
    if (rank && peers) {
      const auto list = parse_peers(peers);
      const auto r = static_cast<WorkerId>(std::stoul(rank));
      if (r >= list.size()) throw std::invalid_argument("TREELET_RANK outside TREELET_PEERS");
      return run_multiprocess(config, loaded.graph, t, r, list);
    }
  }
  auto result = run(config, loaded.graph, t);
  result.report["graph"]["dropped_self_loops"] = loaded.dropped_self_loops;
  result.report["graph"]["dropped_duplicates"] = loaded.dropped_duplicates;
  return result;
}

}  // namespace treelet
