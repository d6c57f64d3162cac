#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "treelet/comm.hpp"
#include "treelet/engine.hpp"
#include "treelet/estimator.hpp"
#include "treelet/graph.hpp"
#include "treelet/template.hpp"
#include "treelet/transport.hpp"

namespace treelet {

struct HockneyParams {
  double alpha = 5e-6;   // seconds
  double beta = 1e-9;    // seconds per byte
};

void validate(const HockneyParams& h);

struct GraphSize {
  double vertices = 0.0;
  double adjacency = 0.0;  // directed adjacency entries, 2 per undirected edge
};

inline GraphSize graph_size(const Graph& g) {
  return {static_cast<double>(g.num_vertices()), 2.0 * static_cast<double>(g.num_edges())};
}

/// Per-step remote-neighbour volume |E| / P^2.
double predicted_remote_volume(const GraphSize& size, std::size_t workers);

struct StepPrediction {
  std::size_t entry = 0;
  std::size_t size = 0;
  std::size_t active_size = 0;
  double remote_volume = 0.0;        // |E| / P^2
  double computation = 0.0;          // C(k,|T_i|) C(|T_i|,|T_i'|) |E| / P^2
  double communication_seconds = 0.0;  // alpha + straggler + beta * 8 C(k,|T_i|) |E| / P^2
  double peak_memory_bytes = 0.0;    // 8 C(k,|T_i|) (|V|/P + |E|/P^2)
};

struct CostPrediction {
  std::size_t workers = 1;
  double remote_volume = 0.0;
  CostModel cost;
  std::vector<StepPrediction> entries;  // non-leaf entries in evaluation order
};

CostPrediction predict_costs(const TemplatePlan& plan, const GraphSize& size, std::size_t workers,
                             const HockneyParams& params, const CostModel& cost, double straggler_seconds = 0.0);

struct PingSample {
  std::size_t bytes = 0;
  double seconds = 0.0;  // median round trip: `bytes` one way, empty reply
};

struct HockneyFit {
  HockneyParams params;
  std::vector<PingSample> samples;
  double predict_round_trip(std::size_t bytes) const { return 2.0 * params.alpha + params.beta * bytes; }
};

/// Least-squares fit of round-trip time against payload size, from ping exchanges
/// between endpoints 0 and 1 of a two-worker fabric. Needs at least 5 sizes.
HockneyFit fit_hockney(Transport& a, Transport& b, const std::vector<std::size_t>& sizes, std::size_t repetitions = 15);
HockneyFit fit_hockney(TransportKind kind, std::size_t repetitions = 15);
std::vector<std::size_t> default_ping_sizes();

/// Round-trip time of one ping (median over repetitions), outside of fitting.
double measure_round_trip(Transport& a, Transport& b, std::size_t bytes, std::size_t repetitions);

struct RunConfig {
  std::string graph_path;
  std::string template_path;  // or a bundled name such as "u5-2"
  VertexId template_root = 0;
  Mode mode = Mode::adaptive;
  bool load_balance = true;
  std::size_t workers = 1;
  std::size_t lanes = 1;
  std::size_t simulated_lanes = 0;
  TransportKind transport = TransportKind::inproc;
  std::size_t task_size = 50;
  double epsilon = 0.5;
  double delta = 0.1;
  std::size_t niter = 0;
  double niter_factor = 1.0;
  std::uint64_t seed = 1;
  double adaptive_threshold = 5.0;
  HockneyParams hockney;
  std::string out;
};

struct RunResult {
  Estimate estimate;
  nlohmann::json report;  // config echo, metrics, predictions
};

/// Loads a template from a path, falling back to the bundled shapes by name.
Template resolve_template(const std::string& path_or_name, VertexId root);

/// Executes the full pipeline. With transport=socket and TREELET_RANK / TREELET_PEERS set,
/// this process runs a single worker of a multi-process job.
RunResult run(const RunConfig& config);

/// Same pipeline on an already loaded graph and template (in-process workers only).
RunResult run(const RunConfig& config, const Graph& g, const Template& t);

nlohmann::json to_json(const RunConfig& config);
nlohmann::json to_json(const CostPrediction& p);
nlohmann::json to_json(const WorkerMetrics& m);
nlohmann::json to_json(const StepRecord& s);

}  // namespace treelet
