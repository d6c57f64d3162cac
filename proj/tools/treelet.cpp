// treelet: color-coding tree template counter.
//
//   treelet --graph g.txt --template u5-2 --workers 4 --mode pipeline --out m.json
//   treelet cost --template u12-2 --graph g.txt --workers 8
//   treelet fit-hockney --transport socket
//   treelet gen-rmat --vertices 16384 --edges 131072 --skew 0.8 --out g.txt
//   treelet oracle --graph g.txt --template u3-1 --color-seed 7

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <typeinfo>

#include "treelet/color_dp.hpp"
#include "treelet/oracle.hpp"
#include "treelet/runner.hpp"

using nlohmann::json;
using namespace treelet;

namespace {

void emit(const json& j, const std::string& out) {
  const auto text = j.dump(2);
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << text << "\n";
  }
  std::cout << text << "\n";
}

std::string error_type(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) return "parse_error";
  if (dynamic_cast<const FormatError*>(&e)) return "format_error";
  if (dynamic_cast<const NotATreeError*>(&e)) return "not_a_tree";
  if (dynamic_cast<const ProtocolError*>(&e)) return "protocol_error";
  if (dynamic_cast<const TransportError*>(&e)) return "transport_error";
  if (dynamic_cast<const OracleLimitError*>(&e)) return "oracle_limit";
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid_argument";
  return "runtime_error";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Approximate tree template counting by color coding"};
  app.require_subcommand(0, 1);

  RunConfig cfg;
  std::string mode = "adaptive", lb = "on", transport = "inproc";
  app.add_option("--graph", cfg.graph_path, "edge list: 'n m' header then m lines 'u v'");
  app.add_option("--template", cfg.template_path, "template edge list or bundled name (u3-1 ... u15-2)");
  app.add_option("--root", cfg.template_root, "template root vertex");
  app.add_option("--mode", mode, "naive | pipeline | adaptive")->check(CLI::IsMember({"naive", "pipeline", "adaptive"}));
  app.add_option("--load-balance", lb, "on | off")->check(CLI::IsMember({"on", "off"}));
  app.add_option("--workers", cfg.workers, "worker count P");
  app.add_option("--lanes", cfg.lanes, "computation lanes per worker");
  app.add_option("--simulate-lanes", cfg.simulated_lanes, "time each task and report the makespan on this many lanes");
  app.add_option("--transport", transport, "inproc | socket")->check(CLI::IsMember({"inproc", "socket"}));
  app.add_option("--task-size", cfg.task_size, "max neighbours per task");
  app.add_option("--epsilon", cfg.epsilon);
  app.add_option("--delta", cfg.delta);
  app.add_option("--niter", cfg.niter, "coloring count (0 derives it from epsilon, delta)");
  app.add_option("--niter-factor", cfg.niter_factor, "constant in front of e^k ln(1/delta) / epsilon^2");
  app.add_option("--seed", cfg.seed);
  app.add_option("--adaptive-threshold", cfg.adaptive_threshold, "intensity at which adaptive mode pipelines");
  app.add_option("--alpha", cfg.hockney.alpha, "latency (s) for cost predictions");
  app.add_option("--beta", cfg.hockney.beta, "seconds per byte for cost predictions");
  app.add_option("--out", cfg.out, "write metrics JSON here as well as stdout");

  auto* cost = app.add_subcommand("cost", "cost metrics and per-step predictions");
  std::string cost_template, cost_graph;
  std::size_t cost_workers = 4;
  cost->add_option("--template", cost_template)->required();
  cost->add_option("--graph", cost_graph);
  cost->add_option("--workers", cost_workers);
  cost->add_option("--alpha", cfg.hockney.alpha);
  cost->add_option("--beta", cfg.hockney.beta);

  auto* fit = app.add_subcommand("fit-hockney", "fit latency and bandwidth from ping exchanges");
  std::string fit_transport = "inproc";
  std::size_t reps = 15;
  fit->add_option("--transport", fit_transport)->check(CLI::IsMember({"inproc", "socket"}));
  fit->add_option("--repetitions", reps);

  auto* gen = app.add_subcommand("gen-rmat", "write an R-MAT graph");
  std::size_t gen_n = 1 << 14, gen_m = 1 << 17;
  double skew = 0.5;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("--vertices", gen_n, "power of two");
  gen->add_option("--edges", gen_m);
  gen->add_option("--skew", skew, "0 uniform .. 1 heavy")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out)->required();

  auto* orc = app.add_subcommand("oracle", "exact counts by enumeration (small inputs)");
  std::string orc_graph, orc_template;
  std::uint64_t color_seed = 1;
  orc->add_option("--graph", orc_graph)->required();
  orc->add_option("--template", orc_template)->required();
  orc->add_option("--color-seed", color_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cost) {
      const auto t = resolve_template(cost_template, 0);
      const auto plan = partition_template(t);
      json j;
      j["k"] = t.size();
      j["default"] = to_json(CostPrediction{1, 0.0, cost_metrics(plan, t.size()), {}});
      const auto calibrated = cost_metrics(plan, t.size(), calibrated_convention());
      j["calibrated"] = to_json(CostPrediction{1, 0.0, calibrated, {}});
      if (!cost_graph.empty()) {
        const auto g = load_edge_list(cost_graph).graph;
        j["prediction"] = to_json(predict_costs(plan, graph_size(g), cost_workers, cfg.hockney, calibrated));
      }
      emit(j, "");
      return 0;
    }
    if (*fit) {
      const auto f = fit_hockney(parse_transport(fit_transport), reps);
      json samples = json::array();
      for (const auto& s : f.samples) samples.push_back({{"bytes", s.bytes}, {"round_trip_seconds", s.seconds}});
      emit({{"transport", fit_transport}, {"alpha", f.params.alpha}, {"beta", f.params.beta}, {"samples", samples}},
           "");
      return 0;
    }
    if (*gen) {
      const auto g = generate_rmat(gen_n, gen_m, skew, gen_seed);
      std::ofstream f(gen_out);
      if (!f) throw std::runtime_error("cannot write " + gen_out);
      write_edge_list(f, g);
      const auto st = degree_stats(g);
      emit({{"vertices", g.num_vertices()}, {"edges", g.num_edges()}, {"average_degree", st.average},
            {"max_degree", st.maximum}, {"out", gen_out}},
           "");
      return 0;
    }
    if (*orc) {
      const auto g = load_edge_list(orc_graph).graph;
      const auto t = resolve_template(orc_template, 0);
      const auto coloring = random_coloring(g.num_vertices(), t.size(), color_seed);
      const auto c = count_embeddings(g, t, coloring.colors);
      emit({{"embeddings", c.total}, {"colorful", c.colorful}, {"color_seed", color_seed}}, "");
      return 0;
    }

    if (cfg.graph_path.empty() || cfg.template_path.empty())
      throw std::invalid_argument("--graph and --template are required");
    cfg.mode = parse_mode(mode);
    cfg.load_balance = lb == "on";
    cfg.transport = parse_transport(transport);
    const auto result = run(cfg);
    emit(result.report, cfg.out);
    return 0;
  } catch (const std::exception& e) {
    json err = {{"error", {{"type", error_type(e)}, {"message", e.what()}}}};
    if (const auto* pe = dynamic_cast<const ParseError*>(&e)) err["error"]["line"] = pe->line();
    std::cout << err.dump(2) << "\n";
    std::cerr << "treelet: " << e.what() << "\n";
    return 1;
  }
}
