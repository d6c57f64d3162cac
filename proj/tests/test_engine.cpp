#include <doctest.h>

#include "support.hpp"
#include "treelet/engine.hpp"
#include "treelet/oracle.hpp"

using namespace treelet;

namespace {

ClusterConfig config(std::size_t P, Mode mode, bool lb = true, std::size_t lanes = 1) {
  ClusterConfig c;
  c.workers = P;
  c.engine.policy.mode = mode;
  c.engine.load_balance = lb;
  c.engine.lanes = lanes;
  return c;
}

std::size_t max_payload(const std::vector<WorkerMetrics>& ms) {
  std::size_t m = 0;
  for (const auto& w : ms)
    for (const auto& s : w.steps) m = std::max(m, s.payload_bytes);
  return m;
}

// Stage-buffer bound, checked per worker for the last coloring's steps.
void check_buffers(const Cluster& c) {
  for (const auto& w : c.worker_metrics()) {
    std::size_t largest = 0;
    for (const auto& s : w.steps) {
      largest = std::max(largest, s.payload_bytes);
      CHECK(s.recv_buffer_bytes <= s.payload_bytes);
      CHECK(s.overlap >= 0.0);
      CHECK(s.overlap <= 1.0);
      if (s.mode == ExchangeMode::alltoall) CHECK(s.recv_buffer_bytes == s.payload_bytes);
    }
    CHECK(w.memory.peak_recv() <= largest);
    CHECK(w.memory.peak_tables_plus_recv() >= w.memory.max_single_table());
  }
}

}  // namespace

TEST_CASE("modes agree with each other and with the oracle") {
  const auto g = testing::erdos_renyi(30, 0.2, 5);
  for (const char* name : {"u3-1", "u5-2"}) {
    const auto t = named_template(name);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const double exact = count_colorful_exact(g, t, testing::coloring_vector(30, t.size(), seed));
      for (std::size_t P : {1u, 2u, 3u, 5u})
        for (Mode m : {Mode::naive, Mode::pipeline, Mode::adaptive})
          for (bool lb : {true, false}) {
            CAPTURE(name);
            CAPTURE(P);
            CAPTURE(to_string(m));
            Cluster c(g, t, config(P, m, lb));
            CHECK(c.colorful_total(seed) == exact);
            if (P > 1) check_buffers(c);
          }
    }
  }
}

TEST_CASE("two workers: one step per exchanged entry") {
  const auto g = testing::erdos_renyi(20, 0.3, 1);
  const auto t = named_template("u5-2");
  Cluster c(g, t, config(2, Mode::pipeline));
  const auto total = c.colorful_total(4);
  Cluster n(g, t, config(2, Mode::naive));
  CHECK(n.colorful_total(4) == total);
  std::size_t non_leaf = 0;
  for (const auto& e : c.plan().entries()) non_leaf += !e.is_leaf();
  for (const auto& w : c.worker_metrics()) {
    CHECK(w.steps.size() == non_leaf);
    for (const auto& s : w.steps) {
      CHECK(s.step == 1);
      CHECK(s.mode == ExchangeMode::pipeline);
    }
  }
}

TEST_CASE("five workers on thirty vertices") {
  const auto g = testing::erdos_renyi(30, 0.25, 17);
  const auto t = testing::path_template(4);
  Cluster n(g, t, config(5, Mode::naive));
  Cluster p(g, t, config(5, Mode::pipeline));
  for (std::uint64_t seed = 0; seed < 5; ++seed) CHECK(n.colorful_total(seed) == p.colorful_total(seed));
}

TEST_CASE("wire conservation") {
  const auto g = testing::erdos_renyi(60, 0.15, 3);
  const auto t = named_template("u7-2");
  for (std::size_t P : {2u, 4u}) {
    Cluster n(g, t, config(P, Mode::naive));
    Cluster p(g, t, config(P, Mode::pipeline));
    CHECK(n.colorful_total(9) == p.colorful_total(9));
    std::size_t rows_n = 0, rows_p = 0, bytes_n = 0, bytes_p = 0, recv_p = 0;
    for (const auto& w : n.worker_metrics()) {
      rows_n += w.rows_sent;
      bytes_n += w.bytes_sent;
    }
    for (const auto& w : p.worker_metrics()) {
      rows_p += w.rows_sent;
      bytes_p += w.bytes_sent;
      recv_p += w.rows_received;
    }
    CHECK(rows_n == rows_p);
    CHECK(bytes_n == bytes_p);
    CHECK(recv_p == rows_p);
    check_buffers(n);
    check_buffers(p);
  }
}

TEST_CASE("small chunks stream a step in pieces") {
  const auto g = testing::erdos_renyi(50, 0.3, 12);
  const auto t = named_template("u5-2");
  auto cfg = config(3, Mode::pipeline, true, 3);
  cfg.engine.chunk_bytes = 64;
  cfg.engine.task_size = 2;
  Cluster small(g, t, cfg);
  Cluster ref(g, t, config(3, Mode::naive));
  for (std::uint64_t seed = 0; seed < 3; ++seed) CHECK(small.colorful_total(seed) == ref.colorful_total(seed));
  std::size_t most = 0;
  for (const auto& w : small.worker_metrics())
    for (const auto& s : w.steps) {
      most = std::max(most, s.chunks_received);
      if (s.chunks_received > 2) CHECK(s.recv_buffer_bytes < s.payload_bytes);
    }
  CHECK(most > 2);
  check_buffers(small);

  // all-to-all holds every peer at once; the pipeline never more than one step
  std::size_t peak_p = 0, peak_n = 0;
  for (const auto& w : small.worker_metrics()) peak_p = std::max(peak_p, w.memory.peak_recv());
  for (const auto& w : ref.worker_metrics()) peak_n = std::max(peak_n, w.memory.peak_recv());
  CHECK(peak_p <= peak_n);
  CHECK(max_payload(ref.worker_metrics()) == peak_n);
}

TEST_CASE("socket transport gives the same totals") {
  const auto g = testing::erdos_renyi(40, 0.2, 6);
  const auto t = named_template("u5-2");
  auto cfg = config(3, Mode::pipeline);
  cfg.transport = TransportKind::socket;
  Cluster s(g, t, cfg);
  Cluster i(g, t, config(3, Mode::pipeline));
  for (std::uint64_t seed = 0; seed < 2; ++seed) CHECK(s.colorful_total(seed) == i.colorful_total(seed));
}

TEST_CASE("repeated runs are identical") {
  const auto g = generate_rmat(256, 1500, 0.6, 2);
  const auto t = named_template("u7-2");
  for (bool lb : {true, false}) {
    Cluster a(g, t, config(4, Mode::adaptive, lb, 4));
    Cluster b(g, t, config(4, Mode::adaptive, lb, 4));
    for (std::uint64_t seed = 0; seed < 2; ++seed) {
      const auto x = a.colorful_total(seed);
      CHECK(x == b.colorful_total(seed));
      CHECK(x == a.colorful_total(seed));
    }
  }
}

TEST_CASE("remote neighbour entries add up to the cut adjacency") {
  const auto g = testing::erdos_renyi(70, 0.1, 13);
  Cluster c(g, testing::path_template(3), config(4, Mode::naive));
  std::size_t cut = 0;
  for (auto [u, v] : g.edge_list()) cut += c.partition().owner[u] != c.partition().owner[v];
  std::size_t counted = 0;
  for (WorkerId p = 0; p < 4; ++p)
    for (std::size_t w = 1; w < 4; ++w) counted += c.worker(p).remote_neighbor_entries(w);
  CHECK(counted == 2 * cut);
}

TEST_CASE("an engine needs a matching transport") {
  const auto g = testing::path_graph(4);
  const auto part = partition_random(g, 2, 1);
  const auto xplan = build_exchange_plan(g, part);
  const auto plan = partition_template(testing::edge_template());
  CHECK_THROWS_AS(WorkerEngine(g, part, xplan, plan, 0, nullptr, {}), std::invalid_argument);
  auto f = make_inproc_fabric(3);
  CHECK_THROWS_AS(WorkerEngine(g, part, xplan, plan, 0, f[0].get(), {}), std::invalid_argument);
  CHECK_THROWS_AS(Cluster(g, testing::edge_template(), config(0, Mode::naive)), std::invalid_argument);
}

TEST_CASE("isolated vertices take part") {
  const auto g = Graph::from_edges(6, std::vector<Edge>{{0, 1}});
  Cluster c(g, Template(1, {}, 0), config(2, Mode::naive));
  CHECK(c.colorful_total(1) == 6.0);
}
