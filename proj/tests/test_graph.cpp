#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "support.hpp"
#include "treelet/graph.hpp"

using namespace treelet;

namespace {

LoadedGraph parse(const std::string& text) {
  std::istringstream in(text);
  return parse_edge_list(in);
}

void check_invariants(const Graph& g) {
  std::size_t degree_sum = 0;
  for (VertexId v = 0; v < g.num_vertices(); ++v) {
    const auto nb = g.neighbors(v);
    degree_sum += nb.size();
    CHECK(std::is_sorted(nb.begin(), nb.end()));
    CHECK(std::adjacent_find(nb.begin(), nb.end()) == nb.end());
    for (auto u : nb) {
      CHECK(u != v);
      CHECK(g.has_edge(u, v));
    }
  }
  CHECK(degree_sum == 2 * g.num_edges());
}

}  // namespace

TEST_CASE("triangle file") {
  const auto lg = parse("3 3\n0 1\n1 2\n0 2\n");
  const auto& g = lg.graph;
  CHECK(g.num_vertices() == 3);
  CHECK(g.num_edges() == 3);
  for (VertexId v = 0; v < 3; ++v) CHECK(g.degree(v) == 2);
  check_invariants(g);
}

TEST_CASE("duplicate edge dropped and reported") {
  const auto lg = parse("2 2\n0 1\n0 1\n");
  CHECK(lg.graph.num_edges() == 1);
  CHECK(lg.dropped_duplicates == 1);
  CHECK(lg.dropped_self_loops == 0);
}

TEST_CASE("reversed duplicate counts as duplicate") {
  const auto lg = parse("2 2\n0 1\n1 0\n");
  CHECK(lg.graph.num_edges() == 1);
  CHECK(lg.dropped_duplicates == 1);
}

TEST_CASE("self loop dropped and reported") {
  const auto lg = parse("2 1\n0 0\n");
  CHECK(lg.graph.num_edges() == 0);
  CHECK(lg.dropped_self_loops == 1);
}

TEST_CASE("comments and blank lines") {
  const auto lg = parse("# header next\n3 2\n\n0 1\n# mid\n1 2\n");
  CHECK(lg.graph.num_edges() == 2);
}

TEST_CASE("malformed line gives line number") {
  try {
    parse("3 2\n0 1\n1 x\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("format errors") {
  CHECK_THROWS_AS(parse("3 1\n0 3\n"), FormatError);
  CHECK_THROWS_AS(parse("3 2\n0 1\n"), FormatError);
  CHECK_THROWS_AS(parse("3 1\n0 1\n1 2\n"), FormatError);
  CHECK_THROWS_AS(parse("# only a comment\n"), FormatError);
  CHECK_THROWS_AS(parse("3 1\n-1 2\n"), ParseError);
}

TEST_CASE("write then parse round trip") {
  const auto g = testing::erdos_renyi(40, 0.15, 3);
  std::stringstream buf;
  write_edge_list(buf, g);
  const auto back = parse_edge_list(buf).graph;
  CHECK(back.edge_list() == g.edge_list());
}

TEST_CASE("partition with one worker") {
  const auto g = testing::erdos_renyi(50, 0.1, 1);
  const auto part = partition_random(g, 1, 9);
  for (auto o : part.owner) CHECK(o == 0);
  CHECK(part.local_vertices[0].size() == 50);
}

TEST_CASE("partition is deterministic and covers every vertex once") {
  const auto g = Graph::from_edges(1000, std::vector<Edge>{});
  const auto a = partition_random(g, 4, 77);
  const auto b = partition_random(g, 4, 77);
  CHECK(a.owner == b.owner);
  std::vector<int> seen(1000, 0);
  for (std::size_t p = 0; p < 4; ++p)
    for (auto v : a.local_vertices[p]) {
      CHECK(a.owner[v] == p);
      ++seen[v];
    }
  for (int s : seen) CHECK(s == 1);
  CHECK_THROWS_AS(partition_random(g, 0, 1), std::invalid_argument);
}

TEST_CASE("partition sizes concentrate") {
  const auto g = Graph::from_edges(10000, std::vector<Edge>{});
  const auto part = partition_random(g, 4, 5);
  const double sd = std::sqrt(10000 * 0.25 * 0.75);
  for (const auto& lv : part.local_vertices) CHECK(std::abs(double(lv.size()) - 2500.0) <= 4 * sd);
}

TEST_CASE("neighbour lists split by owner reconstruct the full list") {
  const auto g = testing::erdos_renyi(60, 0.1, 4);
  const auto part = partition_random(g, 3, 8);
  for (VertexId v = 0; v < g.num_vertices(); ++v) {
    std::multiset<VertexId> merged;
    for (WorkerId p = 0; p < 3; ++p)
      for (auto u : g.neighbors(v))
        if (part.owner[u] == p) merged.insert(u);
    CHECK(merged == std::multiset<VertexId>(g.neighbors(v).begin(), g.neighbors(v).end()));
  }
}

TEST_CASE("rmat is deterministic and simple") {
  const auto a = generate_rmat(1 << 10, 1 << 13, 0.6, 12);
  const auto b = generate_rmat(1 << 10, 1 << 13, 0.6, 12);
  CHECK(a.edge_list() == b.edge_list());
  CHECK(a.num_edges() == (1u << 13));
  check_invariants(a);
}

TEST_CASE("rmat skew raises max degree") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto hi = degree_stats(generate_rmat(1 << 14, 1 << 17, 0.8, seed));
    const auto lo = degree_stats(generate_rmat(1 << 14, 1 << 17, 0.1, seed));
    CHECK(hi.maximum > lo.maximum);
  }
}

TEST_CASE("uniform rmat degrees look binomial") {
  // Dispersion index: sum (d - mean)^2 / mean is roughly chi-square with n - 1 dof.
  const std::size_t n = 1 << 12;
  const auto g = generate_rmat(n, 1 << 14, 0.0, 2);
  const double mean = 2.0 * g.num_edges() / n;
  double stat = 0.0;
  for (VertexId v = 0; v < n; ++v) stat += (g.degree(v) - mean) * (g.degree(v) - mean) / mean;
  const double dof = n - 1.0;
  CHECK(std::abs(stat - dof) < 5.0 * std::sqrt(2.0 * dof));
}

TEST_CASE("rmat argument checks") {
  CHECK_THROWS_AS(generate_rmat(1000, 10, 0.5, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_rmat(1024, 10, 1.5, 1), std::invalid_argument);
  const auto p = rmat_probabilities(0.0);
  CHECK(p.a == doctest::Approx(0.25));
  CHECK(p.d == doctest::Approx(0.25));
}

TEST_CASE("degree stats") {
  auto st = degree_stats(testing::triangle());
  CHECK(st.average == doctest::Approx(2.0));
  CHECK(st.maximum == 2);
  st = degree_stats(testing::star_graph(5));
  CHECK(st.average == doctest::Approx(10.0 / 6.0));
  CHECK(st.maximum == 5);
  st = degree_stats(Graph::from_edges(3, std::vector<Edge>{}));
  CHECK(st.average == 0.0);
  CHECK(st.maximum == 0);
}
