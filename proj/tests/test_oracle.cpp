#include <doctest.h>

#include "support.hpp"
#include "treelet/oracle.hpp"

using namespace treelet;

TEST_CASE("edges of a triangle") {
  CHECK(count_embeddings_exact(testing::triangle(), testing::edge_template()) == 3);
  CHECK(count_edge_preserving_maps(testing::triangle(), testing::edge_template()) == 6);
}

TEST_CASE("paths of three in a triangle") {
  CHECK(count_embeddings_exact(testing::triangle(), named_template("u3-1")) == 3);
}

TEST_CASE("automorphisms") {
  CHECK(automorphism_count(testing::edge_template()) == 2);
  CHECK(automorphism_count(testing::path_template(4)) == 2);
  CHECK(automorphism_count(testing::star_template(3)) == 6);
  CHECK(automorphism_count(Template(1, {}, 0)) == 1);
}

TEST_CASE("no edges, no copies") {
  const auto g = Graph::from_edges(5, std::vector<Edge>{});
  CHECK(count_embeddings_exact(g, testing::edge_template()) == 0);
  CHECK(count_embeddings_exact(g, Template(1, {}, 0)) == 5);
}

TEST_CASE("rainbow coloring makes every copy colorful") {
  const auto g = testing::complete_graph(5);
  const auto t = testing::star_template(2);
  const std::vector<Color> rainbow{0, 1, 2, 3, 4};
  const auto c = count_embeddings(g, t, rainbow);
  // choose a centre (5) and two leaves from the rest (6)
  CHECK(c.total == 30);
  CHECK(c.colorful == c.total);
  const std::vector<Color> mono(5, 0);
  CHECK(count_colorful_exact(g, t, mono) == 0);
}

TEST_CASE("edge on a triangle with one repeated color") {
  const std::vector<Color> colors{0, 1, 1};
  CHECK(count_colorful_exact(testing::triangle(), testing::edge_template(), colors) == 2);
}

TEST_CASE("star counts match the closed form") {
  const auto g = testing::star_graph(6);
  // centre plus any 3 of 6 leaves
  CHECK(count_embeddings_exact(g, testing::star_template(3)) == 20);
  CHECK(count_embeddings_exact(g, testing::path_template(3)) == 15);
}

TEST_CASE("limits") {
  const auto big = testing::path_graph(60);
  CHECK_THROWS_AS(count_embeddings_exact(big, testing::edge_template()), OracleLimitError);
  CHECK_THROWS_AS(count_embeddings_exact(testing::path_graph(10), testing::path_template(8)), OracleLimitError);
  OracleLimits wide{100, 8};
  CHECK(count_embeddings_exact(big, testing::edge_template(), wide) == 59);
  CHECK_THROWS_AS(count_colorful_exact(testing::triangle(), testing::edge_template(), std::vector<Color>{0, 1}),
                  std::invalid_argument);
}
