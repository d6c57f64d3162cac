#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "treelet/color_dp.hpp"
#include "treelet/graph.hpp"
#include "treelet/template.hpp"

namespace testing {

using namespace treelet;

inline Graph erdos_renyi(std::size_t n, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  std::vector<Edge> edges;
  for (VertexId u = 0; u < n; ++u)
    for (VertexId v = u + 1; v < n; ++v)
      if (coin(rng)) edges.emplace_back(u, v);
  return Graph::from_edges(n, edges);
}

inline Graph path_graph(std::size_t n) {
  std::vector<Edge> edges;
  for (VertexId v = 0; v + 1 < n; ++v) edges.emplace_back(v, v + 1);
  return Graph::from_edges(n, edges);
}

inline Graph star_graph(std::size_t leaves) {
  std::vector<Edge> edges;
  for (VertexId v = 1; v <= leaves; ++v) edges.emplace_back(0, v);
  return Graph::from_edges(leaves + 1, edges);
}

inline Graph complete_graph(std::size_t n) {
  std::vector<Edge> edges;
  for (VertexId u = 0; u < n; ++u)
    for (VertexId v = u + 1; v < n; ++v) edges.emplace_back(u, v);
  return Graph::from_edges(n, edges);
}

inline Graph triangle() { return complete_graph(3); }

inline Template edge_template() { return Template(2, {{0, 1}}); }
inline Template path_template(std::size_t k) {
  std::vector<Edge> e;
  for (VertexId v = 0; v + 1 < k; ++v) e.emplace_back(v, v + 1);
  return Template(k, e, 0);
}
inline Template star_template(std::size_t leaves, VertexId root = 0) {
  std::vector<Edge> e;
  for (VertexId v = 1; v <= leaves; ++v) e.emplace_back(0, v);
  return Template(leaves + 1, e, root);
}

/// Every rooted tree shape with k vertices (one representative per rooted isomorphism class).
inline std::vector<Template> rooted_trees(std::size_t k) {
  if (k == 1) return {Template(1, {}, 0)};
  std::vector<Template> out;
  std::set<std::string> seen;
  // Pruefer sequences enumerate every labelled tree.
  std::vector<std::uint32_t> seq(k - 2, 0);
  for (;;) {
    std::vector<std::uint32_t> deg(k, 1);
    for (auto x : seq) ++deg[x];
    std::vector<Edge> edges;
    auto d = deg;
    for (auto x : seq) {
      for (VertexId leaf = 0; leaf < k; ++leaf)
        if (d[leaf] == 1) {
          edges.emplace_back(leaf, x);
          --d[leaf];
          --d[x];
          break;
        }
    }
    VertexId a = k, b = k;
    for (VertexId v = 0; v < k; ++v)
      if (d[v] == 1) (a == k ? a : b) = v;
    edges.emplace_back(a, b);
    for (VertexId r = 0; r < k; ++r) {
      Template t(k, edges, r);
      if (seen.insert(canonical_rooted_form(t)).second) out.push_back(t);
    }
    std::size_t i = 0;
    while (i < seq.size() && ++seq[i] == k) seq[i++] = 0;
    if (i == seq.size()) break;
  }
  return out;
}

inline std::vector<Color> coloring_vector(std::size_t n, std::size_t k, std::uint64_t seed) {
  return random_coloring(n, k, seed).colors;
}

}  // namespace testing
