#include "treelet/oracle.hpp"

#include <string>
#include <vector>

namespace treelet {

namespace {

struct Order {
  std::vector<VertexId> vertex;  // BFS order from template vertex 0
  std::vector<VertexId> parent;  // parent of vertex[i], unused for i = 0
};

Order bfs_order(const Template& t) {
  Order o;
  std::vector<bool> seen(t.size(), false);
  o.vertex.push_back(0);
  o.parent.push_back(0);
  seen[0] = true;
  for (std::size_t i = 0; i < o.vertex.size(); ++i)
    for (auto u : t.neighbors(o.vertex[i]))
      if (!seen[u]) {
        seen[u] = true;
        o.vertex.push_back(u);
        o.parent.push_back(o.vertex[i]);
      }
  return o;
}

class Backtrack {
 public:
  Backtrack(const Graph& g, const Template& t, std::span<const Color> colors)
      : g_(g), order_(bfs_order(t)), colors_(colors), image_(t.size()), used_(g.num_vertices(), false) {}

  std::uint64_t run() {
    std::uint64_t n = 0;
    for (VertexId v = 0; v < g_.num_vertices(); ++v) n += place_at(0, v);
    return n;
  }

 private:
  std::uint64_t place_at(std::size_t i, VertexId v) {
    if (used_[v]) return 0;
    if (!colors_.empty() && (color_mask_ >> colors_[v] & 1)) return 0;
    if (i + 1 == order_.vertex.size()) return 1;
    used_[v] = true;
    if (!colors_.empty()) color_mask_ |= std::uint64_t{1} << colors_[v];
    image_[order_.vertex[i]] = v;
    const VertexId anchor = image_[order_.parent[i + 1]];
    std::uint64_t n = 0;
    for (auto u : g_.neighbors(anchor)) n += place_at(i + 1, u);
    used_[v] = false;
    if (!colors_.empty()) color_mask_ &= ~(std::uint64_t{1} << colors_[v]);
    return n;
  }

  const Graph& g_;
  Order order_;
  std::span<const Color> colors_;
  std::vector<VertexId> image_;
  std::vector<bool> used_;
  std::uint64_t color_mask_ = 0;
};

void check(const Graph& g, const Template& t, const OracleLimits& limits) {
  if (g.num_vertices() > limits.max_graph_vertices)
    throw OracleLimitError("oracle refuses graphs with more than " + std::to_string(limits.max_graph_vertices) +
                           " vertices (got " + std::to_string(g.num_vertices()) + ")");
  if (t.size() > limits.max_template_vertices)
    throw OracleLimitError("oracle refuses templates with more than " + std::to_string(limits.max_template_vertices) +
                           " vertices (got " + std::to_string(t.size()) + ")");
}

Graph template_graph(const Template& t) { return Graph::from_edges(t.size(), t.edges()); }

}  // namespace

std::uint64_t count_edge_preserving_maps(const Graph& g, const Template& t, std::span<const Color> colors) {
  if (!colors.empty() && colors.size() != g.num_vertices())
    throw std::invalid_argument("coloring size does not match the graph");
  if (t.size() > g.num_vertices()) return 0;
  for (auto c : colors)
    if (c >= 64) throw std::invalid_argument("oracle supports colors below 64");
  return Backtrack(g, t, colors).run();
}

std::uint64_t automorphism_count(const Template& t) { return count_edge_preserving_maps(template_graph(t), t); }

std::uint64_t count_embeddings_exact(const Graph& g, const Template& t, OracleLimits limits) {
  check(g, t, limits);
  return count_edge_preserving_maps(g, t) / automorphism_count(t);
}

std::uint64_t count_colorful_exact(const Graph& g, const Template& t, std::span<const Color> colors,
                                   OracleLimits limits) {
  check(g, t, limits);
  return count_edge_preserving_maps(g, t, colors) / automorphism_count(t);
}

EmbeddingCount count_embeddings(const Graph& g, const Template& t, std::span<const Color> colors, OracleLimits limits) {
  return {count_embeddings_exact(g, t, limits), count_colorful_exact(g, t, colors, limits)};
}

}  // namespace treelet
