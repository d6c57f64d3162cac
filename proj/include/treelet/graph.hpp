#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "treelet/common.hpp"

namespace treelet {

using Edge = std::pair<VertexId, VertexId>;

/// Immutable undirected simple graph in CSR form. Every edge is stored in both
/// endpoint lists and each list is sorted ascending.
class Graph {
 public:
  Graph() = default;

  /// Builds from an arbitrary edge multiset. Self-loops and duplicates are dropped
  /// and counted in the optional out-parameters.
  static Graph from_edges(std::size_t n_vertices, std::span<const Edge> edges,
                          std::size_t* dropped_self_loops = nullptr,
                          std::size_t* dropped_duplicates = nullptr);

  std::size_t num_vertices() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_edges() const noexcept { return adjacency_.size() / 2; }

  std::span<const VertexId> neighbors(VertexId v) const noexcept {
    return {adjacency_.data() + offsets_[v], adjacency_.data() + offsets_[v + 1]};
  }
  std::size_t degree(VertexId v) const noexcept { return offsets_[v + 1] - offsets_[v]; }
  bool has_edge(VertexId u, VertexId v) const noexcept;

  /// Each undirected edge once, as (min, max), in ascending order.
  std::vector<Edge> edge_list() const;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<VertexId> adjacency_;
};

struct LoadedGraph {
  Graph graph;
  std::size_t dropped_self_loops = 0;
  std::size_t dropped_duplicates = 0;
};

/// Reads the "n m" header followed by m "u v" lines; '#' lines are comments.
LoadedGraph load_edge_list(const std::filesystem::path& path);
LoadedGraph parse_edge_list(std::istream& in);

void write_edge_list(std::ostream& out, const Graph& g);

/// Vertex-to-worker ownership.
struct Partition {
  std::size_t num_workers = 0;
  std::vector<WorkerId> owner;
  std::vector<std::vector<VertexId>> local_vertices;
};

/// owner(v) = mix64(seed, v) mod P.
Partition partition_random(const Graph& g, std::size_t num_workers, std::uint64_t seed);

/// R-MAT generator on n = 2^scale vertices. skew in [0, 1] interpolates the quadrant
/// probabilities from uniform (0.25 each) to (0.8, 0.1, 0.1, 0.0).
Graph generate_rmat(std::size_t n_vertices, std::size_t n_edges, double skew, std::uint64_t seed);

struct RmatProbabilities {
  double a, b, c, d;
};
RmatProbabilities rmat_probabilities(double skew);

struct DegreeStats {
  double average = 0.0;
  std::size_t maximum = 0;
};

DegreeStats degree_stats(const Graph& g);

}  // namespace treelet
