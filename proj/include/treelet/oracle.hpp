#pragma once

#include <cstdint>
#include <span>

#include "treelet/color_dp.hpp"
#include "treelet/graph.hpp"
#include "treelet/template.hpp"

namespace treelet {

struct OracleLimits {
  std::size_t max_graph_vertices = 50;
  std::size_t max_template_vertices = 7;
};

class OracleLimitError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct EmbeddingCount {
  std::uint64_t total = 0;
  std::uint64_t colorful = 0;
};

/// Injective maps V_T -> V_G that carry every template edge onto a graph edge.
std::uint64_t count_edge_preserving_maps(const Graph& g, const Template& t, std::span<const Color> colors = {});

/// |Aut(T)|, counted as edge-preserving maps of T onto itself.
std::uint64_t automorphism_count(const Template& t);

/// Non-induced copies (subgraphs of G isomorphic to T): maps / |Aut(T)|.
std::uint64_t count_embeddings_exact(const Graph& g, const Template& t, OracleLimits limits = {});

/// Copies whose vertices carry pairwise distinct colors.
std::uint64_t count_colorful_exact(const Graph& g, const Template& t, std::span<const Color> colors,
                                   OracleLimits limits = {});

EmbeddingCount count_embeddings(const Graph& g, const Template& t, std::span<const Color> colors,
                                OracleLimits limits = {});

}  // namespace treelet
