#include "treelet/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <unordered_set>

namespace treelet {

Graph Graph::from_edges(std::size_t n_vertices, std::span<const Edge> edges,
                        std::size_t* dropped_self_loops, std::size_t* dropped_duplicates) {
  std::vector<Edge> canon;
  canon.reserve(edges.size());
  std::size_t loops = 0;
  for (auto [u, v] : edges) {
    if (u >= n_vertices || v >= n_vertices)
      throw std::out_of_range("edge endpoint out of range");
    if (u == v) {
      ++loops;
      continue;
    }
    canon.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(canon.begin(), canon.end());
  auto last = std::unique(canon.begin(), canon.end());
  const std::size_t dups = static_cast<std::size_t>(canon.end() - last);
  canon.erase(last, canon.end());

  Graph g;
  g.offsets_.assign(n_vertices + 1, 0);
  for (auto [u, v] : canon) {
    ++g.offsets_[u + 1];
    ++g.offsets_[v + 1];
  }
  for (std::size_t i = 0; i < n_vertices; ++i) g.offsets_[i + 1] += g.offsets_[i];
  g.adjacency_.resize(2 * canon.size());
  std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
  for (auto [u, v] : canon) {
    g.adjacency_[cursor[u]++] = v;
    g.adjacency_[cursor[v]++] = u;
  }
  for (std::size_t v = 0; v < n_vertices; ++v)
    std::sort(g.adjacency_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[v]),
              g.adjacency_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[v + 1]));

  if (dropped_self_loops) *dropped_self_loops = loops;
  if (dropped_duplicates) *dropped_duplicates = dups;
  return g;
}

bool Graph::has_edge(VertexId u, VertexId v) const noexcept {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<Edge> Graph::edge_list() const {
  std::vector<Edge> out;
  out.reserve(num_edges());
  for (VertexId u = 0; u < num_vertices(); ++u)
    for (VertexId v : neighbors(u))
      if (u < v) out.emplace_back(u, v);
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Parses exactly two unsigned integers separated by whitespace.
bool parse_pair(std::string_view line, std::uint64_t& a, std::uint64_t& b) {
  const char* p = line.data();
  const char* end = line.data() + line.size();
  auto skip_ws = [&] {
    while (p < end && (*p == ' ' || *p == '\t')) ++p;
  };
  skip_ws();
  auto r1 = std::from_chars(p, end, a);
  if (r1.ec != std::errc() || r1.ptr == p) return false;
  p = r1.ptr;
  if (p == end || (*p != ' ' && *p != '\t')) return false;
  skip_ws();
  auto r2 = std::from_chars(p, end, b);
  if (r2.ec != std::errc() || r2.ptr == p) return false;
  p = r2.ptr;
  skip_ws();
  return p == end;
}

}  // namespace

LoadedGraph parse_edge_list(std::istream& in) {
  std::string raw;
  std::size_t line_no = 0;
  bool have_header = false;
  std::uint64_t n = 0, m = 0;
  std::vector<Edge> edges;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    std::uint64_t a = 0, b = 0;
    if (!parse_pair(line, a, b))
      throw ParseError(line_no, "expected two non-negative integers, got '" + std::string(line) + "'");
    if (!have_header) {
      n = a;
      m = b;
      if (n > std::numeric_limits<VertexId>::max()) throw FormatError("vertex count too large");
      have_header = true;
      edges.reserve(m);
      continue;
    }
    if (a >= n || b >= n)
      throw FormatError("line " + std::to_string(line_no) + ": vertex id " + std::to_string(std::max(a, b)) +
                        " >= declared vertex count " + std::to_string(n));
    if (edges.size() == m)
      throw FormatError("line " + std::to_string(line_no) + ": more edges than the declared " + std::to_string(m));
    edges.emplace_back(static_cast<VertexId>(a), static_cast<VertexId>(b));
  }
  if (!have_header) throw FormatError("missing 'n m' header");
  if (edges.size() != m)
    throw FormatError("declared " + std::to_string(m) + " edges, found " + std::to_string(edges.size()));
  LoadedGraph out;
  out.graph = Graph::from_edges(n, edges, &out.dropped_self_loops, &out.dropped_duplicates);
  return out;
}

LoadedGraph load_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_edge_list(in);
}

void write_edge_list(std::ostream& out, const Graph& g) {
  out << g.num_vertices() << ' ' << g.num_edges() << '\n';
  for (auto [u, v] : g.edge_list()) out << u << ' ' << v << '\n';
}

Partition partition_random(const Graph& g, std::size_t num_workers, std::uint64_t seed) {
  if (num_workers == 0) throw std::invalid_argument("partition_random: worker count must be >= 1");
  Partition p;
  p.num_workers = num_workers;
  p.owner.resize(g.num_vertices());
  p.local_vertices.resize(num_workers);
  for (VertexId v = 0; v < g.num_vertices(); ++v) {
    const auto w = static_cast<WorkerId>(mix64(seed, v) % num_workers);
    p.owner[v] = w;
    p.local_vertices[w].push_back(v);
  }
  return p;
}

RmatProbabilities rmat_probabilities(double skew) {
  if (!(skew >= 0.0 && skew <= 1.0)) throw std::invalid_argument("rmat skew must lie in [0, 1]");
  return {0.25 + 0.55 * skew, 0.25 - 0.15 * skew, 0.25 - 0.15 * skew, 0.25 - 0.25 * skew};
}

Graph generate_rmat(std::size_t n_vertices, std::size_t n_edges, double skew, std::uint64_t seed) {
  if (n_vertices < 2 || (n_vertices & (n_vertices - 1)) != 0)
    throw std::invalid_argument("generate_rmat: vertex count must be a power of two >= 2");
  const std::size_t max_edges = n_vertices * (n_vertices - 1) / 2;
  if (n_edges > max_edges / 2)
    throw std::invalid_argument("generate_rmat: edge count too close to the complete graph");
  const auto probs = rmat_probabilities(skew);
  int scale = 0;
  while ((std::size_t{1} << scale) < n_vertices) ++scale;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(n_edges * 2);
  std::vector<Edge> edges;
  edges.reserve(n_edges);
  const std::size_t max_attempts = 64 * n_edges + 1024;
  std::size_t attempts = 0;
  while (edges.size() < n_edges) {
    if (++attempts > max_attempts)
      throw std::runtime_error("generate_rmat: could not place the requested number of distinct edges");
    VertexId u = 0, v = 0;
    for (int level = 0; level < scale; ++level) {
      const double r = unit(rng);
      const VertexId bit = VertexId{1} << (scale - 1 - level);
      if (r < probs.a) {
      } else if (r < probs.a + probs.b) {
        v |= bit;
      } else if (r < probs.a + probs.b + probs.c) {
        u |= bit;
      } else {
        u |= bit;
        v |= bit;
      }
    }
    if (u == v) continue;
    const auto lo = std::min(u, v), hi = std::max(u, v);
    const std::uint64_t key = (std::uint64_t{lo} << 32) | hi;
    if (!seen.insert(key).second) continue;
    edges.emplace_back(lo, hi);
  }
  return Graph::from_edges(n_vertices, edges);
}

DegreeStats degree_stats(const Graph& g) {
  DegreeStats s;
  if (g.num_vertices() == 0) return s;
  for (VertexId v = 0; v < g.num_vertices(); ++v) s.maximum = std::max(s.maximum, g.degree(v));
  s.average = 2.0 * static_cast<double>(g.num_edges()) / static_cast<double>(g.num_vertices());
  return s;
}

}  // namespace treelet
