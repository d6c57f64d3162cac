#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treelet/common.hpp"
#include "treelet/graph.hpp"

namespace treelet {

inline constexpr std::size_t kMaxTemplateSize = 32;

/// Bitmask over template vertices (template vertex i is bit i).
using VertexMask = std::uint64_t;

/// A rooted tree template. Vertices are 0..k-1.
class Template {
 public:
  Template() = default;

  /// Validates that the edges form a spanning tree on k vertices.
  Template(std::size_t k, std::vector<Edge> edges, VertexId root = 0);

  std::size_t size() const noexcept { return adjacency_.size(); }
  VertexId root() const noexcept { return root_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<VertexId>& neighbors(VertexId v) const { return adjacency_[v]; }

  VertexMask all_vertices() const noexcept {
    return size() >= 64 ? ~VertexMask{0} : (VertexMask{1} << size()) - 1;
  }

  Template with_root(VertexId root) const { return Template(size(), edges_, root); }

 private:
  std::vector<Edge> edges_;
  std::vector<std::vector<VertexId>> adjacency_;
  VertexId root_ = 0;
};

/// Root selection when loading: default is template vertex 0.
struct RootChoice {
  VertexId vertex = 0;
};

Template load_template(const std::filesystem::path& path, RootChoice root = {});
Template parse_template(std::istream& in, RootChoice root = {});

/// AHU code of the subtree induced by `alive` hanging from `root`: "(" + sorted child codes + ")".
std::string canonical_rooted_form(const Template& t, VertexId root, VertexMask alive);
inline std::string canonical_rooted_form(const Template& t, VertexId root) {
  return canonical_rooted_form(t, root, t.all_vertices());
}
inline std::string canonical_rooted_form(const Template& t) { return canonical_rooted_form(t, t.root()); }

/// Vertices of the component of `alive` that contains `child` once edge (parent, child) is cut.
VertexMask subtree_mask(const Template& t, VertexId child, VertexId parent, VertexMask alive);

inline constexpr std::size_t kNoChild = static_cast<std::size_t>(-1);

/// One entry of the recursive partition. Leaves (size 1) have no children.
struct SubTemplate {
  std::size_t size = 1;
  VertexId root = 0;
  VertexMask vertices = 0;
  std::size_t active = kNoChild;   // shares this root
  std::size_t passive = kNoChild;  // rooted at the cut neighbour
  VertexId cut_neighbor = 0;
  std::uint32_t over_count = 1;
  std::uint32_t multiplicity = 0;  // occurrences in the un-deduplicated recursion
  std::string code;

  bool is_leaf() const noexcept { return active == kNoChild; }
};

/// Deduplicated recursive partition of a template. entries()[0] is the full template.
class TemplatePlan {
 public:
  const Template& source() const noexcept { return template_; }
  std::size_t template_size() const noexcept { return template_.size(); }
  const std::vector<SubTemplate>& entries() const noexcept { return entries_; }
  const SubTemplate& entry(std::size_t i) const { return entries_.at(i); }
  const SubTemplate& full() const { return entries_.front(); }

  /// Children-before-parents order over entry indices; ends with the full template.
  const std::vector<std::size_t>& evaluation_order() const noexcept { return order_; }

  /// Number of template vertices u such that T rooted at u is isomorphic to T rooted at
  /// the chosen root. Each colorful copy is found once per such vertex by the root sum.
  std::uint32_t root_orbit() const noexcept { return root_orbit_; }

  /// Position in evaluation_order() after which entry i is no longer read.
  std::size_t last_use(std::size_t i) const { return last_use_.at(i); }

 private:
  friend TemplatePlan partition_template(const Template& t);
  Template template_;
  std::vector<SubTemplate> entries_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> last_use_;
  std::uint32_t root_orbit_ = 1;
};

/// Cuts the edge from each sub-template's root to its first child in (canonical code, size)
/// order, recursing until single vertices remain.
TemplatePlan partition_template(const Template& t);

/// Number of root children of the entry whose rooted subtree is isomorphic to its passive child.
std::uint32_t over_count_factor(const TemplatePlan& plan, std::size_t entry);

enum class IndexSet { all, non_leaf, non_leaf_non_root };
enum class Counting { distinct, with_multiplicity };

struct CostConvention {
  IndexSet index_set = IndexSet::all;
  Counting counting = Counting::distinct;
  friend bool operator==(const CostConvention&, const CostConvention&) = default;
};

std::string to_string(IndexSet s);
std::string to_string(Counting c);

struct CostModel {
  double memory = 0.0;       // sum C(k, |T_i|)
  double computation = 0.0;  // sum C(k, |T_i|) C(|T_i|, |T'_i|)
  double intensity = 0.0;    // computation / memory, 0 when memory is 0
  CostConvention convention;
};

CostModel cost_metrics(const TemplatePlan& plan, std::size_t k, CostConvention convention = {});

/// Reference (memory, computation) pair for a named template shape, used for calibration.
struct ReferenceCost {
  std::string name;
  double memory;
  double computation;
};

struct CalibrationResult {
  CostConvention convention;
  double total_relative_error = 0.0;
};

/// Picks the convention minimising the summed relative error of memory and computation
/// against `reference`, using the bundled shape of each named template.
CalibrationResult calibrate_cost_convention(std::span<const ReferenceCost> reference);

/// Reference cost rows for the bundled templates.
std::span<const ReferenceCost> reference_costs();

/// The convention that reproduces reference_costs(); cached after the first call.
CostConvention calibrated_convention();

/// Bundled template shapes (u3-1 ... u15-2), rooted at vertex 0.
std::vector<std::string> named_template_names();
Template named_template(const std::string& name);

void write_template(std::ostream& out, const Template& t);

}  // namespace treelet
