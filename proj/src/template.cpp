#include "treelet/template.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <tuple>

namespace treelet {

namespace {

bool in_mask(VertexMask m, VertexId v) { return (m >> v) & 1U; }

}  // namespace

Template::Template(std::size_t k, std::vector<Edge> edges, VertexId root) : edges_(std::move(edges)), root_(root) {
  if (k == 0) throw NotATreeError("template must have at least one vertex");
  if (k > kMaxTemplateSize)
    throw std::invalid_argument("template larger than " + std::to_string(kMaxTemplateSize) + " vertices");
  if (root >= k) throw std::invalid_argument("template root " + std::to_string(root) + " is not a vertex");
  if (edges_.size() != k - 1)
    throw NotATreeError("a tree on " + std::to_string(k) + " vertices has " + std::to_string(k - 1) +
                        " edges, got " + std::to_string(edges_.size()));
  adjacency_.assign(k, {});
  for (auto [u, v] : edges_) {
    if (u >= k || v >= k) throw std::invalid_argument("template edge endpoint out of range");
    if (u == v) throw NotATreeError("template has a self-loop");
    adjacency_[u].push_back(v);
    adjacency_[v].push_back(u);
  }
  for (auto& nb : adjacency_) {
    std::sort(nb.begin(), nb.end());
    if (std::adjacent_find(nb.begin(), nb.end()) != nb.end()) throw NotATreeError("template has a repeated edge");
  }
  // k-1 edges plus connectivity implies acyclic.
  std::vector<bool> seen(k, false);
  std::vector<VertexId> stack{0};
  seen[0] = true;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    for (auto v : adjacency_[u])
      if (!seen[v]) {
        seen[v] = true;
        ++reached;
        stack.push_back(v);
      }
  }
  if (reached != k) throw NotATreeError("template is disconnected or contains a cycle");
}

Template parse_template(std::istream& in, RootChoice root) {
  auto loaded = parse_edge_list(in);
  const auto& g = loaded.graph;
  if (loaded.dropped_duplicates + loaded.dropped_self_loops > 0)
    throw NotATreeError("template contains self-loops or repeated edges");
  return Template(g.num_vertices(), g.edge_list(), root.vertex);
}

Template load_template(const std::filesystem::path& path, RootChoice root) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_template(in, root);
}

void write_template(std::ostream& out, const Template& t) {
  out << t.size() << ' ' << t.edges().size() << '\n';
  for (auto [u, v] : t.edges()) out << u << ' ' << v << '\n';
}

std::string canonical_rooted_form(const Template& t, VertexId root, VertexMask alive) {
  std::vector<std::string> child_codes;
  const VertexMask rest = alive & ~(VertexMask{1} << root);
  for (auto c : t.neighbors(root))
    if (in_mask(rest, c)) child_codes.push_back(canonical_rooted_form(t, c, rest));
  std::sort(child_codes.begin(), child_codes.end());
  std::string code = "(";
  for (const auto& c : child_codes) code += c;
  code += ')';
  return code;
}

VertexMask subtree_mask(const Template& t, VertexId child, VertexId parent, VertexMask alive) {
  VertexMask out = 0;
  std::vector<std::pair<VertexId, VertexId>> stack{{child, parent}};
  while (!stack.empty()) {
    auto [u, from] = stack.back();
    stack.pop_back();
    out |= VertexMask{1} << u;
    for (auto w : t.neighbors(u))
      if (w != from && in_mask(alive, w)) stack.emplace_back(w, u);
  }
  return out;
}

namespace {

struct PlanBuilder {
  const Template& t;
  std::vector<SubTemplate>& entries;
  std::map<std::string, std::size_t> by_code;

  std::size_t build(VertexId root, VertexMask alive) {
    auto code = canonical_rooted_form(t, root, alive);
    if (auto it = by_code.find(code); it != by_code.end()) return it->second;

    const std::size_t index = entries.size();
    by_code.emplace(code, index);
    entries.push_back({});
    {
      auto& e = entries.back();
      e.size = static_cast<std::size_t>(std::popcount(alive));
      e.root = root;
      e.vertices = alive;
      e.code = std::move(code);
    }
    if (std::popcount(alive) == 1) return index;

    const VertexMask rest = alive & ~(VertexMask{1} << root);
    std::vector<std::tuple<std::string, int, VertexId>> children;
    for (auto c : t.neighbors(root))
      if (in_mask(rest, c)) {
        const auto sub = subtree_mask(t, c, root, alive);
        children.emplace_back(canonical_rooted_form(t, c, rest), std::popcount(sub), c);
      }
    std::sort(children.begin(), children.end());
    const VertexId cut = std::get<2>(children.front());
    const VertexMask passive_mask = subtree_mask(t, cut, root, alive);
    const VertexMask active_mask = alive & ~passive_mask;

    const auto active = build(root, active_mask);
    const auto passive = build(cut, passive_mask);
    auto& e = entries[index];
    e.active = active;
    e.passive = passive;
    e.cut_neighbor = cut;
    return index;
  }
};

}  // namespace

TemplatePlan partition_template(const Template& t) {
  TemplatePlan plan;
  plan.template_ = t;
  PlanBuilder builder{plan.template_, plan.entries_, {}};
  builder.build(t.root(), t.all_vertices());

  auto& entries = plan.entries_;
  std::vector<bool> visited(entries.size(), false);
  auto visit = [&](auto&& self, std::size_t i) -> void {
    if (visited[i]) return;
    visited[i] = true;
    if (!entries[i].is_leaf()) {
      self(self, entries[i].active);
      self(self, entries[i].passive);
    }
    plan.order_.push_back(i);
  };
  visit(visit, 0);

  // Parents precede children in the reversed order, so multiplicities flow downwards.
  entries[0].multiplicity = 1;
  for (auto it = plan.order_.rbegin(); it != plan.order_.rend(); ++it) {
    const auto& e = entries[*it];
    if (e.is_leaf()) continue;
    entries[e.active].multiplicity += e.multiplicity;
    entries[e.passive].multiplicity += e.multiplicity;
  }

  plan.last_use_.assign(entries.size(), 0);
  for (std::size_t pos = 0; pos < plan.order_.size(); ++pos) {
    const auto& e = entries[plan.order_[pos]];
    plan.last_use_[plan.order_[pos]] = std::max(plan.last_use_[plan.order_[pos]], pos);
    if (e.is_leaf()) continue;
    plan.last_use_[e.active] = std::max(plan.last_use_[e.active], pos);
    plan.last_use_[e.passive] = std::max(plan.last_use_[e.passive], pos);
  }
  plan.last_use_[0] = plan.order_.size() - 1;

  for (std::size_t i = 0; i < entries.size(); ++i)
    if (!entries[i].is_leaf()) entries[i].over_count = over_count_factor(plan, i);

  const auto root_code = entries[0].code;
  std::uint32_t orbit = 0;
  for (VertexId u = 0; u < t.size(); ++u)
    if (canonical_rooted_form(t, u) == root_code) ++orbit;
  plan.root_orbit_ = orbit;
  return plan;
}

std::uint32_t over_count_factor(const TemplatePlan& plan, std::size_t entry) {
  const auto& e = plan.entry(entry);
  if (e.is_leaf()) return 1;
  const auto& t = plan.source();
  const auto& passive_code = plan.entry(e.passive).code;
  const VertexMask rest = e.vertices & ~(VertexMask{1} << e.root);
  std::uint32_t d = 0;
  for (auto c : t.neighbors(e.root))
    if (in_mask(rest, c) && canonical_rooted_form(t, c, rest) == passive_code) ++d;
  return d;
}

std::string to_string(IndexSet s) {
  switch (s) {
    case IndexSet::all:
      return "all";
    case IndexSet::non_leaf:
      return "non_leaf";
    case IndexSet::non_leaf_non_root:
      return "non_leaf_non_root";
  }
  return "?";
}

std::string to_string(Counting c) { return c == Counting::distinct ? "distinct" : "with_multiplicity"; }

CostModel cost_metrics(const TemplatePlan& plan, std::size_t k, CostConvention convention) {
  CostModel m;
  m.convention = convention;
  const auto& entries = plan.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (convention.index_set != IndexSet::all && e.is_leaf()) continue;
    if (convention.index_set == IndexSet::non_leaf_non_root && i == 0) continue;
    const double weight = convention.counting == Counting::with_multiplicity ? e.multiplicity : 1.0;
    const double width = static_cast<double>(binomial(k, e.size));
    m.memory += weight * width;
    if (!e.is_leaf())
      m.computation += weight * width * static_cast<double>(binomial(e.size, plan.entry(e.active).size));
  }
  m.intensity = m.memory > 0.0 ? m.computation / m.memory : 0.0;
  return m;
}

namespace {

struct NamedShape {
  const char* name;
  std::size_t k;
  std::vector<Edge> edges;
};

const std::vector<NamedShape>& named_shapes() {
  static const std::vector<NamedShape> shapes = {
      {"u3-1", 3, {{0, 1}, {1, 2}}},
      {"u5-2", 5, {{0, 1}, {1, 2}, {2, 3}, {2, 4}}},
      {"u7-2", 7, {{0, 1}, {0, 2}, {1, 3}, {1, 4}, {2, 5}, {2, 6}}},
      {"u10-2", 10, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 5}, {5, 6}, {5, 7}, {6, 8}, {8, 9}}},
      {"u12-1", 12, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {3, 5}, {3, 6}, {3, 7}, {3, 8}, {3, 9}, {3, 10}, {3, 11}}},
      {"u12-2", 12, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 5}, {1, 6}, {5, 7}, {6, 8}, {6, 9}, {6, 10}, {7, 11}}},
      {"u13", 13, {{0, 1}, {0, 2}, {1, 3}, {2, 4}, {2, 5}, {3, 6}, {3, 7}, {3, 8}, {6, 9}, {6, 10}, {7, 11}, {9, 12}}},
      {"u14",
       14,
       {{0, 1}, {0, 2}, {1, 3}, {1, 4}, {3, 5}, {3, 6}, {5, 7}, {5, 8}, {7, 9}, {7, 10}, {8, 11}, {9, 12}, {12, 13}}},
      {"u15-1",
       15,
       {{0, 1}, {0, 2}, {1, 3}, {3, 4}, {4, 5}, {4, 6}, {5, 7}, {5, 8}, {5, 9}, {7, 10}, {7, 11}, {8, 12}, {10, 13},
        {13, 14}}},
      {"u15-2",
       15,
       {{0, 1}, {0, 2}, {1, 3}, {1, 4}, {2, 5}, {3, 6}, {3, 7}, {4, 8}, {5, 9}, {6, 10}, {7, 11}, {10, 12}, {12, 13},
        {13, 14}}},
  };
  return shapes;
}

}  // namespace

std::vector<std::string> named_template_names() {
  std::vector<std::string> out;
  for (const auto& s : named_shapes()) out.emplace_back(s.name);
  return out;
}

Template named_template(const std::string& name) {
  for (const auto& s : named_shapes())
    if (name == s.name) return Template(s.k, s.edges, 0);
  throw std::invalid_argument("unknown template name '" + name + "'");
}

std::span<const ReferenceCost> reference_costs() {
  static const std::vector<ReferenceCost> rows = {
      {"u3-1", 3, 6},          {"u5-2", 25, 70},        {"u7-2", 147, 434},       {"u10-2", 1047, 5610},
      {"u12-1", 4082, 24552},  {"u12-2", 3135, 38016},  {"u13", 4823, 109603},    {"u14", 7371, 242515},
      {"u15-1", 12383, 753375}, {"u15-2", 15773, 617820},
  };
  return rows;
}

CalibrationResult calibrate_cost_convention(std::span<const ReferenceCost> reference) {
  std::vector<TemplatePlan> plans;
  for (const auto& row : reference) plans.push_back(partition_template(named_template(row.name)));

  CalibrationResult best{{}, std::numeric_limits<double>::infinity()};
  for (auto set : {IndexSet::all, IndexSet::non_leaf, IndexSet::non_leaf_non_root})
    for (auto counting : {Counting::distinct, Counting::with_multiplicity}) {
      const CostConvention conv{set, counting};
      double err = 0.0;
      for (std::size_t i = 0; i < reference.size(); ++i) {
        const auto m = cost_metrics(plans[i], plans[i].template_size(), conv);
        err += std::abs(m.memory - reference[i].memory) / reference[i].memory;
        err += std::abs(m.computation - reference[i].computation) / reference[i].computation;
      }
      if (err < best.total_relative_error) best = {conv, err};
    }
  return best;
}

CostConvention calibrated_convention() {
  static const CostConvention conv = calibrate_cost_convention(reference_costs()).convention;
  return conv;
}

}  // namespace treelet
