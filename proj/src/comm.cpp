#include "treelet/comm.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

namespace treelet {

RingSchedule ring_schedule(std::size_t workers) {
  if (workers < 2) throw std::invalid_argument("ring_schedule: need at least 2 workers, got " + std::to_string(workers));
  return RingSchedule(workers);
}

std::uint32_t encode_meta(std::uint32_t sender, std::uint32_t receiver, std::uint32_t offset) {
  if (sender >= kMaxMetaWorkers || receiver >= kMaxMetaWorkers)
    throw std::out_of_range("meta id: worker id exceeds 12 bits");
  if (offset > kMaxMetaOffset) throw std::out_of_range("meta id: chunk offset exceeds 8 bits");
  return sender << (kMetaReceiverBits + kMetaOffsetBits) | receiver << kMetaOffsetBits | offset;
}

MetaId decode_meta(std::uint32_t meta) noexcept {
  return {meta >> (kMetaReceiverBits + kMetaOffsetBits), (meta >> kMetaOffsetBits) & (kMaxMetaWorkers - 1),
          meta & kMaxMetaOffset};
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t x) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(x >> s));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t x) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(x >> s));
}

std::uint32_t get_u32(const std::uint8_t* p) noexcept {
  return std::uint32_t{p[0]} << 24 | std::uint32_t{p[1]} << 16 | std::uint32_t{p[2]} << 8 | p[3];
}

std::uint64_t get_u64(const std::uint8_t* p) noexcept {
  return std::uint64_t{get_u32(p)} << 32 | get_u32(p + 4);
}

bool row_is_zero(std::span<const Count> row) noexcept {
  return std::all_of(row.begin(), row.end(), [](Count x) { return x == 0.0; });
}

namespace {

std::size_t nonzeros(std::span<const Count> row) noexcept {
  return static_cast<std::size_t>(std::count_if(row.begin(), row.end(), [](Count x) { return x != 0.0; }));
}

bool use_dense(std::size_t nnz, std::size_t width) noexcept { return 2 * nnz > width; }

}  // namespace

std::size_t encoded_row_size(std::span<const Count> row) noexcept {
  const auto nnz = nonzeros(row);
  return 12 + (use_dense(nnz, row.size()) ? 8 * row.size() : 12 * nnz);
}

void encode_row(std::vector<std::uint8_t>& out, VertexId v, std::span<const Count> row) {
  const auto nnz = nonzeros(row);
  put_u64(out, v);
  if (use_dense(nnz, row.size())) {
    put_u32(out, static_cast<std::uint32_t>(nnz) | kDenseFlag);
    for (Count x : row) put_u64(out, std::bit_cast<std::uint64_t>(x));
    return;
  }
  put_u32(out, static_cast<std::uint32_t>(nnz));
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (row[i] == 0.0) continue;
    put_u32(out, static_cast<std::uint32_t>(i));
    put_u64(out, std::bit_cast<std::uint64_t>(row[i]));
  }
}

std::size_t decode_rows(std::span<const std::uint8_t> payload, RemoteRows& into) {
  const std::size_t width = into.width();
  std::size_t pos = 0, rows = 0;
  auto need = [&](std::size_t n) {
    if (payload.size() - pos < n)
      throw ProtocolError("truncated row payload from worker " + std::to_string(into.sender()));
  };
  while (pos < payload.size()) {
    need(12);
    const std::uint64_t v = get_u64(payload.data() + pos);
    const std::uint32_t head = get_u32(payload.data() + pos + 8);
    pos += 12;
    if (v > std::numeric_limits<VertexId>::max())
      throw ProtocolError("vertex id " + std::to_string(v) + " out of range in payload");
    auto row = into.insert(static_cast<VertexId>(v));
    if (head & kDenseFlag) {
      need(8 * width);
      for (std::size_t i = 0; i < width; ++i, pos += 8) row[i] = std::bit_cast<Count>(get_u64(payload.data() + pos));
    } else {
      const std::size_t nnz = head;
      need(12 * nnz);
      for (std::size_t j = 0; j < nnz; ++j, pos += 12) {
        const std::uint32_t idx = get_u32(payload.data() + pos);
        if (idx >= width) throw ProtocolError("subset index " + std::to_string(idx) + " exceeds row width");
        row[idx] = std::bit_cast<Count>(get_u64(payload.data() + pos + 4));
      }
    }
    ++rows;
  }
  return rows;
}

std::size_t ExchangePlan::total_rows() const noexcept {
  std::size_t n = 0;
  for (const auto& l : lists_) n += l.size();
  return n;
}

ExchangePlan build_exchange_plan(const Graph& g, const Partition& part) {
  const std::size_t P = part.num_workers;
  ExchangePlan plan(P);
  if (P <= 1) return plan;
  std::vector<WorkerId> seen;
  for (VertexId v = 0; v < g.num_vertices(); ++v) {
    const WorkerId p = part.owner[v];
    seen.clear();
    for (auto u : g.neighbors(v)) {
      const WorkerId q = part.owner[u];
      if (q != p) seen.push_back(q);
    }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (auto q : seen) plan.rows(p, q).push_back(v);  // v ascending, so lists stay sorted
  }
  return plan;
}

ExchangeMode select_mode(const ModePolicy& policy, const SubTemplate& entry, const CostModel& cost) noexcept {
  if (entry.size <= 1) return ExchangeMode::alltoall;
  switch (policy.mode) {
    case Mode::naive:
      return ExchangeMode::alltoall;
    case Mode::pipeline:
      return ExchangeMode::pipeline;
    case Mode::adaptive:
      break;
  }
  return cost.intensity >= policy.threshold ? ExchangeMode::pipeline : ExchangeMode::alltoall;
}

std::vector<ExchangeMode> resolve_modes(const ModePolicy& policy, const TemplatePlan& plan) {
  const auto cost = cost_metrics(plan, plan.template_size(), calibrated_convention());
  std::vector<ExchangeMode> modes;
  modes.reserve(plan.entries().size());
  for (const auto& e : plan.entries()) modes.push_back(select_mode(policy, e, cost));
  return modes;
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::naive:
      return "naive";
    case Mode::pipeline:
      return "pipeline";
    case Mode::adaptive:
      return "adaptive";
  }
  return "?";
}

std::string to_string(ExchangeMode m) { return m == ExchangeMode::pipeline ? "pipeline" : "alltoall"; }

Mode parse_mode(const std::string& s) {
  if (s == "naive") return Mode::naive;
  if (s == "pipeline") return Mode::pipeline;
  if (s == "adaptive") return Mode::adaptive;
  throw std::invalid_argument("unknown mode '" + s + "' (expected naive, pipeline or adaptive)");
}

}  // namespace treelet
