#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "treelet/color_dp.hpp"
#include "treelet/common.hpp"
#include "treelet/graph.hpp"
#include "treelet/template.hpp"

namespace treelet {

struct RingStep {
  WorkerId send_to;
  WorkerId recv_from;
};

/// Ring-ordered pairwise steps. At step w (1..P-1) worker p sends to (p+w) mod P
/// and receives from (p-w) mod P.
class RingSchedule {
 public:
  explicit RingSchedule(std::size_t workers) : workers_(workers) {}

  std::size_t workers() const noexcept { return workers_; }
  std::size_t steps() const noexcept { return workers_ - 1; }

  RingStep step(std::size_t w, WorkerId p) const noexcept {
    const auto P = static_cast<WorkerId>(workers_);
    const auto ww = static_cast<WorkerId>(w % workers_);
    return {(p + ww) % P, (p + P - ww) % P};
  }

 private:
  std::size_t workers_;
};

/// Throws std::invalid_argument when P < 2.
RingSchedule ring_schedule(std::size_t workers);

inline constexpr unsigned kMetaSenderBits = 12;
inline constexpr unsigned kMetaReceiverBits = 12;
inline constexpr unsigned kMetaOffsetBits = 8;
inline constexpr std::uint32_t kMaxMetaWorkers = 1u << kMetaSenderBits;
inline constexpr std::uint32_t kMaxMetaOffset = (1u << kMetaOffsetBits) - 1;

struct MetaId {
  std::uint32_t sender = 0;
  std::uint32_t receiver = 0;
  std::uint32_t offset = 0;
  friend bool operator==(const MetaId&, const MetaId&) = default;
};

/// sender << 20 | receiver << 8 | offset. Throws std::out_of_range if a field does not fit.
std::uint32_t encode_meta(std::uint32_t sender, std::uint32_t receiver, std::uint32_t offset);
MetaId decode_meta(std::uint32_t meta) noexcept;

// Row wire format (big-endian): u64 vertex, u32 nnz (high bit = dense), then either
// nnz (u32 index, f64 value) pairs or row-width f64 values.
inline constexpr std::uint32_t kDenseFlag = 0x80000000u;

bool row_is_zero(std::span<const Count> row) noexcept;

/// Appends one row; the caller is responsible for skipping all-zero rows.
void encode_row(std::vector<std::uint8_t>& out, VertexId v, std::span<const Count> row);
std::size_t encoded_row_size(std::span<const Count> row) noexcept;

/// Decodes every row of a payload into `into`. Returns the number of rows.
std::size_t decode_rows(std::span<const std::uint8_t> payload, RemoteRows& into);

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t x);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t x);
std::uint32_t get_u32(const std::uint8_t* p) noexcept;
std::uint64_t get_u64(const std::uint8_t* p) noexcept;

/// For every ordered worker pair (p -> q), the sorted p-owned vertices that have a
/// neighbour owned by q. Computed once and reused for every sub-template and coloring.
class ExchangePlan {
 public:
  ExchangePlan() = default;
  explicit ExchangePlan(std::size_t workers) : workers_(workers), lists_(workers * workers) {}

  std::size_t workers() const noexcept { return workers_; }
  const std::vector<VertexId>& rows(WorkerId from, WorkerId to) const { return lists_[from * workers_ + to]; }
  std::vector<VertexId>& rows(WorkerId from, WorkerId to) { return lists_[from * workers_ + to]; }
  std::size_t total_rows() const noexcept;
  bool empty() const noexcept { return total_rows() == 0; }

 private:
  std::size_t workers_ = 0;
  std::vector<std::vector<VertexId>> lists_;
};

ExchangePlan build_exchange_plan(const Graph& g, const Partition& part);

enum class Mode { naive, pipeline, adaptive };
enum class ExchangeMode { alltoall, pipeline };

struct ModePolicy {
  Mode mode = Mode::adaptive;
  double threshold = 5.0;  // minimum template computation intensity for pipelining
};

/// Pure function of (policy, entry size, intensity). Leaves never exchange and report all-to-all.
ExchangeMode select_mode(const ModePolicy& policy, const SubTemplate& entry, const CostModel& cost) noexcept;

/// Resolves every entry of a plan, using the calibrated cost convention for intensity.
std::vector<ExchangeMode> resolve_modes(const ModePolicy& policy, const TemplatePlan& plan);

std::string to_string(Mode m);
std::string to_string(ExchangeMode m);
Mode parse_mode(const std::string& s);

}  // namespace treelet
