#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "treelet/common.hpp"

namespace treelet {

using ColorMask = std::uint64_t;
using SubsetRank = std::uint32_t;

/// Colexicographic combinadic rank of a color set: sum over the i-th smallest
/// element c_i (1-based i) of C(c_i, i).
SubsetRank subset_rank(ColorMask subset) noexcept;

/// Rank of an explicit color list; throws std::invalid_argument for colors >= k or repeats.
SubsetRank subset_index(std::size_t k, std::span<const std::uint32_t> colors);

/// Inverse of subset_rank for subsets of the given size.
ColorMask subset_unrank(std::size_t size, SubsetRank rank) noexcept;

struct SplitPair {
  SubsetRank active;   // rank of S1, |S1| = active size
  SubsetRank passive;  // rank of S2 = S \ S1
};

/// For every size-s subset S of {0..k-1} (by rank), all ordered splits S = S1 + S2 with
/// |S1| = a. Each row has exactly C(s, a) pairs.
class SplitTable {
 public:
  SplitTable(std::size_t k, std::size_t s, std::size_t a);

  std::size_t colors() const noexcept { return k_; }
  std::size_t subset_size() const noexcept { return s_; }
  std::size_t active_size() const noexcept { return a_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t row_length() const noexcept { return per_row_; }

  std::span<const SplitPair> row(SubsetRank r) const noexcept {
    return {pairs_.data() + static_cast<std::size_t>(r) * per_row_, per_row_};
  }
  std::span<const SplitPair> all() const noexcept { return pairs_; }

 private:
  std::size_t k_, s_, a_, rows_, per_row_;
  std::vector<SplitPair> pairs_;
};

}  // namespace treelet
