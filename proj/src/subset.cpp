#include "treelet/subset.hpp"

#include <bit>
#include <stdexcept>
#include <string>

namespace treelet {

SubsetRank subset_rank(ColorMask subset) noexcept {
  std::uint64_t rank = 0;
  std::size_t i = 1;
  while (subset) {
    const auto c = static_cast<std::size_t>(std::countr_zero(subset));
    rank += binomial(c, i++);
    subset &= subset - 1;
  }
  return static_cast<SubsetRank>(rank);
}

SubsetRank subset_index(std::size_t k, std::span<const std::uint32_t> colors) {
  ColorMask mask = 0;
  for (auto c : colors) {
    if (c >= k) throw std::invalid_argument("color " + std::to_string(c) + " out of range for k=" + std::to_string(k));
    const ColorMask bit = ColorMask{1} << c;
    if (mask & bit) throw std::invalid_argument("color " + std::to_string(c) + " repeated in subset");
    mask |= bit;
  }
  return subset_rank(mask);
}

ColorMask subset_unrank(std::size_t size, SubsetRank rank) noexcept {
  ColorMask mask = 0;
  std::uint64_t r = rank;
  for (std::size_t i = size; i >= 1; --i) {
    std::size_t c = i - 1;
    while (binomial(c + 1, i) <= r) ++c;
    mask |= ColorMask{1} << c;
    r -= binomial(c, i);
  }
  return mask;
}

SplitTable::SplitTable(std::size_t k, std::size_t s, std::size_t a)
    : k_(k), s_(s), a_(a), rows_(binomial(k, s)), per_row_(binomial(s, a)) {
  if (s > k || a > s || k > kMaxBinomial) throw std::invalid_argument("SplitTable: need a <= s <= k <= 64");
  pairs_.reserve(rows_ * per_row_);
  std::vector<std::uint32_t> elems;
  for (std::size_t r = 0; r < rows_; ++r) {
    const ColorMask set = subset_unrank(s, static_cast<SubsetRank>(r));
    elems.clear();
    for (ColorMask m = set; m; m &= m - 1) elems.push_back(static_cast<std::uint32_t>(std::countr_zero(m)));
    // Enumerate a-element selections of positions in colex order of their position masks.
    for (std::size_t pos = 0; pos < per_row_; ++pos) {
      const ColorMask pick = subset_unrank(a, static_cast<SubsetRank>(pos));
      ColorMask s1 = 0;
      for (ColorMask m = pick; m; m &= m - 1) s1 |= ColorMask{1} << elems[static_cast<std::size_t>(std::countr_zero(m))];
      pairs_.push_back({subset_rank(s1), subset_rank(set & ~s1)});
    }
  }
}

}  // namespace treelet
