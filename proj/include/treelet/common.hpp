#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace treelet {

using VertexId = std::uint32_t;
using WorkerId = std::uint32_t;
using Count = double;

/// Input text could not be parsed; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed text that violates the edge-list contract (ids out of range, edge count mismatch).
class FormatError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class NotATreeError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised when a worker observes a message sequence it did not expect.
class ProtocolError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class TransportError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// splitmix64 finalizer. Used for every seeded per-vertex decision so that
/// workers agree on colors and owners without exchanging them.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t seed, std::uint64_t value) noexcept {
  return mix64(seed ^ mix64(value));
}

inline constexpr std::size_t kMaxBinomial = 64;

namespace detail {
constexpr auto make_binomial_table() {
  std::array<std::array<std::uint64_t, kMaxBinomial + 1>, kMaxBinomial + 1> t{};
  for (std::size_t n = 0; n <= kMaxBinomial; ++n) {
    t[n][0] = 1;
    for (std::size_t r = 1; r <= n; ++r) t[n][r] = t[n - 1][r - 1] + (r <= n - 1 ? t[n - 1][r] : 0);
  }
  return t;
}
inline constexpr auto kBinomial = make_binomial_table();
}  // namespace detail

/// C(n, r); zero when r > n or n > 64.
constexpr std::uint64_t binomial(std::size_t n, std::size_t r) noexcept {
  if (r > n || n > kMaxBinomial) return 0;
  return detail::kBinomial[n][r];
}

}  // namespace treelet
