#pragma once

#include <cstdint>
#include <random>

#include "gibbs_lines/normal.hpp"

namespace gibbs_lines {

namespace detail {

// SplitMix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

// Deterministic random stream addressed by (master_seed, stream_id).
// Identical inputs replay the identical sequence on any platform; distinct
// stream ids map to distinct engine seeds (the id enters through a bijection
// XORed against a master-only term). All distribution draws are built from
// the raw 64-bit output, never from std::random distributions, so sequences
// are stable across standard libraries.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
      : engine_(detail::mix64(master_seed) ^
                detail::mix64(detail::mix64(stream_id + 0x6A09E667F3BCC909ull))) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0,1); never returns an exact endpoint.
  double uniform01() {
    return ((next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Unbiased uniform draw from {0, 1, ..., n-1} by rejection.
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  // Uniform on {-1, 0, +1}.
  int pick_increment() { return static_cast<int>(uniform_below(3)) - 1; }

  // Standard normal via the inverse CDF, for cross-platform reproducibility.
  double normal() { return probit(uniform01()); }

 private:
  std::mt19937_64 engine_;
};

inline RngStream seed_policy(std::uint64_t master_seed, std::uint64_t stream_id) {
  return RngStream(master_seed, stream_id);
}

}  // namespace gibbs_lines
