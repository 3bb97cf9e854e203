#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace uvrec {

// Philox4x32-10 block: 128-bit counter, 64-bit key.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Counter-based stream. Every draw consumes one counter value, so the output
// is a pure function of (seed, stream, counter). Streams with distinct ids
// map to disjoint counter blocks.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter = 0)
      : seed_(seed), stream_(stream), counter_(counter) {}

  // Sub-stream keyed by a name and up to two indices (step, sample, ...).
  static RngStream named(std::uint64_t seed, std::string_view name, std::uint64_t a = 0,
                         std::uint64_t b = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller; consumes two counters.
  double normal();

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_;
};

std::uint64_t hash_name(std::string_view name);

}  // namespace uvrec
