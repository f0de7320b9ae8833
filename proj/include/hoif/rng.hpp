#pragma once

#include <cstdint>
#include <cmath>

#include "hoif/stats.hpp"

namespace hoif {

// Counter-based generator built on the SplitMix64 mixing function.
// A stream is (seed, counter); draws are pure functions of both, so any
// draw can be reproduced without replaying the stream and per-rep streams
// (seed + rep) are independent by construction.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : seed_(seed), counter_(0) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() { return mix(seed_ ^ mix(counter_++)); }

  // uniform on (0,1), never returns 0 or 1
  double next_uniform() {
    const std::uint64_t u = next_u64() >> 11;  // 53 bits
    return (static_cast<double>(u) + 0.5) * 0x1.0p-53;
  }

  double next_normal() { return normal_quantile(next_uniform()); }

  // integer in [0, n)
  std::uint64_t next_below(std::uint64_t n) {
    // multiply-shift; bias is negligible for n << 2^64 and irrelevant here,
    // but we keep the rejection loop so small-n draws are exact.
    for (;;) {
      const std::uint64_t r = next_u64();
      const std::uint64_t lim = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
      if (r < lim) return r % n;
    }
  }

  std::uint64_t seed() const { return seed_; }

private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace hoif
