#pragma once

#include <cstdint>
#include <vector>

#include "core/common.hpp"

MGNR_NS_BEGIN

// SplitMix64: 64-bit counter-based generator. Every draw is a pure mix
// of seed + k*gamma, so streams are reproducible bit-for-bit across
// platforms and independent of call history length.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  scalar next_uniform(scalar lo, scalar hi) {
    return lo + static_cast<scalar>(next_double()) * (hi - lo);
  }

  // Uniform in [0, n). Modulo bias is < n / 2^64, irrelevant here.
  uint64_t next_below(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

MGNR_NS_END
