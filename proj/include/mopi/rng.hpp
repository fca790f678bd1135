#pragma once

#include <cstdint>
#include <vector>

#include "mopi/mathfn.hpp"

namespace mopi {

// xoshiro256++ seeded through SplitMix64. Fixed repo-wide so that every
// experiment table replicates bit-exactly across machines.
class SeededRng {
 public:
  explicit SeededRng(uint64_t seed, uint64_t stream = 0);

  uint64_t next_u64();

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal through the inverse CDF; deterministic across platforms.
  double normal() {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return normal_quantile(u);
  }

  // Integer in [0, n), n > 0. Rejection-free modulo bias is negligible for the
  // n used here, but we debias anyway for portability of the exact stream.
  uint64_t below(uint64_t n);

  // Independent child stream; deterministic in (seed, stream, tag).
  SeededRng fork(uint64_t tag) const;

  // Fisher-Yates shuffle of 0..n-1.
  std::vector<int> permutation(int n);

  uint64_t seed() const { return seed_; }
  uint64_t stream() const { return stream_; }

 private:
  uint64_t seed_ = 0;
  uint64_t stream_ = 0;
  uint64_t s_[4] = {0, 0, 0, 0};
};

}  // namespace mopi
