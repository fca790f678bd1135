#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mopi {

// Named group predicates over the covariate space. The induced conditioning
// code of a point is its membership bit pattern, so overlapping groups yield
// up to 2^K distinct codes while a disjoint partition yields one code per
// group.
struct GroupScheme {
  enum class Kind {
    Interval1D,      // G_k = [k-1, k) on the first coordinate, k = 1..count
    ComplexOverlap,  // four fixed overlapping nonlinear predicates
  };

  Kind kind = Kind::Interval1D;
  int count = 5;

  int group_count() const { return kind == Kind::ComplexOverlap ? 4 : count; }

  std::vector<uint8_t> membership(std::span<const double> x) const;

  // Bit pattern of the membership vector, used as a categorical z code.
  int pattern_code(std::span<const double> x) const;

  // Index of the unique containing group for partition-style schemes; points
  // outside [0, count) clamp to the nearest interval.
  int partition_index(std::span<const double> x) const;
};

}  // namespace mopi
