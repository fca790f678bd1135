#include "mopi/groups.hpp"

#include <algorithm>
#include <cmath>

#include "mopi/errors.hpp"

namespace mopi {

std::vector<uint8_t> GroupScheme::membership(std::span<const double> x) const {
  if (x.empty()) throw DimensionMismatch("group membership of empty covariate");
  if (kind == Kind::Interval1D) {
    std::vector<uint8_t> bits(count, 0);
    const double v = x[0];
    for (int k = 0; k < count; ++k) bits[k] = (v >= k && v < k + 1) ? 1 : 0;
    return bits;
  }
  if (x.size() < 6) throw DimensionMismatch("overlapping groups need at least 6 covariates");
  const double x1 = x[0], x2 = x[1], x3 = x[2], x4 = x[3], x5 = x[4], x6 = x[5];
  std::vector<uint8_t> bits(4, 0);
  bits[0] = (x1 + x6 >= 3.0) ? 1 : 0;
  bits[1] = (std::sin(x5) + x1 * x1 >= 3.5) ? 1 : 0;
  bits[2] = (std::fabs(x2) + 3.0 * std::fabs(x4) + std::fabs(x6) + 2.0 * std::fabs(x3) <=
             3.0 * std::sqrt(std::max(0.0, x1)))
                ? 1
                : 0;
  bits[3] = (4.0 * x3 * x3 + x5 * x5 + 2.0 * x2 * x2 - x1 * x1 <= x1) ? 1 : 0;
  return bits;
}

int GroupScheme::pattern_code(std::span<const double> x) const {
  const auto bits = membership(x);
  int code = 0;
  for (size_t k = 0; k < bits.size(); ++k)
    if (bits[k]) code |= 1 << k;
  return code;
}

int GroupScheme::partition_index(std::span<const double> x) const {
  if (kind != Kind::Interval1D) throw Error("partition_index requires a disjoint scheme");
  if (x.empty()) throw DimensionMismatch("partition index of empty covariate");
  const int k = static_cast<int>(std::floor(x[0]));
  return std::clamp(k, 0, count - 1);
}

}  // namespace mopi
