#pragma once

#include <cmath>

namespace mopi {

inline constexpr double kPi = 3.14159265358979323846;

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }

// Standard normal CDF through erfc, accurate in both tails.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Inverse standard normal CDF. Rational initial guess refined by one Halley
// step, giving near machine precision away from p in {0,1}.
double normal_quantile(double p);

inline double sigmoid(double u) {
  if (u >= 0.0) {
    const double e = std::exp(-u);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(u);
  return e / (1.0 + e);
}

inline double softplus(double u) {
  if (u > 30.0) return u;
  if (u < -30.0) return std::exp(u);
  return std::log1p(std::exp(u));
}

inline double softplus_derivative(double u) { return sigmoid(u); }

// softplus(x) = y  =>  x = log(e^y - 1)
inline double softplus_inverse(double y) {
  if (y > 30.0) return y;
  return std::log(std::expm1(y));
}

double log_gamma(double x);

}  // namespace mopi
