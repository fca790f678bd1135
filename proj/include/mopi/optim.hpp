#pragma once

#include <cmath>

#include "mopi/linalg.hpp"

namespace mopi {

struct AdamConfig {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Standard bias-corrected Adam over a flat parameter vector. Full batch and
// single threaded; determinism comes from the fixed update order.
class AdamOptimizer {
 public:
  AdamOptimizer(int dim, AdamConfig config)
      : config_(config), m_(dim, 0.0), v_(dim, 0.0) {}

  void step(Vector& theta, const Vector& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, t_);
    const double c2 = 1.0 - std::pow(config_.beta2, t_);
    for (size_t j = 0; j < theta.size(); ++j) {
      m_[j] = config_.beta1 * m_[j] + (1.0 - config_.beta1) * grad[j];
      v_[j] = config_.beta2 * v_[j] + (1.0 - config_.beta2) * grad[j] * grad[j];
      theta[j] -= config_.learning_rate * (m_[j] / c1) / (std::sqrt(v_[j] / c2) + config_.epsilon);
    }
  }

 private:
  AdamConfig config_;
  int t_ = 0;
  Vector m_, v_;
};

}  // namespace mopi
