#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "mopi/data.hpp"
#include "mopi/linalg.hpp"

namespace mopi {

// Adversarial weight-function class over the conditioning domain: either the
// per-level indicator basis for finite Z or a Gaussian-kernel RKHS with ridge
// gamma. The L2 penalty multiplier lambda is fixed to 1 repo-wide; gamma
// absorbs any rescaling, so lambda appears below only in the generalized
// entry points used to verify that invariance.
struct WeightClass {
  enum class Kind { IndicatorBasis, GaussianRKHS };

  Kind kind = Kind::IndicatorBasis;
  std::vector<int> levels;   // IndicatorBasis: distinct categorical codes
  double bandwidth = 1.0;    // GaussianRKHS: theta > 0
  double gamma = 1e-3;       // GaussianRKHS: ridge > 0 (gamma = 0 is rejected)

  static WeightClass indicator(std::vector<int> levels);
  static WeightClass rkhs(double bandwidth, double gamma);
};

// phi_i = (m_i - alpha)/n with m_i in [0,1] a (possibly smoothed) miscoverage
// indicator.
struct MiscoverageVector {
  Vector phi;
  double alpha = 0.1;

  int n() const { return static_cast<int>(phi.size()); }
  void validate() const;  // each n*phi_i + alpha must lie in [0,1]

  static MiscoverageVector from_indicators(std::span<const double> m, double alpha);
};

double gaussian_kernel(std::span<const double> z1, std::span<const double> z2, double bandwidth);

// Symmetric kernel matrix with unit diagonal over the calibration z points.
struct KernelGram {
  Matrix k;
  Matrix z_points;

  static KernelGram build(const Matrix& z_points, double bandwidth);
};

struct IndicatorInnerMax {
  double value = 0.0;
  std::vector<int> levels;  // ordering of the dual coefficients
  Vector beta;              // optimal per-level coefficients
  double beta_for(int code) const;  // 0 for codes outside the fitted levels
};

struct RkhsInnerMax {
  double value = 0.0;
  Vector dual;  // representer coefficients a* of the maximizing f
};

// Closed form of max_f Psi_hat(C, f) over the indicator basis (gamma = 0):
//   sum_z (sum_i 1{Z_i=z} (m_i - alpha))^2 / (4 lambda n sum_i 1{Z_i=z}).
// Every declared level must have at least one member.
IndicatorInnerMax inner_max_indicator(std::span<const int> z_codes, const MiscoverageVector& phi,
                                      const std::vector<int>& levels, double lambda = 1.0);

// Closed form of max_f {Psi_hat(C, f) - gamma ||f||_F^2} over the RKHS:
//   (1/(4 lambda)) phi^T K (K/n + gamma_tilde I)^{-1} phi,
// where gamma_tilde = gamma/lambda is the reparameterized ridge, so the value
// at (lambda, gamma_tilde) is exactly (1/lambda) times the lambda = 1 value
// at the same ridge. Dual: a* = (1/(2 lambda)) (K/n + gamma_tilde I)^{-1} phi.
RkhsInnerMax inner_max_rkhs(const KernelGram& gram, const MiscoverageVector& phi,
                            double gamma_tilde, double lambda = 1.0);

// d value / d phi of the quadratic forms above (length n):
//   indicator: beta_{z(i)}; RKHS: (1/2) K (K/n + gamma_tilde I)^{-1} phi.
// Both equal the maximizing f evaluated at Z_i. Gradients with respect to the
// raw indicators m_i are these divided by n.
Vector inner_max_gradient_indicator(std::span<const int> z_codes, const MiscoverageVector& phi,
                                    const std::vector<int>& levels, double lambda = 1.0);
Vector inner_max_gradient_rkhs(const KernelGram& gram, const MiscoverageVector& phi,
                               double gamma_tilde, double lambda = 1.0);

// Per-fit cache: the Gram factorization (RKHS) or group index (indicator) is
// built once from the calibration z values and shared read-only afterwards.
class WeightContext {
 public:
  static WeightContext build(const WeightClass& cls, const Dataset& cal);
  static WeightContext build_indicator(std::vector<int> levels, std::span<const int> z_codes);
  static WeightContext build_rkhs(const Matrix& z_points, double bandwidth, double gamma);

  struct Eval {
    double value = 0.0;
    Vector grad_phi;
  };
  Eval eval(const MiscoverageVector& phi) const;

  const WeightClass& cls() const { return cls_; }
  int n() const { return n_; }

 private:
  WeightClass cls_;
  int n_ = 0;
  // indicator
  std::vector<int> codes_;
  std::vector<int> group_of_;                 // sample -> level index
  std::vector<int> group_sizes_;
  // rkhs
  std::shared_ptr<const KernelGram> gram_;
  std::shared_ptr<const Cholesky> solver_;    // factors K/n + gamma I
};

}  // namespace mopi
