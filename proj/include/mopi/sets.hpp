#pragma once

#include <memory>
#include <optional>
#include <string>

#include "mopi/pretrain.hpp"
#include "mopi/shapes.hpp"
#include "mopi/weights.hpp"

namespace mopi {

// Smooth replacement of the miscoverage indicator 1{t > 0}; output strictly
// in (0,1) and monotone in t.
struct Surrogate {
  enum class Kind { Sigmoid, ErrorFunction };

  Kind kind = Kind::ErrorFunction;
  double r = 0.1;

  double value(double t) const;
  double derivative(double t) const;
};

// Pretrained score for sublevel families. Volume is defined only for the
// absolute-residual and quadratic Mahalanobis forms.
class ScoreFunction {
 public:
  enum class Kind { AbsResidual, Mahalanobis, NormalizedInf };

  static ScoreFunction abs_residual(MeanMap mu0);
  static ScoreFunction mahalanobis(MeanMap mu0, Whitening whitening);
  static ScoreFunction normalized_inf(MeanMap mu0, ScaleMap sigma0);

  Kind kind() const { return kind_; }
  double eval(std::span<const double> x, std::span<const double> y) const;
  const MeanMap& mu0() const { return mu0_; }
  const Whitening& whitening() const { return whitening_; }
  const ScaleMap& sigma0() const { return sigma0_; }

 private:
  Kind kind_ = Kind::AbsResidual;
  MeanMap mu0_;
  Whitening whitening_ = Whitening::fixed(Matrix::identity(1), 0.0);
  ScaleMap sigma0_ = ScaleMap::global(Vector{1.0});
};

// Structured set-valued family C(x; h) = { y : T(h(x), y) <= 0 } wrapping
// frozen pretrained components.
//   Sublevel:  T = s(x, y) - h[0],                         m = 1
//   Box:       T = || ytilde / exp(h) ||_inf - 1,          m = d_Y
//   Ellipsoid: T = | L(h)^T ytilde |^2 - 1,                m = d_Y (d_Y+1)/2
// with ytilde the normalized/whitened residual and L(h) lower triangular with
// softplus diagonal.
class SetFamily {
 public:
  enum class Kind { Sublevel, Box, Ellipsoid };

  static SetFamily sublevel(ScoreFunction score);
  static SetFamily box(MeanMap mu0, ScaleMap sigma0);
  static SetFamily ellipsoid(MeanMap mu0, Whitening whitening);

  Kind kind() const { return kind_; }
  int shape_dim() const { return m_; }
  int dim_y() const { return d_y_; }
  uint64_t pretrained_hash() const { return hash_; }

  const ScoreFunction& score() const { return score_; }
  const MeanMap& mu0() const { return mu0_; }
  const ScaleMap& sigma0() const { return sigma0_; }
  const Whitening& whitening() const { return whitening_; }

  // Per-sample features that do not depend on the shape parameters; computed
  // once per fit and reused every iteration.
  struct Features {
    double score = 0.0;  // Sublevel
    Vector ytilde;       // Box / Ellipsoid
  };
  Features precompute(std::span<const double> x, std::span<const double> y) const;

  double statistic(const Features& f, std::span<const double> h) const;
  // dT/dh at (f, h); length m.
  Vector statistic_grad_h(const Features& f, std::span<const double> h) const;

  double defining_statistic(std::span<const double> x, std::span<const double> h,
                            std::span<const double> y) const;

  // Closed-form Lebesgue volume of { y : T(h(x), y) <= 0 }; throws
  // Unsupported for score forms without one. Empty sets have volume 0.
  double volume(std::span<const double> x, std::span<const double> h) const;

 private:
  Kind kind_ = Kind::Sublevel;
  int m_ = 1;
  int d_y_ = 1;
  uint64_t hash_ = 0;
  ScoreFunction score_;
  MeanMap mu0_;
  ScaleMap sigma0_ = ScaleMap::global(Vector{1.0});
  Whitening whitening_ = Whitening::fixed(Matrix::identity(1), 0.0);
};

enum class Method { MOPI, CC, SCP };
std::string to_string(Method m);

// A calibrated set-valued rule: family + fitted shape + provenance.
struct PredictionRule {
  std::shared_ptr<const SetFamily> family;
  ShapeModel shape;
  Method method = Method::MOPI;
  std::string config_hash;

  bool contains(std::span<const double> x, std::span<const double> y) const;
  double defining_statistic(std::span<const double> x, std::span<const double> y) const;
  double volume(std::span<const double> x) const;
};

double smoothed_miscoverage(const Surrogate& surrogate, double t);

// m_i = 1{T_i > 0} (hard) or surrogate(T_i); h_rows holds h(X_i) per row.
MiscoverageVector miscoverage_vector(const SetFamily& family, const Matrix& h_rows,
                                     const Dataset& cal, double alpha,
                                     const std::optional<Surrogate>& surrogate);

double unit_ball_volume(int dim);

}  // namespace mopi
