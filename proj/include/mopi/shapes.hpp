#pragma once

#include <span>
#include <vector>

#include "mopi/groups.hpp"
#include "mopi/linalg.hpp"
#include "mopi/rng.hpp"

namespace mopi {

// The hypothesis class H of shape functions h: X -> R^m with a flat parameter
// vector, forward evaluation and reverse-mode parameter gradients. The five
// architectures are hand-differentiated; there is no autodiff tape.
class ShapeModel {
 public:
  enum class Kind {
    ConstantVector,
    IndicatorBasis,   // per-group coefficient vectors over a partition of X
    LinearFeatures,   // W [x; 1]
    RkhsRepresenter,  // coefficients over kernel anchors plus an intercept
    TwoLayerMlp,      // x -> tanh(W1 x + b1) -> W2 . + b2
  };

  struct Dims {
    int d_x = 1;
    int m = 1;
    int hidden = 32;                 // TwoLayerMlp
    GroupScheme scheme;              // IndicatorBasis
    Matrix anchors;                  // RkhsRepresenter: n_anchor x d_x
    double bandwidth = 1.0;          // RkhsRepresenter
    bool intercept = true;           // LinearFeatures
  };

  // Neutral initialization: the model outputs `neutral` everywhere, so the
  // iteration-0 prediction rule coincides with the pretrained baseline set.
  // MLP hidden weights draw from U(-1,1)/sqrt(fan_in); the output layer is
  // zeroed with bias = neutral.
  static ShapeModel init(Kind kind, Dims dims, const Vector& neutral, SeededRng& rng);

  Kind kind() const { return kind_; }
  const Dims& dims() const { return dims_; }
  int output_dim() const { return dims_.m; }
  int param_count() const { return static_cast<int>(params_.size()); }

  const Vector& params() const { return params_; }
  void set_params(Vector p);

  Vector forward(std::span<const double> x) const;

  // grad_theta <cotangent, forward(x)>, exact.
  Vector vjp(std::span<const double> x, std::span<const double> cotangent) const;
  // Accumulating variant used by the solver hot loop.
  void vjp_accumulate(std::span<const double> x, std::span<const double> cotangent,
                      std::span<double> grad) const;

 private:
  Kind kind_ = Kind::ConstantVector;
  Dims dims_;
  Vector params_;

  void check_x(std::span<const double> x) const;
};

int shape_param_count(ShapeModel::Kind kind, const ShapeModel::Dims& dims);

}  // namespace mopi
