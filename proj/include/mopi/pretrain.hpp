#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "mopi/data.hpp"
#include "mopi/groups.hpp"
#include "mopi/linalg.hpp"
#include "mopi/shapes.hpp"

namespace mopi {

// Frozen components fitted on the pretraining split only. Each carries a
// content hash; set families embed the hash so that rules evaluated against
// swapped-out components are rejected.

class MeanMap {
 public:
  enum class Kind { Zero, Linear, Knn };

  static MeanMap zero(int d_y);
  static MeanMap linear(Matrix w, Vector b);
  static MeanMap knn(int k, Matrix xs, Matrix ys);

  Kind kind() const { return kind_; }
  int dim_y() const;
  Vector eval(std::span<const double> x) const;

  const Matrix& w() const { return w_; }
  const Vector& b() const { return b_; }
  int k() const { return k_; }
  const Matrix& knn_x() const { return xs_; }
  const Matrix& knn_y() const { return ys_; }

 private:
  Kind kind_ = Kind::Zero;
  int d_y_ = 1;
  Matrix w_;
  Vector b_;
  int k_ = 1;
  Matrix xs_, ys_;
};

class ScaleMap {
 public:
  static ScaleMap global(Vector sigma);
  static ScaleMap grouped(GroupScheme scheme, Matrix sigma_per_group);

  bool is_grouped() const { return grouped_; }
  int dim_y() const;
  Vector eval(std::span<const double> x) const;

  const Vector& global_sigma() const { return sigma_; }
  const GroupScheme& scheme() const { return scheme_; }
  const Matrix& group_sigma() const { return group_sigma_; }

 private:
  bool grouped_ = false;
  Vector sigma_;
  GroupScheme scheme_;
  Matrix group_sigma_;
};

// y_tilde = W(x) (y - mu0(x)). Either a fixed symmetric inverse square root
// of a global covariance or the transpose of a fitted Cholesky network L0(x)
// with Sigma0^{-1}(x) = L0(x) L0(x)^T.
class Whitening {
 public:
  static Whitening fixed(Matrix w, double log_det_sigma0);
  static Whitening net(ShapeModel l0_net, int d_y);

  int dim_y() const { return d_y_; }
  Vector apply(std::span<const double> x, std::span<const double> residual) const;
  double log_det_sigma0(std::span<const double> x) const;
  bool is_fixed() const { return fixed_; }
  const Matrix& fixed_matrix() const { return w_; }
  const ShapeModel& net_model() const { return *l0_; }

 private:
  bool fixed_ = true;
  int d_y_ = 1;
  Matrix w_;
  double log_det_sigma0_ = 0.0;
  std::shared_ptr<const ShapeModel> l0_;
};

struct GlobalCovariance {
  Matrix sigma0;
  Matrix inv_sqrt;
  double log_det = 0.0;
};

// Ridge-regularized multi-output least squares mu0(x) = W x + b.
MeanMap fit_ridge_mean(const Dataset& pre, double ridge);

// k nearest pretraining labels averaged under the Euclidean metric on x.
MeanMap fit_knn_mean(const Dataset& pre, int k);

// Per-coordinate residual standard deviations, either globally or one vector
// per group of the scheme. Groups need at least two members.
ScaleMap fit_scales(const Dataset& pre, const MeanMap& mu0,
                    const std::optional<GroupScheme>& grouping = std::nullopt,
                    int min_group_size = 2);

// Empirical residual covariance with 1e-8 jitter and its symmetric inverse
// square root.
GlobalCovariance fit_global_covariance(const Dataset& pre, const MeanMap& mu0);

struct NllNetConfig {
  int hidden = 32;
  double learning_rate = 1e-2;
  int iterations = 500;
  uint64_t seed = 1;
};

// Trains a TwoLayerMlp mapping x to the raw lower-triangular entries of
// L0(x), diagonal through softplus, minimizing the Gaussian negative
// log-likelihood (1/n) sum_i [ r_i^T L L^T r_i / 2 - log det(L L^T) / 2 ].
ShapeModel fit_nll_covariance_net(const Dataset& pre, const MeanMap& mu0,
                                  const NllNetConfig& config);

// NLL value and parameter gradient at the net's current parameters; exposed
// for gradient verification.
struct NllEval {
  double value = 0.0;
  Vector grad;
};
NllEval nll_covariance_objective(const Dataset& pre, const MeanMap& mu0, const ShapeModel& net);

// Builds L(x) (lower triangular, softplus diagonal) from raw net outputs.
Matrix cholesky_from_raw(std::span<const double> raw, int d_y);

// Content hashes (FNV-1a over the serialized component), used to freeze
// pretrained artifacts.
uint64_t content_hash(const MeanMap& m);
uint64_t content_hash(const ScaleMap& s);
uint64_t content_hash(const Whitening& w);

void require_pretrain_role(const Dataset& d, const char* op);

}  // namespace mopi
