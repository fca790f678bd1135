#include "mopi/shapes.hpp"

#include <cmath>
#include <string>

#include "mopi/errors.hpp"
#include "mopi/weights.hpp"

namespace mopi {

int shape_param_count(ShapeModel::Kind kind, const ShapeModel::Dims& dims) {
  using Kind = ShapeModel::Kind;
  switch (kind) {
    case Kind::ConstantVector:
      return dims.m;
    case Kind::IndicatorBasis:
      return dims.scheme.group_count() * dims.m;
    case Kind::LinearFeatures:
      return dims.m * (dims.d_x + (dims.intercept ? 1 : 0));
    case Kind::RkhsRepresenter:
      return dims.m * (dims.anchors.rows() + 1);  // coefficients + intercept
    case Kind::TwoLayerMlp:
      return dims.hidden * dims.d_x + dims.hidden + dims.m * dims.hidden + dims.m;
  }
  return 0;
}

ShapeModel ShapeModel::init(Kind kind, Dims dims, const Vector& neutral, SeededRng& rng) {
  if (static_cast<int>(neutral.size()) != dims.m) {
    throw DimensionMismatch("neutral vector of " + std::to_string(neutral.size()) +
                            " for m = " + std::to_string(dims.m));
  }
  ShapeModel model;
  model.kind_ = kind;
  model.dims_ = std::move(dims);
  model.params_.assign(shape_param_count(kind, model.dims_), 0.0);
  const Dims& d = model.dims_;
  switch (kind) {
    case Kind::ConstantVector:
      model.params_ = neutral;
      break;
    case Kind::IndicatorBasis:
      for (int g = 0; g < d.scheme.group_count(); ++g)
        for (int j = 0; j < d.m; ++j) model.params_[g * d.m + j] = neutral[j];
      break;
    case Kind::LinearFeatures: {
      if (!d.intercept) break;  // no intercept: neutral only attainable at 0
      const int p = d.d_x + 1;
      for (int j = 0; j < d.m; ++j) model.params_[j * p + d.d_x] = neutral[j];
      break;
    }
    case Kind::RkhsRepresenter: {
      const int p = d.anchors.rows() + 1;
      for (int j = 0; j < d.m; ++j) model.params_[j * p + d.anchors.rows()] = neutral[j];
      break;
    }
    case Kind::TwoLayerMlp: {
      const double gain = 1.0 / std::sqrt(static_cast<double>(d.d_x));
      for (int i = 0; i < d.hidden * d.d_x; ++i) model.params_[i] = rng.uniform(-gain, gain);
      // Hidden biases and the entire output layer start at zero; the output
      // bias carries the neutral value.
      const int b2_off = d.hidden * d.d_x + d.hidden + d.m * d.hidden;
      for (int j = 0; j < d.m; ++j) model.params_[b2_off + j] = neutral[j];
      break;
    }
  }
  return model;
}

void ShapeModel::set_params(Vector p) {
  if (p.size() != params_.size()) {
    throw DimensionMismatch("set_params: " + std::to_string(p.size()) + " for model with " +
                            std::to_string(params_.size()));
  }
  params_ = std::move(p);
}

void ShapeModel::check_x(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dims_.d_x) {
    throw DimensionMismatch("shape forward: x of " + std::to_string(x.size()) + " for d_x = " +
                            std::to_string(dims_.d_x));
  }
}

Vector ShapeModel::forward(std::span<const double> x) const {
  check_x(x);
  const Dims& d = dims_;
  Vector h(d.m, 0.0);
  switch (kind_) {
    case Kind::ConstantVector:
      h = params_;
      break;
    case Kind::IndicatorBasis: {
      const int g = d.scheme.partition_index(x);
      for (int j = 0; j < d.m; ++j) h[j] = params_[g * d.m + j];
      break;
    }
    case Kind::LinearFeatures: {
      const int p = d.d_x + (d.intercept ? 1 : 0);
      for (int j = 0; j < d.m; ++j) {
        double s = 0.0;
        for (int k = 0; k < d.d_x; ++k) s += params_[j * p + k] * x[k];
        if (d.intercept) s += params_[j * p + d.d_x];
        h[j] = s;
      }
      break;
    }
    case Kind::RkhsRepresenter: {
      const int na = d.anchors.rows();
      Vector kx(na);
      for (int a = 0; a < na; ++a) kx[a] = gaussian_kernel(d.anchors.row(a), x, d.bandwidth);
      const int p = na + 1;
      for (int j = 0; j < d.m; ++j) {
        double s = params_[j * p + na];
        for (int a = 0; a < na; ++a) s += params_[j * p + a] * kx[a];
        h[j] = s;
      }
      break;
    }
    case Kind::TwoLayerMlp: {
      const int w = d.hidden;
      const double* w1 = params_.data();
      const double* b1 = w1 + w * d.d_x;
      const double* w2 = b1 + w;
      const double* b2 = w2 + d.m * w;
      Vector a(w);
      for (int i = 0; i < w; ++i) {
        double s = b1[i];
        for (int k = 0; k < d.d_x; ++k) s += w1[i * d.d_x + k] * x[k];
        a[i] = std::tanh(s);
      }
      for (int j = 0; j < d.m; ++j) {
        double s = b2[j];
        for (int i = 0; i < w; ++i) s += w2[j * w + i] * a[i];
        h[j] = s;
      }
      break;
    }
  }
  return h;
}

Vector ShapeModel::vjp(std::span<const double> x, std::span<const double> cotangent) const {
  Vector grad(params_.size(), 0.0);
  vjp_accumulate(x, cotangent, grad);
  return grad;
}

void ShapeModel::vjp_accumulate(std::span<const double> x, std::span<const double> cotangent,
                                std::span<double> grad) const {
  check_x(x);
  if (static_cast<int>(cotangent.size()) != dims_.m) {
    throw DimensionMismatch("vjp cotangent of " + std::to_string(cotangent.size()) + " for m = " +
                            std::to_string(dims_.m));
  }
  if (grad.size() != params_.size()) {
    throw DimensionMismatch("vjp grad buffer of " + std::to_string(grad.size()));
  }
  const Dims& d = dims_;
  switch (kind_) {
    case Kind::ConstantVector:
      for (int j = 0; j < d.m; ++j) grad[j] += cotangent[j];
      break;
    case Kind::IndicatorBasis: {
      const int g = d.scheme.partition_index(x);
      for (int j = 0; j < d.m; ++j) grad[g * d.m + j] += cotangent[j];
      break;
    }
    case Kind::LinearFeatures: {
      const int p = d.d_x + (d.intercept ? 1 : 0);
      for (int j = 0; j < d.m; ++j) {
        for (int k = 0; k < d.d_x; ++k) grad[j * p + k] += cotangent[j] * x[k];
        if (d.intercept) grad[j * p + d.d_x] += cotangent[j];
      }
      break;
    }
    case Kind::RkhsRepresenter: {
      const int na = d.anchors.rows();
      const int p = na + 1;
      for (int a = 0; a < na; ++a) {
        const double kx = gaussian_kernel(d.anchors.row(a), x, d.bandwidth);
        for (int j = 0; j < d.m; ++j) grad[j * p + a] += cotangent[j] * kx;
      }
      for (int j = 0; j < d.m; ++j) grad[j * p + na] += cotangent[j];
      break;
    }
    case Kind::TwoLayerMlp: {
      const int w = d.hidden;
      const double* w1 = params_.data();
      const double* b1 = w1 + w * d.d_x;
      const double* w2 = b1 + w;
      const int w1_off = 0;
      const int b1_off = w * d.d_x;
      const int w2_off = b1_off + w;
      const int b2_off = w2_off + d.m * w;
      Vector a(w);
      for (int i = 0; i < w; ++i) {
        double s = b1[i];
        for (int k = 0; k < d.d_x; ++k) s += w1[i * d.d_x + k] * x[k];
        a[i] = std::tanh(s);
      }
      // Output layer: d<c,h>/dW2[j,i] = c_j a_i, d/db2[j] = c_j.
      for (int j = 0; j < d.m; ++j) {
        for (int i = 0; i < w; ++i) grad[w2_off + j * w + i] += cotangent[j] * a[i];
        grad[b2_off + j] += cotangent[j];
      }
      // Backprop into the hidden layer through tanh'.
      for (int i = 0; i < w; ++i) {
        double up = 0.0;
        for (int j = 0; j < d.m; ++j) up += cotangent[j] * w2[j * w + i];
        const double g = up * (1.0 - a[i] * a[i]);
        for (int k = 0; k < d.d_x; ++k) grad[w1_off + i * d.d_x + k] += g * x[k];
        grad[b1_off + i] += g;
      }
      break;
    }
  }
}

}  // namespace mopi
