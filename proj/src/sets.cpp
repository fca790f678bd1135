#include "mopi/sets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mopi/errors.hpp"
#include "mopi/mathfn.hpp"

namespace mopi {

double Surrogate::value(double t) const {
  if (!(r > 0.0)) throw Error("surrogate smoothing parameter must be positive");
  const double v = kind == Kind::Sigmoid ? sigmoid(t / r)
                                         : 0.5 * (1.0 + std::erf(t / (std::sqrt(2.0) * r)));
  // keep the output in the open interval even where the double saturates
  return std::clamp(v, std::numeric_limits<double>::min(), 1.0 - 1e-16);
}

double Surrogate::derivative(double t) const {
  if (!(r > 0.0)) throw Error("surrogate smoothing parameter must be positive");
  if (kind == Kind::Sigmoid) {
    const double s = sigmoid(t / r);
    return s * (1.0 - s) / r;
  }
  return std::exp(-t * t / (2.0 * r * r)) / (std::sqrt(2.0 * kPi) * r);
}

double smoothed_miscoverage(const Surrogate& surrogate, double t) { return surrogate.value(t); }

ScoreFunction ScoreFunction::abs_residual(MeanMap mu0) {
  if (mu0.dim_y() != 1) throw DimensionMismatch("abs residual score requires d_Y = 1");
  ScoreFunction s;
  s.kind_ = Kind::AbsResidual;
  s.mu0_ = std::move(mu0);
  return s;
}

ScoreFunction ScoreFunction::mahalanobis(MeanMap mu0, Whitening whitening) {
  if (mu0.dim_y() != whitening.dim_y()) throw DimensionMismatch("mahalanobis score dims");
  ScoreFunction s;
  s.kind_ = Kind::Mahalanobis;
  s.mu0_ = std::move(mu0);
  s.whitening_ = std::move(whitening);
  return s;
}

ScoreFunction ScoreFunction::normalized_inf(MeanMap mu0, ScaleMap sigma0) {
  if (mu0.dim_y() != sigma0.dim_y()) throw DimensionMismatch("normalized inf score dims");
  ScoreFunction s;
  s.kind_ = Kind::NormalizedInf;
  s.mu0_ = std::move(mu0);
  s.sigma0_ = std::move(sigma0);
  return s;
}

double ScoreFunction::eval(std::span<const double> x, std::span<const double> y) const {
  const Vector mu = mu0_.eval(x);
  if (mu.size() != y.size()) throw DimensionMismatch("score eval: y dimension");
  switch (kind_) {
    case Kind::AbsResidual:
      return std::fabs(y[0] - mu[0]);
    case Kind::Mahalanobis: {
      Vector r(y.size());
      for (size_t j = 0; j < y.size(); ++j) r[j] = y[j] - mu[j];
      const Vector w = whitening_.apply(x, r);
      return dot(w, w);
    }
    case Kind::NormalizedInf: {
      const Vector sig = sigma0_.eval(x);
      double m = 0.0;
      for (size_t j = 0; j < y.size(); ++j) m = std::max(m, std::fabs((y[j] - mu[j]) / sig[j]));
      return m;
    }
  }
  return 0.0;
}

SetFamily SetFamily::sublevel(ScoreFunction score) {
  SetFamily f;
  f.kind_ = Kind::Sublevel;
  f.m_ = 1;
  f.d_y_ = score.mu0().dim_y();
  f.hash_ = content_hash(score.mu0());
  if (score.kind() == ScoreFunction::Kind::Mahalanobis) {
    f.hash_ ^= content_hash(score.whitening());
  } else if (score.kind() == ScoreFunction::Kind::NormalizedInf) {
    f.hash_ ^= content_hash(score.sigma0());
  }
  f.score_ = std::move(score);
  return f;
}

SetFamily SetFamily::box(MeanMap mu0, ScaleMap sigma0) {
  if (mu0.dim_y() != sigma0.dim_y()) throw DimensionMismatch("box family dims");
  SetFamily f;
  f.kind_ = Kind::Box;
  f.d_y_ = mu0.dim_y();
  f.m_ = f.d_y_;
  f.hash_ = content_hash(mu0) ^ content_hash(sigma0);
  f.mu0_ = std::move(mu0);
  f.sigma0_ = std::move(sigma0);
  return f;
}

SetFamily SetFamily::ellipsoid(MeanMap mu0, Whitening whitening) {
  if (mu0.dim_y() != whitening.dim_y()) throw DimensionMismatch("ellipsoid family dims");
  SetFamily f;
  f.kind_ = Kind::Ellipsoid;
  f.d_y_ = mu0.dim_y();
  f.m_ = f.d_y_ * (f.d_y_ + 1) / 2;
  f.hash_ = content_hash(mu0) ^ content_hash(whitening);
  f.mu0_ = std::move(mu0);
  f.whitening_ = std::move(whitening);
  return f;
}

SetFamily::Features SetFamily::precompute(std::span<const double> x,
                                          std::span<const double> y) const {
  Features f;
  if (kind_ == Kind::Sublevel) {
    f.score = score_.eval(x, y);
    return f;
  }
  const Vector mu = mu0_.eval(x);
  if (mu.size() != y.size()) throw DimensionMismatch("set family: y dimension");
  Vector r(y.size());
  for (size_t j = 0; j < y.size(); ++j) r[j] = y[j] - mu[j];
  if (kind_ == Kind::Box) {
    const Vector sig = sigma0_.eval(x);
    f.ytilde.resize(r.size());
    for (size_t j = 0; j < r.size(); ++j) f.ytilde[j] = r[j] / sig[j];
  } else {
    f.ytilde = whitening_.apply(x, r);
  }
  return f;
}

double SetFamily::statistic(const Features& f, std::span<const double> h) const {
  if (static_cast<int>(h.size()) != m_) {
    throw DimensionMismatch("statistic: h of " + std::to_string(h.size()) + " for m = " +
                            std::to_string(m_));
  }
  switch (kind_) {
    case Kind::Sublevel:
      return f.score - h[0];
    case Kind::Box: {
      double m = 0.0;
      for (int j = 0; j < d_y_; ++j) m = std::max(m, std::fabs(f.ytilde[j]) * std::exp(-h[j]));
      return m - 1.0;
    }
    case Kind::Ellipsoid: {
      // u = L(h)^T ytilde, T = |u|^2 - 1.
      double t = -1.0;
      int idx = 0;
      Vector u(d_y_, 0.0);
      for (int i = 0; i < d_y_; ++i) {
        for (int j = 0; j <= i; ++j, ++idx) {
          const double lij = (i == j) ? softplus(h[idx]) : h[idx];
          u[j] += lij * f.ytilde[i];
        }
      }
      for (int j = 0; j < d_y_; ++j) t += u[j] * u[j];
      return t;
    }
  }
  return 0.0;
}

Vector SetFamily::statistic_grad_h(const Features& f, std::span<const double> h) const {
  Vector g(m_, 0.0);
  switch (kind_) {
    case Kind::Sublevel:
      g[0] = -1.0;
      break;
    case Kind::Box: {
      // Max attained at the first maximizing coordinate; ties broken
      // deterministically.
      int jstar = 0;
      double best = -1.0;
      for (int j = 0; j < d_y_; ++j) {
        const double v = std::fabs(f.ytilde[j]) * std::exp(-h[j]);
        if (v > best) {
          best = v;
          jstar = j;
        }
      }
      g[jstar] = -best;
      break;
    }
    case Kind::Ellipsoid: {
      Vector u(d_y_, 0.0);
      int idx = 0;
      for (int i = 0; i < d_y_; ++i) {
        for (int j = 0; j <= i; ++j, ++idx) {
          const double lij = (i == j) ? softplus(h[idx]) : h[idx];
          u[j] += lij * f.ytilde[i];
        }
      }
      idx = 0;
      for (int i = 0; i < d_y_; ++i) {
        for (int j = 0; j <= i; ++j, ++idx) {
          double d = 2.0 * u[j] * f.ytilde[i];
          if (i == j) d *= softplus_derivative(h[idx]);
          g[idx] = d;
        }
      }
      break;
    }
  }
  return g;
}

double SetFamily::defining_statistic(std::span<const double> x, std::span<const double> h,
                                     std::span<const double> y) const {
  return statistic(precompute(x, y), h);
}

double unit_ball_volume(int dim) {
  return std::exp(0.5 * dim * std::log(kPi) - log_gamma(0.5 * dim + 1.0));
}

double SetFamily::volume(std::span<const double> x, std::span<const double> h) const {
  if (static_cast<int>(h.size()) != m_) throw DimensionMismatch("volume: h dimension");
  switch (kind_) {
    case Kind::Sublevel: {
      const double q = h[0];
      switch (score_.kind()) {
        case ScoreFunction::Kind::AbsResidual:
          return q > 0.0 ? 2.0 * q : 0.0;
        case ScoreFunction::Kind::Mahalanobis: {
          if (q <= 0.0) return 0.0;
          const double log_det = score_.whitening().log_det_sigma0(x);
          return unit_ball_volume(d_y_) * std::pow(q, 0.5 * d_y_) * std::exp(0.5 * log_det);
        }
        case ScoreFunction::Kind::NormalizedInf:
          throw Unsupported("volume of a normalized sup-norm sublevel set");
      }
      return 0.0;
    }
    case Kind::Box: {
      const Vector sig = sigma0_.eval(x);
      double v = 1.0;
      for (int j = 0; j < d_y_; ++j) v *= 2.0 * sig[j] * std::exp(h[j]);
      return v;
    }
    case Kind::Ellipsoid: {
      double log_det_l = 0.0;
      int idx = 0;
      for (int i = 0; i < d_y_; ++i)
        for (int j = 0; j <= i; ++j, ++idx)
          if (i == j) log_det_l += std::log(softplus(h[idx]));
      const double log_det_sigma0 = whitening_.log_det_sigma0(x);
      return unit_ball_volume(d_y_) * std::exp(0.5 * log_det_sigma0 - log_det_l);
    }
  }
  return 0.0;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::MOPI: return "mopi";
    case Method::CC: return "cc";
    case Method::SCP: return "scp";
  }
  return "?";
}

bool PredictionRule::contains(std::span<const double> x, std::span<const double> y) const {
  return defining_statistic(x, y) <= 0.0;
}

double PredictionRule::defining_statistic(std::span<const double> x,
                                          std::span<const double> y) const {
  const Vector h = shape.forward(x);
  return family->defining_statistic(x, h, y);
}

double PredictionRule::volume(std::span<const double> x) const {
  const Vector h = shape.forward(x);
  return family->volume(x, h);
}

MiscoverageVector miscoverage_vector(const SetFamily& family, const Matrix& h_rows,
                                     const Dataset& cal, double alpha,
                                     const std::optional<Surrogate>& surrogate) {
  if (h_rows.rows() != cal.size() || h_rows.cols() != family.shape_dim()) {
    throw DimensionMismatch("miscoverage_vector: h is " + std::to_string(h_rows.rows()) + "x" +
                            std::to_string(h_rows.cols()));
  }
  Vector m(cal.size());
  for (int i = 0; i < cal.size(); ++i) {
    const double t = family.defining_statistic(cal.x_row(i), h_rows.row(i), cal.y_row(i));
    m[i] = surrogate ? surrogate->value(t) : (t > 0.0 ? 1.0 : 0.0);
  }
  return MiscoverageVector::from_indicators(m, alpha);
}

}  // namespace mopi
