#include "mopi/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "mopi/errors.hpp"

namespace mopi {

double pinball_loss(double u, double v, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("pinball: alpha must lie in (0,1)");
  const double d = u - v;
  return d * ((d > 0.0 ? 1.0 : 0.0) - alpha);
}

double scp_threshold(std::span<const double> scores, double alpha) {
  const int n = static_cast<int>(scores.size());
  const int idx = static_cast<int>(std::ceil((n + 1) * (1.0 - alpha)));  // 1-based
  if (idx < 1 || idx > n) {
    throw InsufficientCalibration("n = " + std::to_string(n) + " for alpha = " +
                                  std::to_string(alpha));
  }
  Vector sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  return sorted[idx - 1];
}

namespace {

Vector calibration_scores(const SetFamily& family, const Dataset& cal) {
  if (family.kind() != SetFamily::Kind::Sublevel) {
    throw Error("baseline fits require a sublevel family");
  }
  Vector s(cal.size());
  for (int i = 0; i < cal.size(); ++i) s[i] = family.score().eval(cal.x_row(i), cal.y_row(i));
  return s;
}

ShapeModel constant_shape(double value, int d_x) {
  ShapeModel::Dims dims;
  dims.d_x = d_x;
  dims.m = 1;
  SeededRng rng(0);
  return ShapeModel::init(ShapeModel::Kind::ConstantVector, dims, Vector{value}, rng);
}

// Lowest minimizer of the group pinball sum: the ceil(n_z (1-alpha)) smallest
// score, 1-based, clamped to the first order statistic.
double group_quantile(Vector scores, double alpha) {
  std::sort(scores.begin(), scores.end());
  const int nz = static_cast<int>(scores.size());
  const int idx = std::max(1, static_cast<int>(std::ceil(nz * (1.0 - alpha))));
  return scores[std::min(idx, nz) - 1];
}

}  // namespace

PredictionRule fit_scp(std::shared_ptr<const SetFamily> family, const Dataset& cal, double alpha) {
  const Vector scores = calibration_scores(*family, cal);
  const double q = scp_threshold(scores, alpha);
  return PredictionRule{std::move(family), constant_shape(q, cal.dim_x()), Method::SCP, ""};
}

PinballEval cc_rkhs_objective(std::span<const double> scores, const KernelGram& gram,
                              std::span<const double> coeffs, double beta0, double alpha,
                              double gamma) {
  const int n = gram.k.rows();
  if (static_cast<int>(scores.size()) != n || static_cast<int>(coeffs.size()) != n) {
    throw DimensionMismatch("cc_rkhs_objective sizes");
  }
  const Vector kc = matvec(gram.k, coeffs);
  PinballEval out;
  out.grad.assign(n + 1, 0.0);
  Vector dv(n);
  for (int i = 0; i < n; ++i) {
    const double v = kc[i] + beta0;
    out.value += pinball_loss(scores[i], v, alpha) / n;
    dv[i] = (alpha - (scores[i] - v > 0.0 ? 1.0 : 0.0)) / n;
    out.grad[n] += dv[i];
  }
  const Vector k_dv = matvec(gram.k, dv);
  for (int i = 0; i < n; ++i) {
    out.value += gamma * coeffs[i] * kc[i];
    out.grad[i] = k_dv[i] + 2.0 * gamma * kc[i];
  }
  return out;
}

CcFit fit_cc(std::shared_ptr<const SetFamily> family, const WeightClass& weight,
             const Dataset& cal, double alpha, const CcConfig& config) {
  const Vector scores = calibration_scores(*family, cal);

  if (weight.kind == WeightClass::Kind::IndicatorBasis) {
    if (!config.scheme) {
      throw ConfigError("indicator CC needs a group scheme so the threshold is a function of x");
    }
    const GroupScheme& scheme = *config.scheme;
    std::vector<std::vector<double>> per_group(scheme.group_count());
    for (int i = 0; i < cal.size(); ++i) {
      per_group[scheme.partition_index(cal.x_row(i))].push_back(scores[i]);
    }
    ShapeModel::Dims dims;
    dims.d_x = cal.dim_x();
    dims.m = 1;
    dims.scheme = scheme;
    SeededRng rng(0);
    ShapeModel shape = ShapeModel::init(ShapeModel::Kind::IndicatorBasis, dims, Vector{0.0}, rng);
    Vector params(scheme.group_count());
    for (int g = 0; g < scheme.group_count(); ++g) {
      if (per_group[g].empty()) throw EmptyGroup("CC group " + std::to_string(g));
      params[g] = group_quantile(Vector(per_group[g].begin(), per_group[g].end()), alpha);
    }
    shape.set_params(params);
    CcFit fit{PredictionRule{std::move(family), std::move(shape), Method::CC, ""}, 0.0, 0.0};
    return fit;
  }

  // RKHS threshold over x (or z when it is observable at prediction time).
  const Matrix& cond = config.condition_on_x ? cal.x() : cal.z_real();
  const KernelGram gram = KernelGram::build(cond, weight.bandwidth);
  const int n = cal.size();
  const double q0 = scp_threshold(scores, alpha);

  Vector theta(n + 1, 0.0);  // [coefficients..., beta0]
  theta[n] = q0;
  Vector best = theta;
  const PinballEval init_eval =
      cc_rkhs_objective(scores, gram, std::span(theta).first(n), theta[n], alpha, weight.gamma);
  double best_value = init_eval.value;
  AdamOptimizer adam(n + 1, config.adam);
  for (int t = 0; t < config.iterations; ++t) {
    const PinballEval eval =
        cc_rkhs_objective(scores, gram, std::span(theta).first(n), theta[n], alpha, weight.gamma);
    if (!std::isfinite(eval.value)) {
      throw NonFiniteObjective("fit_cc at iteration " + std::to_string(t));
    }
    if (eval.value < best_value) {
      best_value = eval.value;
      best = theta;
    }
    adam.step(theta, eval.grad);
  }
  {
    const PinballEval eval =
        cc_rkhs_objective(scores, gram, std::span(theta).first(n), theta[n], alpha, weight.gamma);
    if (eval.value < best_value) {
      best_value = eval.value;
      best = theta;
    }
  }

  ShapeModel::Dims dims;
  dims.d_x = cond.cols();
  dims.m = 1;
  dims.anchors = cond;
  dims.bandwidth = weight.bandwidth;
  SeededRng rng(0);
  ShapeModel shape = ShapeModel::init(ShapeModel::Kind::RkhsRepresenter, dims, Vector{0.0}, rng);
  shape.set_params(best);  // representer layout is [c..., intercept]
  CcFit fit{PredictionRule{std::move(family), std::move(shape), Method::CC, ""}, init_eval.value,
            best_value};
  return fit;
}

}  // namespace mopi
