#pragma once

#include <memory>
#include <optional>

#include "mopi/solver.hpp"

namespace mopi {

// Pinball loss l_alpha(u, v) = (u - v)(1{u - v > 0} - alpha), minimized over
// v by the (1-alpha) quantile of u.
double pinball_loss(double u, double v, double alpha);

// Split conformal prediction: constant threshold at the ceil((n+1)(1-alpha))
// smallest calibration score.
PredictionRule fit_scp(std::shared_ptr<const SetFamily> family, const Dataset& cal, double alpha);

double scp_threshold(std::span<const double> scores, double alpha);

// Conditional calibration (non-full): the score quantile is fitted on the
// calibration set only.
//   IndicatorBasis F: exact per-group pinball minimizer, the ceil(n_z(1-alpha))
//   smallest score within each group.
//   GaussianRKHS F:  representer threshold beta0 + sum_i c_i K(., u_i)
//   minimizing mean pinball + gamma c^T K c by subgradient Adam from the SCP
//   constant.
// `condition_on_x` regresses the threshold on X instead of Z, the restriction
// used when Z is masked at test time; it is required for RKHS thresholds so
// the rule stays evaluable at test points.
struct CcConfig {
  AdamConfig adam{};
  int iterations = 2000;
  bool condition_on_x = true;
  std::optional<GroupScheme> scheme;  // indicator F: derive the group from x
};

struct CcFit {
  PredictionRule rule;
  double objective_at_init = 0.0;
  double objective_at_fit = 0.0;
};

CcFit fit_cc(std::shared_ptr<const SetFamily> family, const WeightClass& weight,
             const Dataset& cal, double alpha, const CcConfig& config);

// Mean pinball + gamma c^T K c of a representer threshold; exposed for
// gradient checks.
struct PinballEval {
  double value = 0.0;
  Vector grad;  // d/d[c..., beta0]
};
PinballEval cc_rkhs_objective(std::span<const double> scores, const KernelGram& gram,
                              std::span<const double> coeffs, double beta0, double alpha,
                              double gamma);

}  // namespace mopi
