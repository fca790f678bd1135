#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mopi/optim.hpp"
#include "mopi/sets.hpp"
#include "mopi/shapes.hpp"
#include "mopi/weights.hpp"

namespace mopi {

struct SolverConfig {
  Surrogate surrogate{Surrogate::Kind::ErrorFunction, 0.1};
  AdamConfig adam{};
  int iterations = 2000;
  double nu = 0.0;  // shape-norm penalty; carried for API compatibility, default 0
  uint64_t seed = 1;
};

struct FitTrace {
  Vector objective;        // per recorded iterate
  Vector grad_norm;
  Vector final_params;
  int best_iteration = 0;
  double best_objective = 0.0;
  double wall_seconds = 0.0;
};

struct ObjectiveEval {
  double value = 0.0;
  Vector grad;
};

// Smoothed empirical minimax objective with the inner maximization replaced
// by its closed form:
//   value(theta) = inner_max(phi_tilde(theta)) + nu |theta|^2,
// combining chain pieces from the weights (d value/d phi), sets (surrogate
// derivative, dT/dh) and shapes (parameter vjp) modules. hard_indicators
// bypasses the surrogate (non-differentiable; gradient treats dm/dT = 0).
ObjectiveEval mopi_objective(const SetFamily& family, const ShapeModel& shape,
                             const WeightContext& weight, const Dataset& cal, double alpha,
                             const std::optional<Surrogate>& surrogate, double nu = 0.0);

struct MopiFit {
  PredictionRule rule;
  FitTrace trace;
};

// Full-batch Adam from the neutral initialization; returns the parameters
// with the lowest recorded objective, not necessarily the last iterate.
// `neutral` is the iteration-0 shape output (for sublevel families a
// pretrain-set score quantile; zeros for boxes; raw identity Cholesky for
// ellipsoids).
MopiFit fit_mopi(std::shared_ptr<const SetFamily> family, ShapeModel::Kind shape_kind,
                 ShapeModel::Dims shape_dims, const Vector& neutral, const WeightClass& weight,
                 const Dataset& cal, double alpha, const SolverConfig& config);

Vector neutral_shape_for(const SetFamily& family, const Dataset& pre, double alpha);

void write_trace_csv(const FitTrace& trace, const std::string& path);

// --- Exact equivalence checks on enumerable laws ----------------------------

// A finite joint law over (X, Y, Z): atom i has probability prob[i] and
// categorical code z[i]. A candidate set-valued function is identified with
// the atoms it covers.
struct DiscreteJointLaw {
  Vector prob;
  std::vector<int> z;
};

struct CandidateSet {
  std::vector<uint8_t> covered;  // per atom
};

struct PropEquivalenceReport {
  Vector msce;                  // per candidate
  Vector max_psi;               // per candidate, population inner max over the full indicator basis
  double max_abs_gap = 0.0;     // max |max_psi - msce/4|
  int argmin_msce = 0;
  int argmin_max_psi = 0;
  bool argmin_agree = false;
};

// Exact enumeration check that max_f Psi(C, f) = MSCE(C)/4 on every candidate
// and that both criteria select the same candidate.
PropEquivalenceReport verify_prop_equivalence(const DiscreteJointLaw& law,
                                              const std::vector<CandidateSet>& candidates,
                                              double alpha);

}  // namespace mopi
