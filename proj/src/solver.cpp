#include "mopi/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include "mopi/errors.hpp"
#include "mopi/mathfn.hpp"

namespace mopi {

namespace {

struct PreparedCal {
  std::vector<SetFamily::Features> features;
};

PreparedCal prepare(const SetFamily& family, const Dataset& cal) {
  PreparedCal p;
  p.features.reserve(cal.size());
  for (int i = 0; i < cal.size(); ++i) {
    p.features.push_back(family.precompute(cal.x_row(i), cal.y_row(i)));
  }
  return p;
}

ObjectiveEval eval_objective(const SetFamily& family, const ShapeModel& shape,
                             const WeightContext& weight, const Dataset& cal,
                             const PreparedCal& prep, double alpha,
                             const std::optional<Surrogate>& surrogate, double nu,
                             bool with_grad) {
  const int n = cal.size();
  const int m = family.shape_dim();
  Matrix h(n, m);
  std::vector<double> t_vals(n);
  Vector mvals(n);
  for (int i = 0; i < n; ++i) {
    const Vector hi = shape.forward(cal.x_row(i));
    for (int j = 0; j < m; ++j) h(i, j) = hi[j];
    const double t = family.statistic(prep.features[i], hi);
    t_vals[i] = t;
    mvals[i] = surrogate ? surrogate->value(t) : (t > 0.0 ? 1.0 : 0.0);
  }
  const MiscoverageVector phi = MiscoverageVector::from_indicators(mvals, alpha);
  const WeightContext::Eval inner = weight.eval(phi);

  ObjectiveEval out;
  out.value = inner.value;
  const Vector& theta = shape.params();
  for (double v : theta) out.value += nu * v * v;
  if (!with_grad) return out;

  out.grad.assign(theta.size(), 0.0);
  if (surrogate) {
    Vector cot(m);
    for (int i = 0; i < n; ++i) {
      // d value/d m_i = grad_phi_i / n; chain through the surrogate slope and
      // dT/dh into the shape parameters.
      const double dm = inner.grad_phi[i] / n * surrogate->derivative(t_vals[i]);
      if (dm == 0.0) continue;
      const Vector dt_dh = family.statistic_grad_h(prep.features[i], h.row(i));
      for (int j = 0; j < m; ++j) cot[j] = dm * dt_dh[j];
      shape.vjp_accumulate(cal.x_row(i), cot, out.grad);
    }
  }
  for (size_t j = 0; j < theta.size(); ++j) out.grad[j] += 2.0 * nu * theta[j];
  return out;
}

}  // namespace

ObjectiveEval mopi_objective(const SetFamily& family, const ShapeModel& shape,
                             const WeightContext& weight, const Dataset& cal, double alpha,
                             const std::optional<Surrogate>& surrogate, double nu) {
  const PreparedCal prep = prepare(family, cal);
  return eval_objective(family, shape, weight, cal, prep, alpha, surrogate, nu, true);
}

Vector neutral_shape_for(const SetFamily& family, const Dataset& pre, double alpha) {
  switch (family.kind()) {
    case SetFamily::Kind::Sublevel: {
      // (1-alpha) empirical score quantile on the pretraining split.
      Vector scores(pre.size());
      for (int i = 0; i < pre.size(); ++i) {
        scores[i] = family.score().eval(pre.x_row(i), pre.y_row(i));
      }
      std::sort(scores.begin(), scores.end());
      const int n = static_cast<int>(scores.size());
      const int idx = std::clamp(
          static_cast<int>(std::ceil((1.0 - alpha) * n)) - 1, 0, n - 1);
      return Vector{scores[idx]};
    }
    case SetFamily::Kind::Box:
      return Vector(family.shape_dim(), 0.0);  // log-scales 0, sigma = 1
    case SetFamily::Kind::Ellipsoid: {
      Vector neutral(family.shape_dim(), 0.0);
      int idx = 0;
      const int d = family.dim_y();
      for (int i = 0; i < d; ++i)
        for (int j = 0; j <= i; ++j, ++idx)
          if (i == j) neutral[idx] = softplus_inverse(1.0);  // L = I
      return neutral;
    }
  }
  return Vector(family.shape_dim(), 0.0);
}

MopiFit fit_mopi(std::shared_ptr<const SetFamily> family, ShapeModel::Kind shape_kind,
                 ShapeModel::Dims shape_dims, const Vector& neutral, const WeightClass& weight,
                 const Dataset& cal, double alpha, const SolverConfig& config) {
  if (cal.size() == 0) throw Error("fit_mopi: empty calibration set");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("fit_mopi: alpha must lie in (0,1)");
  const auto start = std::chrono::steady_clock::now();

  shape_dims.m = family->shape_dim();
  SeededRng rng(config.seed, 11);
  ShapeModel shape = ShapeModel::init(shape_kind, shape_dims, neutral, rng);
  const WeightContext weight_ctx = WeightContext::build(weight, cal);
  const PreparedCal prep = prepare(*family, cal);

  Vector theta = shape.params();
  Vector best_theta = theta;
  double best_value = std::numeric_limits<double>::infinity();
  FitTrace trace;
  trace.objective.reserve(config.iterations + 1);
  trace.grad_norm.reserve(config.iterations + 1);
  AdamOptimizer adam(static_cast<int>(theta.size()), config.adam);

  for (int t = 0; t <= config.iterations; ++t) {
    shape.set_params(theta);
    const bool last = (t == config.iterations);
    ObjectiveEval eval = eval_objective(*family, shape, weight_ctx, cal, prep, alpha,
                                        config.surrogate, config.nu, !last);
    if (!std::isfinite(eval.value)) {
      throw NonFiniteObjective("fit_mopi at iteration " + std::to_string(t) + " (trace has " +
                               std::to_string(trace.objective.size()) + " entries)");
    }
    trace.objective.push_back(eval.value);
    trace.grad_norm.push_back(last ? 0.0 : norm2(eval.grad));
    if (eval.value < best_value) {
      best_value = eval.value;
      best_theta = theta;
      trace.best_iteration = t;
    }
    if (!last) adam.step(theta, eval.grad);
  }

  shape.set_params(best_theta);
  trace.final_params = best_theta;
  trace.best_objective = best_value;
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  MopiFit fit{PredictionRule{std::move(family), std::move(shape), Method::MOPI, ""},
              std::move(trace)};
  return fit;
}

void write_trace_csv(const FitTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trace to " + path);
  out << "iteration,objective,grad_norm\n";
  char buf[64];
  for (size_t i = 0; i < trace.objective.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", i, trace.objective[i],
                  trace.grad_norm[i]);
    out << buf;
  }
}

PropEquivalenceReport verify_prop_equivalence(const DiscreteJointLaw& law,
                                              const std::vector<CandidateSet>& candidates,
                                              double alpha) {
  const size_t n_atoms = law.prob.size();
  if (law.z.size() != n_atoms) throw DimensionMismatch("discrete law atoms");
  double total = 0.0;
  for (double p : law.prob) total += p;
  if (std::fabs(total - 1.0) > 1e-9) throw Error("discrete law probabilities must sum to 1");

  std::map<int, double> pz;
  for (size_t i = 0; i < n_atoms; ++i) pz[law.z[i]] += law.prob[i];

  PropEquivalenceReport rep;
  rep.msce.reserve(candidates.size());
  rep.max_psi.reserve(candidates.size());
  for (const CandidateSet& c : candidates) {
    if (c.covered.size() != n_atoms) throw DimensionMismatch("candidate covers");
    // alpha(z; C) by exact enumeration.
    std::map<int, double> miss;
    for (size_t i = 0; i < n_atoms; ++i) {
      if (!c.covered[i]) miss[law.z[i]] += law.prob[i];
    }
    double msce = 0.0;
    double psi = 0.0;
    for (const auto& [z, p] : pz) {
      const double alpha_z = (miss.count(z) ? miss.at(z) : 0.0) / p;
      msce += p * (alpha_z - alpha) * (alpha_z - alpha);
      // Population inner max over the full indicator basis:
      // sum_z (E[1{Z=z}(1{Y not in C} - alpha)])^2 / (4 P(z)).
      const double moment = p * (alpha_z - alpha);
      psi += moment * moment / (4.0 * p);
    }
    rep.msce.push_back(msce);
    rep.max_psi.push_back(psi);
    rep.max_abs_gap = std::max(rep.max_abs_gap, std::fabs(psi - msce / 4.0));
  }
  rep.argmin_msce = static_cast<int>(
      std::min_element(rep.msce.begin(), rep.msce.end()) - rep.msce.begin());
  rep.argmin_max_psi = static_cast<int>(
      std::min_element(rep.max_psi.begin(), rep.max_psi.end()) - rep.max_psi.begin());
  rep.argmin_agree = rep.argmin_msce == rep.argmin_max_psi;
  return rep;
}

}  // namespace mopi
