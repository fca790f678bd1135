#pragma once

#include <optional>

#include "mopi/datagen.hpp"
#include "mopi/sets.hpp"

namespace mopi {

double marginal_coverage(const PredictionRule& rule, const Dataset& test);

// sqrt( |J|^-1 sum_J (miscoverage_J - alpha)^2 ) over equidistant bins of the
// binning coordinate (X_1 for multi-dimensional covariates). Empty bins are
// dropped from the average and counted in the report.
struct BinnedMsce {
  double root_msce = 0.0;
  int used_bins = 0;
  int empty_bins = 0;
};
BinnedMsce root_msce_binned(const PredictionRule& rule, const Dataset& test, int bins,
                            double alpha, int coordinate = 0);

// Min over random balls of the within-ball coverage. Centers are test points
// sampled without replacement while possible; the radius is fixed, or drawn
// from U(0.1, 0.25) per ball when `radius` is nullopt (the 1-d conditioning
// convention).
double worst_case_ball_coverage(const PredictionRule& rule, const Dataset& test, int n_balls,
                                std::optional<double> radius, SeededRng& rng);

// Per-group coverage over a scheme (overlapping groups count shared points in
// every group they belong to) or per categorical z level.
Vector group_coverage(const PredictionRule& rule, const Dataset& test, const GroupScheme& scheme);
std::map<int, double> level_coverage(const PredictionRule& rule, const Dataset& test);

double linear_reweighting_coverage(const PredictionRule& rule, const Dataset& test,
                                   std::span<const double> weights);

// E[(alpha(Z;C) - alpha)^2] using the generator's exact conditional law:
// exact Gaussian probabilities for 1-d labels and inner Monte-Carlo draws for
// multi-dimensional ones; the outer expectation runs over a fresh sample of
// size n_outer.
struct ExactMsce {
  double msce = 0.0;
  double mc_error = 0.0;  // standard error of the outer average
};
ExactMsce exact_msce(const PredictionRule& rule, const GeneratorSpec& spec, double alpha,
                     int n_outer, uint64_t seed, int inner_draws = 10000);

// Exact miscoverage P{Y not in rule(x) | x, z} for 1-d label rules.
double rule_pointwise_miscoverage(const PredictionRule& rule, const GeneratorSpec& spec,
                                  std::span<const double> x, std::optional<int> z_code);

struct SetSizeSummary {
  double median_volume = 0.0;
  double median_log_volume = 0.0;
};
// Medians over test points; even counts take the lower middle element.
SetSizeSummary set_size_summary(const PredictionRule& rule, const Dataset& test);

double median_lower(Vector values);

}  // namespace mopi
