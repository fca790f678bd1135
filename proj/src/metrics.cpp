#include "mopi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mopi/errors.hpp"
#include "mopi/mathfn.hpp"

namespace mopi {

double marginal_coverage(const PredictionRule& rule, const Dataset& test) {
  if (test.size() == 0) throw Error("marginal_coverage: empty test set");
  int covered = 0;
  for (int i = 0; i < test.size(); ++i) {
    if (rule.contains(test.x_row(i), test.y_row(i))) ++covered;
  }
  return static_cast<double>(covered) / test.size();
}

BinnedMsce root_msce_binned(const PredictionRule& rule, const Dataset& test, int bins,
                            double alpha, int coordinate) {
  if (bins < 1) throw Error("root_msce_binned: bins must be positive");
  if (coordinate < 0 || coordinate >= test.dim_x()) {
    throw DimensionMismatch("root_msce_binned: coordinate " + std::to_string(coordinate));
  }
  double lo = test.x()(0, coordinate), hi = lo;
  for (int i = 1; i < test.size(); ++i) {
    lo = std::min(lo, test.x()(i, coordinate));
    hi = std::max(hi, test.x()(i, coordinate));
  }
  const double width = (hi - lo) / bins;
  std::vector<int> total(bins, 0), missed(bins, 0);
  for (int i = 0; i < test.size(); ++i) {
    int b = width > 0.0
                ? static_cast<int>(std::floor((test.x()(i, coordinate) - lo) / width))
                : 0;
    b = std::clamp(b, 0, bins - 1);
    ++total[b];
    if (!rule.contains(test.x_row(i), test.y_row(i))) ++missed[b];
  }
  BinnedMsce out;
  double acc = 0.0;
  for (int b = 0; b < bins; ++b) {
    if (total[b] == 0) {
      ++out.empty_bins;
      continue;
    }
    const double mis = static_cast<double>(missed[b]) / total[b];
    acc += (mis - alpha) * (mis - alpha);
    ++out.used_bins;
  }
  if (out.used_bins == 0) throw AllBinsEmpty("no occupied bins out of " + std::to_string(bins));
  out.root_msce = std::sqrt(acc / out.used_bins);
  return out;
}

double worst_case_ball_coverage(const PredictionRule& rule, const Dataset& test, int n_balls,
                                std::optional<double> radius, SeededRng& rng) {
  const int n = test.size();
  if (n == 0) throw Error("worst_case_ball_coverage: empty test set");
  if (n_balls < 1) throw Error("worst_case_ball_coverage: need at least one ball");
  std::vector<uint8_t> covered(n);
  for (int i = 0; i < n; ++i) covered[i] = rule.contains(test.x_row(i), test.y_row(i)) ? 1 : 0;

  std::vector<int> centers;
  if (n_balls <= n) {
    const std::vector<int> perm = rng.permutation(n);
    centers.assign(perm.begin(), perm.begin() + n_balls);
  } else {
    centers.resize(n_balls);
    for (int b = 0; b < n_balls; ++b) centers[b] = static_cast<int>(rng.below(n));
  }
  double worst = 1.0;
  for (int b = 0; b < n_balls; ++b) {
    const double r = radius ? *radius : rng.uniform(0.1, 0.25);
    const double r2 = r * r;
    const auto center = test.x_row(centers[b]);
    int in_ball = 0, in_ball_covered = 0;
    for (int i = 0; i < n; ++i) {
      if (squared_distance(test.x_row(i), center) <= r2) {
        ++in_ball;
        in_ball_covered += covered[i];
      }
    }
    if (in_ball == 0) throw DegenerateBalls("ball " + std::to_string(b) + " is empty");
    worst = std::min(worst, static_cast<double>(in_ball_covered) / in_ball);
  }
  return worst;
}

Vector group_coverage(const PredictionRule& rule, const Dataset& test, const GroupScheme& scheme) {
  const int k = scheme.group_count();
  std::vector<int> total(k, 0), hit(k, 0);
  for (int i = 0; i < test.size(); ++i) {
    const auto bits = scheme.membership(test.x_row(i));
    const bool c = rule.contains(test.x_row(i), test.y_row(i));
    for (int g = 0; g < k; ++g) {
      if (bits[g]) {
        ++total[g];
        if (c) ++hit[g];
      }
    }
  }
  Vector out(k);
  for (int g = 0; g < k; ++g) {
    if (total[g] == 0) throw EmptyGroup("group " + std::to_string(g) + " empty in test data");
    out[g] = static_cast<double>(hit[g]) / total[g];
  }
  return out;
}

std::map<int, double> level_coverage(const PredictionRule& rule, const Dataset& test) {
  std::map<int, std::pair<int, int>> counts;  // z -> (total, covered)
  for (int i = 0; i < test.size(); ++i) {
    auto& [total, hit] = counts[test.z_codes()[i]];
    ++total;
    if (rule.contains(test.x_row(i), test.y_row(i))) ++hit;
  }
  std::map<int, double> out;
  for (const auto& [z, th] : counts) out[z] = static_cast<double>(th.second) / th.first;
  return out;
}

double linear_reweighting_coverage(const PredictionRule& rule, const Dataset& test,
                                   std::span<const double> weights) {
  if (static_cast<int>(weights.size()) != test.size()) {
    throw DimensionMismatch("linear_reweighting_coverage weights");
  }
  double mass = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw Error("reweighting needs non-negative weights");
    mass += w;
  }
  if (!(mass > 0.0)) throw ZeroWeightMass("all weights are zero");
  double s = 0.0;
  for (int i = 0; i < test.size(); ++i) {
    if (rule.contains(test.x_row(i), test.y_row(i))) s += weights[i];
  }
  return s / mass;
}

namespace {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;  // hi <= lo encodes the empty set
};

// Closed-form coverage interval of a 1-d-label rule at x.
Interval rule_interval_1d(const PredictionRule& rule, std::span<const double> x) {
  const SetFamily& fam = *rule.family;
  if (fam.dim_y() != 1) throw Unsupported("rule_interval_1d on multi-dimensional labels");
  const Vector h = rule.shape.forward(x);
  switch (fam.kind()) {
    case SetFamily::Kind::Sublevel: {
      const ScoreFunction& score = fam.score();
      const double mu = score.mu0().eval(x)[0];
      const double q = h[0];
      if (q < 0.0) return {mu, mu};
      switch (score.kind()) {
        case ScoreFunction::Kind::AbsResidual:
          return {mu - q, mu + q};
        case ScoreFunction::Kind::Mahalanobis: {
          const double w = std::fabs(score.whitening().apply(x, Vector{1.0})[0]);
          const double half = std::sqrt(q) / w;
          return {mu - half, mu + half};
        }
        case ScoreFunction::Kind::NormalizedInf: {
          const double half = q * score.sigma0().eval(x)[0];
          return {mu - half, mu + half};
        }
      }
      return {mu, mu};
    }
    case SetFamily::Kind::Box: {
      const double mu = fam.mu0().eval(x)[0];
      const double half = fam.sigma0().eval(x)[0] * std::exp(h[0]);
      return {mu - half, mu + half};
    }
    case SetFamily::Kind::Ellipsoid: {
      const double mu = fam.mu0().eval(x)[0];
      const double w = std::fabs(fam.whitening().apply(x, Vector{1.0})[0]);
      const double half = 1.0 / (softplus(h[0]) * w);
      return {mu - half, mu + half};
    }
  }
  return {0.0, 0.0};
}

}  // namespace

double rule_pointwise_miscoverage(const PredictionRule& rule, const GeneratorSpec& spec,
                                  std::span<const double> x, std::optional<int> z_code) {
  const ConditionalLaw law = conditional_law(spec, x, z_code);
  const Interval iv = rule_interval_1d(rule, x);
  return law.interval_miscoverage(iv.lo, iv.hi);
}

ExactMsce exact_msce(const PredictionRule& rule, const GeneratorSpec& spec, double alpha,
                     int n_outer, uint64_t seed, int inner_draws) {
  GeneratorSpec outer = spec;
  outer.n = n_outer;
  outer.seed = seed;
  outer.role = DataRole::Test;
  const Dataset sample = generate(outer);
  SeededRng inner_rng(seed, 101);

  // Exact per-point conditional miscoverage: closed-form Gaussian interval
  // probability for 1-d labels, inner Monte-Carlo draws otherwise.
  auto pointwise = [&](int i) {
    if (rule.family->dim_y() == 1) {
      std::optional<int> z;
      if (sample.z_kind() == ZKind::Categorical) z = sample.z_codes()[i];
      return rule_pointwise_miscoverage(rule, spec, sample.x_row(i), z);
    }
    const ConditionalLaw law = conditional_law(spec, sample.x_row(i));
    const Cholesky chol(law.cov);
    const int d = static_cast<int>(law.mean.size());
    Vector y(d), eps(d);
    int missed = 0;
    for (int t = 0; t < inner_draws; ++t) {
      for (int j = 0; j < d; ++j) eps[j] = inner_rng.normal();
      for (int j = 0; j < d; ++j) {
        double s = law.mean[j];
        for (int k = 0; k <= j; ++k) s += chol.lower()(j, k) * eps[k];
        y[j] = s;
      }
      if (!rule.contains(sample.x_row(i), y)) ++missed;
    }
    return static_cast<double>(missed) / inner_draws;
  };

  ExactMsce out;
  if (sample.z_kind() == ZKind::Categorical) {
    // Finite Z: MSCE = sum_z P(z) (alpha_z - alpha)^2 with alpha_z averaged
    // over the conditional X | Z = z sample.
    std::map<int, std::pair<int, double>> groups;  // z -> (count, sum miscoverage)
    std::map<int, double> sq;                      // z -> sum of squares
    for (int i = 0; i < n_outer; ++i) {
      const double mis = pointwise(i);
      auto& [cnt, s] = groups[sample.z_codes()[i]];
      ++cnt;
      s += mis;
      sq[sample.z_codes()[i]] += mis * mis;
    }
    double err_var = 0.0;
    for (const auto& [z, cs] : groups) {
      const double pz = static_cast<double>(cs.first) / n_outer;
      const double alpha_z = cs.second / cs.first;
      out.msce += pz * (alpha_z - alpha) * (alpha_z - alpha);
      const double var_z =
          std::max(0.0, sq[z] / cs.first - alpha_z * alpha_z) / cs.first;
      const double sens = 2.0 * pz * (alpha_z - alpha);
      err_var += sens * sens * var_z;
    }
    out.mc_error = std::sqrt(err_var);
    return out;
  }
  // Z = X (or a derived pattern): average of (miscoverage(x) - alpha)^2.
  double mean = 0.0, m2 = 0.0;
  for (int i = 0; i < n_outer; ++i) {
    const double g = pointwise(i) - alpha;
    const double v = g * g;
    const double delta = v - mean;
    mean += delta / (i + 1);
    m2 += delta * (v - mean);
  }
  out.msce = mean;
  out.mc_error = n_outer > 1 ? std::sqrt(m2 / (n_outer - 1) / n_outer) : 0.0;
  return out;
}

SetSizeSummary set_size_summary(const PredictionRule& rule, const Dataset& test) {
  Vector volumes(test.size());
  for (int i = 0; i < test.size(); ++i) volumes[i] = rule.volume(test.x_row(i));
  Vector logs(test.size());
  for (int i = 0; i < test.size(); ++i) logs[i] = std::log(volumes[i]);
  SetSizeSummary out;
  out.median_volume = median_lower(std::move(volumes));
  out.median_log_volume = median_lower(std::move(logs));
  return out;
}

double median_lower(Vector values) {
  if (values.empty()) throw Error("median of empty vector");
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];
}

}  // namespace mopi
