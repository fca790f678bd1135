#include "mopi/weights.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "mopi/errors.hpp"

namespace mopi {

WeightClass WeightClass::indicator(std::vector<int> levels) {
  WeightClass w;
  w.kind = Kind::IndicatorBasis;
  w.levels = std::move(levels);
  std::sort(w.levels.begin(), w.levels.end());
  if (std::adjacent_find(w.levels.begin(), w.levels.end()) != w.levels.end()) {
    throw Error("indicator levels must be distinct");
  }
  return w;
}

WeightClass WeightClass::rkhs(double bandwidth, double gamma) {
  if (!(bandwidth > 0.0)) throw Error("rkhs bandwidth must be positive");
  if (!(gamma > 0.0)) {
    throw Error("rkhs ridge gamma must be positive; gamma = 0 is only valid for the indicator basis");
  }
  WeightClass w;
  w.kind = Kind::GaussianRKHS;
  w.bandwidth = bandwidth;
  w.gamma = gamma;
  return w;
}

void MiscoverageVector::validate() const {
  const double n = static_cast<double>(phi.size());
  for (double p : phi) {
    const double m = n * p + alpha;
    if (m < -1e-12 || m > 1.0 + 1e-12) {
      throw Error("miscoverage vector entry out of [0,1]: m = " + std::to_string(m));
    }
  }
}

MiscoverageVector MiscoverageVector::from_indicators(std::span<const double> m, double alpha) {
  MiscoverageVector v;
  v.alpha = alpha;
  const double n = static_cast<double>(m.size());
  v.phi.resize(m.size());
  for (size_t i = 0; i < m.size(); ++i) v.phi[i] = (m[i] - alpha) / n;
  return v;
}

double gaussian_kernel(std::span<const double> z1, std::span<const double> z2, double bandwidth) {
  if (z1.size() != z2.size()) {
    throw DimensionMismatch("gaussian_kernel: " + std::to_string(z1.size()) + " vs " +
                            std::to_string(z2.size()));
  }
  if (!(bandwidth > 0.0)) throw Error("gaussian_kernel: bandwidth must be positive");
  return std::exp(-squared_distance(z1, z2) / (2.0 * bandwidth * bandwidth));
}

KernelGram KernelGram::build(const Matrix& z_points, double bandwidth) {
  const int n = z_points.rows();
  KernelGram g;
  g.z_points = z_points;
  g.k = Matrix(n, n);
  for (int i = 0; i < n; ++i) {
    g.k(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      const double v = gaussian_kernel(z_points.row(i), z_points.row(j), bandwidth);
      g.k(i, j) = v;
      g.k(j, i) = v;
    }
  }
  return g;
}

namespace {

struct GroupIndex {
  std::vector<int> group_of;   // sample -> level index
  std::vector<int> sizes;      // per level
};

GroupIndex index_groups(std::span<const int> z_codes, const std::vector<int>& levels) {
  std::unordered_map<int, int> level_pos;
  for (size_t k = 0; k < levels.size(); ++k) level_pos[levels[k]] = static_cast<int>(k);
  GroupIndex idx;
  idx.group_of.resize(z_codes.size());
  idx.sizes.assign(levels.size(), 0);
  for (size_t i = 0; i < z_codes.size(); ++i) {
    const auto it = level_pos.find(z_codes[i]);
    if (it == level_pos.end()) {
      throw Error("z code " + std::to_string(z_codes[i]) + " not among declared levels");
    }
    idx.group_of[i] = it->second;
    ++idx.sizes[it->second];
  }
  for (size_t k = 0; k < levels.size(); ++k) {
    if (idx.sizes[k] == 0) throw EmptyGroup("level " + std::to_string(levels[k]));
  }
  return idx;
}

}  // namespace

IndicatorInnerMax inner_max_indicator(std::span<const int> z_codes, const MiscoverageVector& phi,
                                      const std::vector<int>& levels, double lambda) {
  if (z_codes.size() != phi.phi.size()) {
    throw DimensionMismatch("inner_max_indicator: " + std::to_string(z_codes.size()) +
                            " codes vs phi of " + std::to_string(phi.phi.size()));
  }
  const GroupIndex idx = index_groups(z_codes, levels);
  const double n = static_cast<double>(phi.n());
  // Per-group moment sums S_z = sum_i 1{Z_i=z} (m_i - alpha) = n * sum_i 1 phi_i.
  Vector s(levels.size(), 0.0);
  for (size_t i = 0; i < z_codes.size(); ++i) s[idx.group_of[i]] += n * phi.phi[i];
  IndicatorInnerMax out;
  out.levels = levels;
  out.beta.resize(levels.size());
  for (size_t k = 0; k < levels.size(); ++k) {
    const double nz = static_cast<double>(idx.sizes[k]);
    out.value += s[k] * s[k] / (4.0 * lambda * n * nz);
    out.beta[k] = s[k] / (2.0 * lambda * nz);
  }
  return out;
}

double IndicatorInnerMax::beta_for(int code) const {
  for (size_t k = 0; k < levels.size(); ++k) {
    if (levels[k] == code) return beta[k];
  }
  return 0.0;  // unseen codes fall into a reserved inert group
}

RkhsInnerMax inner_max_rkhs(const KernelGram& gram, const MiscoverageVector& phi,
                            double gamma_tilde, double lambda) {
  const int n = gram.k.rows();
  if (static_cast<int>(phi.phi.size()) != n) {
    throw DimensionMismatch("inner_max_rkhs: phi of " + std::to_string(phi.phi.size()) +
                            " vs gram of " + std::to_string(n));
  }
  if (!(gamma_tilde > 0.0)) throw Error("inner_max_rkhs: ridge must be positive");
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = gram.k(i, j) / n + (i == j ? gamma_tilde : 0.0);
  const Vector sol = Cholesky(a).solve(phi.phi);
  RkhsInnerMax out;
  const Vector k_sol = matvec(gram.k, sol);
  out.value = dot(phi.phi, k_sol) / (4.0 * lambda);
  out.dual.resize(n);
  for (int i = 0; i < n; ++i) out.dual[i] = sol[i] / (2.0 * lambda);
  return out;
}

Vector inner_max_gradient_indicator(std::span<const int> z_codes, const MiscoverageVector& phi,
                                    const std::vector<int>& levels, double lambda) {
  const IndicatorInnerMax im = inner_max_indicator(z_codes, phi, levels, lambda);
  const GroupIndex idx = index_groups(z_codes, levels);
  Vector g(phi.phi.size());
  for (size_t i = 0; i < g.size(); ++i) g[i] = im.beta[idx.group_of[i]];
  return g;
}

Vector inner_max_gradient_rkhs(const KernelGram& gram, const MiscoverageVector& phi,
                               double gamma_tilde, double lambda) {
  // The dual already carries the 1/lambda factor, so K a* is the gradient.
  const RkhsInnerMax im = inner_max_rkhs(gram, phi, gamma_tilde, lambda);
  return matvec(gram.k, im.dual);
}

WeightContext WeightContext::build(const WeightClass& cls, const Dataset& cal) {
  if (cls.kind == WeightClass::Kind::IndicatorBasis) {
    std::vector<int> levels = cls.levels;
    if (levels.empty()) {
      // Default: every distinct code observed at fit time.
      levels = cal.z_codes();
      std::sort(levels.begin(), levels.end());
      levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    }
    return build_indicator(std::move(levels), cal.z_codes());
  }
  return build_rkhs(cal.z_real(), cls.bandwidth, cls.gamma);
}

WeightContext WeightContext::build_indicator(std::vector<int> levels,
                                             std::span<const int> z_codes) {
  WeightContext ctx;
  ctx.cls_ = WeightClass::indicator(levels);
  ctx.n_ = static_cast<int>(z_codes.size());
  ctx.codes_.assign(z_codes.begin(), z_codes.end());
  const GroupIndex idx = index_groups(z_codes, ctx.cls_.levels);
  ctx.group_of_ = idx.group_of;
  ctx.group_sizes_ = idx.sizes;
  return ctx;
}

WeightContext WeightContext::build_rkhs(const Matrix& z_points, double bandwidth, double gamma) {
  WeightContext ctx;
  ctx.cls_ = WeightClass::rkhs(bandwidth, gamma);
  ctx.n_ = z_points.rows();
  auto gram = std::make_shared<KernelGram>(KernelGram::build(z_points, bandwidth));
  const int n = ctx.n_;
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = gram->k(i, j) / n + (i == j ? gamma : 0.0);
  ctx.solver_ = std::make_shared<Cholesky>(a);
  ctx.gram_ = std::move(gram);
  return ctx;
}

WeightContext::Eval WeightContext::eval(const MiscoverageVector& phi) const {
  if (phi.n() != n_) {
    throw DimensionMismatch("weight context built for n = " + std::to_string(n_) + ", phi has " +
                            std::to_string(phi.n()));
  }
  Eval out;
  if (cls_.kind == WeightClass::Kind::IndicatorBasis) {
    const double n = static_cast<double>(n_);
    Vector s(group_sizes_.size(), 0.0);
    for (int i = 0; i < n_; ++i) s[group_of_[i]] += n * phi.phi[i];
    Vector beta(group_sizes_.size());
    for (size_t k = 0; k < group_sizes_.size(); ++k) {
      const double nz = static_cast<double>(group_sizes_[k]);
      out.value += s[k] * s[k] / (4.0 * n * nz);
      beta[k] = s[k] / (2.0 * nz);
    }
    out.grad_phi.resize(n_);
    for (int i = 0; i < n_; ++i) out.grad_phi[i] = beta[group_of_[i]];
    return out;
  }
  const Vector sol = solver_->solve(phi.phi);
  const Vector k_sol = matvec(gram_->k, sol);
  out.value = 0.25 * dot(phi.phi, k_sol);
  out.grad_phi.resize(n_);
  for (int i = 0; i < n_; ++i) out.grad_phi[i] = 0.5 * k_sol[i];
  return out;
}

}  // namespace mopi
