#include "mopi/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "mopi/errors.hpp"
#include "mopi/mathfn.hpp"
#include "mopi/optim.hpp"

namespace mopi {

void require_pretrain_role(const Dataset& d, const char* op) {
  if (d.role() != DataRole::Pretrain) {
    throw Error(std::string(op) + " accepts only pretrain-role datasets, got " +
                to_string(d.role()));
  }
}

MeanMap MeanMap::zero(int d_y) {
  MeanMap m;
  m.kind_ = Kind::Zero;
  m.d_y_ = d_y;
  return m;
}

MeanMap MeanMap::linear(Matrix w, Vector b) {
  if (w.rows() != static_cast<int>(b.size())) throw DimensionMismatch("linear mean map");
  MeanMap m;
  m.kind_ = Kind::Linear;
  m.d_y_ = w.rows();
  m.w_ = std::move(w);
  m.b_ = std::move(b);
  return m;
}

MeanMap MeanMap::knn(int k, Matrix xs, Matrix ys) {
  if (xs.rows() != ys.rows()) throw DimensionMismatch("knn mean map");
  if (k < 1 || k > xs.rows()) throw Error("knn: k must be in [1, n_pre]");
  MeanMap m;
  m.kind_ = Kind::Knn;
  m.d_y_ = ys.cols();
  m.k_ = k;
  m.xs_ = std::move(xs);
  m.ys_ = std::move(ys);
  return m;
}

int MeanMap::dim_y() const { return d_y_; }

Vector MeanMap::eval(std::span<const double> x) const {
  switch (kind_) {
    case Kind::Zero:
      return Vector(d_y_, 0.0);
    case Kind::Linear: {
      Vector out = matvec(w_, x);
      for (int j = 0; j < d_y_; ++j) out[j] += b_[j];
      return out;
    }
    case Kind::Knn: {
      const int n = xs_.rows();
      std::vector<std::pair<double, int>> dist(n);
      for (int i = 0; i < n; ++i) dist[i] = {squared_distance(xs_.row(i), x), i};
      std::partial_sort(dist.begin(), dist.begin() + k_, dist.end());
      Vector out(d_y_, 0.0);
      for (int r = 0; r < k_; ++r) {
        const int i = dist[r].second;
        for (int j = 0; j < d_y_; ++j) out[j] += ys_(i, j);
      }
      for (double& v : out) v /= k_;
      return out;
    }
  }
  return Vector(d_y_, 0.0);
}

ScaleMap ScaleMap::global(Vector sigma) {
  for (double s : sigma)
    if (!(s > 0.0)) throw Error("scale map requires positive sigma");
  ScaleMap m;
  m.sigma_ = std::move(sigma);
  return m;
}

ScaleMap ScaleMap::grouped(GroupScheme scheme, Matrix sigma_per_group) {
  if (sigma_per_group.rows() != scheme.group_count()) {
    throw DimensionMismatch("grouped scale map: " + std::to_string(sigma_per_group.rows()) +
                            " rows for " + std::to_string(scheme.group_count()) + " groups");
  }
  ScaleMap m;
  m.grouped_ = true;
  m.scheme_ = scheme;
  m.group_sigma_ = std::move(sigma_per_group);
  return m;
}

int ScaleMap::dim_y() const {
  return grouped_ ? group_sigma_.cols() : static_cast<int>(sigma_.size());
}

Vector ScaleMap::eval(std::span<const double> x) const {
  if (!grouped_) return sigma_;
  const int g = scheme_.partition_index(x);
  return group_sigma_.row_vec(g);
}

Whitening Whitening::fixed(Matrix w, double log_det_sigma0) {
  Whitening wh;
  wh.fixed_ = true;
  wh.d_y_ = w.rows();
  wh.w_ = std::move(w);
  wh.log_det_sigma0_ = log_det_sigma0;
  return wh;
}

Whitening Whitening::net(ShapeModel l0_net, int d_y) {
  Whitening wh;
  wh.fixed_ = false;
  wh.d_y_ = d_y;
  wh.l0_ = std::make_shared<ShapeModel>(std::move(l0_net));
  return wh;
}

Vector Whitening::apply(std::span<const double> x, std::span<const double> residual) const {
  if (static_cast<int>(residual.size()) != d_y_) throw DimensionMismatch("whitening residual");
  if (fixed_) return matvec(w_, residual);
  const Matrix l = cholesky_from_raw(l0_->forward(x), d_y_);
  Vector out(d_y_, 0.0);
  for (int k = 0; k < d_y_; ++k)
    for (int i = k; i < d_y_; ++i) out[k] += l(i, k) * residual[i];
  return out;
}

double Whitening::log_det_sigma0(std::span<const double> x) const {
  if (fixed_) return log_det_sigma0_;
  const Matrix l = cholesky_from_raw(l0_->forward(x), d_y_);
  double s = 0.0;
  for (int j = 0; j < d_y_; ++j) s += std::log(l(j, j));
  return -2.0 * s;
}

MeanMap fit_ridge_mean(const Dataset& pre, double ridge) {
  require_pretrain_role(pre, "fit_ridge_mean");
  if (ridge < 0.0) throw Error("ridge must be non-negative");
  const int n = pre.size();
  const int d = pre.dim_x();
  const int q = pre.dim_y();
  // Center so the intercept is unpenalized.
  Vector x_mean(d, 0.0), y_mean(q, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x_mean[j] += pre.x()(i, j);
    for (int j = 0; j < q; ++j) y_mean[j] += pre.y()(i, j);
  }
  for (double& v : x_mean) v /= n;
  for (double& v : y_mean) v /= n;
  Matrix gram(d, d);
  Matrix xty(d, q);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < d; ++a) {
      const double xa = pre.x()(i, a) - x_mean[a];
      for (int b = a; b < d; ++b) gram(a, b) += xa * (pre.x()(i, b) - x_mean[b]);
      for (int j = 0; j < q; ++j) xty(a, j) += xa * (pre.y()(i, j) - y_mean[j]);
    }
  }
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < a; ++b) gram(a, b) = gram(b, a);
    gram(a, a) += ridge;
  }
  Matrix wt;
  try {
    wt = Cholesky(gram).solve(xty);  // d x q
  } catch (const NotPositiveDefinite&) {
    throw SingularDesign("ridge = " + std::to_string(ridge) + " with rank-deficient design");
  }
  Matrix w(q, d);
  Vector b(q);
  for (int j = 0; j < q; ++j) {
    double dot_mean = 0.0;
    for (int a = 0; a < d; ++a) {
      w(j, a) = wt(a, j);
      dot_mean += wt(a, j) * x_mean[a];
    }
    b[j] = y_mean[j] - dot_mean;
  }
  return MeanMap::linear(std::move(w), std::move(b));
}

MeanMap fit_knn_mean(const Dataset& pre, int k) {
  require_pretrain_role(pre, "fit_knn_mean");
  return MeanMap::knn(k, pre.x(), pre.y());
}

ScaleMap fit_scales(const Dataset& pre, const MeanMap& mu0,
                    const std::optional<GroupScheme>& grouping, int min_group_size) {
  require_pretrain_role(pre, "fit_scales");
  const int n = pre.size();
  const int q = pre.dim_y();
  Matrix resid(n, q);
  for (int i = 0; i < n; ++i) {
    const Vector mu = mu0.eval(pre.x_row(i));
    for (int j = 0; j < q; ++j) resid(i, j) = pre.y()(i, j) - mu[j];
  }
  auto column_std = [&](const std::vector<int>& idx, int j) {
    double mean = 0.0;
    for (int i : idx) mean += resid(i, j);
    mean /= idx.size();
    double ss = 0.0;
    for (int i : idx) {
      const double d = resid(i, j) - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / idx.size());
    if (!(sd > 0.0)) throw Error("degenerate residual scale in fit_scales");
    return sd;
  };
  if (!grouping) {
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    Vector sigma(q);
    for (int j = 0; j < q; ++j) sigma[j] = column_std(all, j);
    return ScaleMap::global(std::move(sigma));
  }
  const GroupScheme& scheme = *grouping;
  std::vector<std::vector<int>> members(scheme.group_count());
  for (int i = 0; i < n; ++i) members[scheme.partition_index(pre.x_row(i))].push_back(i);
  Matrix sigma(scheme.group_count(), q);
  for (int g = 0; g < scheme.group_count(); ++g) {
    if (static_cast<int>(members[g].size()) < min_group_size) {
      throw EmptyGroup("group " + std::to_string(g) + " has " +
                       std::to_string(members[g].size()) + " members (< " +
                       std::to_string(min_group_size) + ")");
    }
    for (int j = 0; j < q; ++j) sigma(g, j) = column_std(members[g], j);
  }
  return ScaleMap::grouped(scheme, std::move(sigma));
}

GlobalCovariance fit_global_covariance(const Dataset& pre, const MeanMap& mu0) {
  require_pretrain_role(pre, "fit_global_covariance");
  const int n = pre.size();
  const int q = pre.dim_y();
  if (n <= q) throw Error("fit_global_covariance needs n_pre > d_Y");
  Matrix resid(n, q);
  Vector mean(q, 0.0);
  for (int i = 0; i < n; ++i) {
    const Vector mu = mu0.eval(pre.x_row(i));
    for (int j = 0; j < q; ++j) {
      resid(i, j) = pre.y()(i, j) - mu[j];
      mean[j] += resid(i, j);
    }
  }
  for (double& v : mean) v /= n;
  GlobalCovariance out;
  out.sigma0 = Matrix(q, q);
  for (int a = 0; a < q; ++a) {
    for (int b = a; b < q; ++b) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += (resid(i, a) - mean[a]) * (resid(i, b) - mean[b]);
      s /= n;
      out.sigma0(a, b) = s;
      out.sigma0(b, a) = s;
    }
    out.sigma0(a, a) += 1e-8;  // jitter for SPD robustness at small n_pre
  }
  out.inv_sqrt = inv_sqrt_spd(out.sigma0);
  out.log_det = Cholesky(out.sigma0).log_det();
  return out;
}

Matrix cholesky_from_raw(std::span<const double> raw, int d_y) {
  const int expected = d_y * (d_y + 1) / 2;
  if (static_cast<int>(raw.size()) != expected) {
    throw DimensionMismatch("cholesky_from_raw: " + std::to_string(raw.size()) + " params for " +
                            std::to_string(expected));
  }
  Matrix l(d_y, d_y);
  int idx = 0;
  for (int i = 0; i < d_y; ++i) {
    for (int j = 0; j <= i; ++j, ++idx) {
      l(i, j) = (i == j) ? softplus(raw[idx]) : raw[idx];
    }
  }
  return l;
}

NllEval nll_covariance_objective(const Dataset& pre, const MeanMap& mu0, const ShapeModel& net) {
  const int n = pre.size();
  const int q = pre.dim_y();
  const int m = q * (q + 1) / 2;
  if (net.output_dim() != m) throw DimensionMismatch("nll net output dim");
  NllEval out;
  out.grad.assign(net.param_count(), 0.0);
  Vector cot(m);
  for (int i = 0; i < n; ++i) {
    const Vector mu = mu0.eval(pre.x_row(i));
    Vector r(q);
    for (int j = 0; j < q; ++j) r[j] = pre.y()(i, j) - mu[j];
    const Vector raw = net.forward(pre.x_row(i));
    const Matrix l = cholesky_from_raw(raw, q);
    // u = L^T r; loss_i = |u|^2/2 - sum_j log L_jj.
    Vector u(q, 0.0);
    for (int k = 0; k < q; ++k)
      for (int a = k; a < q; ++a) u[k] += l(a, k) * r[a];
    double loss = 0.0;
    for (int k = 0; k < q; ++k) loss += 0.5 * u[k] * u[k];
    for (int j = 0; j < q; ++j) loss -= std::log(l(j, j));
    out.value += loss / n;
    // d loss / d L_ak = u_k r_a, minus 1/L_jj on the diagonal; chain through
    // softplus on diagonal entries.
    int idx = 0;
    for (int a = 0; a < q; ++a) {
      for (int k = 0; k <= a; ++k, ++idx) {
        double g = u[k] * r[a];
        if (a == k) {
          g -= 1.0 / l(a, a);
          g *= softplus_derivative(raw[idx]);
        }
        cot[idx] = g / n;
      }
    }
    net.vjp_accumulate(pre.x_row(i), cot, out.grad);
  }
  return out;
}

ShapeModel fit_nll_covariance_net(const Dataset& pre, const MeanMap& mu0,
                                  const NllNetConfig& config) {
  require_pretrain_role(pre, "fit_nll_covariance_net");
  const int q = pre.dim_y();
  const int m = q * (q + 1) / 2;
  ShapeModel::Dims dims;
  dims.d_x = pre.dim_x();
  dims.m = m;
  dims.hidden = config.hidden;
  // Neutral start at L = I.
  Vector neutral(m, 0.0);
  int idx = 0;
  for (int i = 0; i < q; ++i)
    for (int j = 0; j <= i; ++j, ++idx)
      if (i == j) neutral[idx] = softplus_inverse(1.0);
  SeededRng rng(config.seed, 77);
  ShapeModel net = ShapeModel::init(ShapeModel::Kind::TwoLayerMlp, dims, neutral, rng);

  Vector theta = net.params();
  AdamOptimizer adam(static_cast<int>(theta.size()), AdamConfig{config.learning_rate});
  for (int t = 1; t <= config.iterations; ++t) {
    net.set_params(theta);
    const NllEval eval = nll_covariance_objective(pre, mu0, net);
    if (!std::isfinite(eval.value)) {
      throw NonFiniteObjective("nll covariance net at iteration " + std::to_string(t));
    }
    adam.step(theta, eval.grad);
  }
  net.set_params(theta);
  return net;
}

namespace {

uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t hash_doubles(std::span<const double> v, uint64_t h) {
  return fnv1a(v.data(), v.size() * sizeof(double), h);
}

}  // namespace

uint64_t content_hash(const MeanMap& m) {
  uint64_t h = fnv1a("mean", 4);
  const int kind = static_cast<int>(m.kind());
  h = fnv1a(&kind, sizeof(kind), h);
  switch (m.kind()) {
    case MeanMap::Kind::Zero:
      break;
    case MeanMap::Kind::Linear:
      h = hash_doubles(m.w().data(), h);
      h = hash_doubles(m.b(), h);
      break;
    case MeanMap::Kind::Knn: {
      const int k = m.k();
      h = fnv1a(&k, sizeof(k), h);
      h = hash_doubles(m.knn_x().data(), h);
      h = hash_doubles(m.knn_y().data(), h);
      break;
    }
  }
  return h;
}

uint64_t content_hash(const ScaleMap& s) {
  uint64_t h = fnv1a("scale", 5);
  if (s.is_grouped()) {
    const int kind = static_cast<int>(s.scheme().kind);
    h = fnv1a(&kind, sizeof(kind), h);
    h = fnv1a(&s.scheme().count, sizeof(int), h);
    h = hash_doubles(s.group_sigma().data(), h);
  } else {
    h = hash_doubles(s.global_sigma(), h);
  }
  return h;
}

uint64_t content_hash(const Whitening& w) {
  uint64_t h = fnv1a("whiten", 6);
  if (w.is_fixed()) {
    h = hash_doubles(w.fixed_matrix().data(), h);
  } else {
    h = hash_doubles(w.net_model().params(), h);
  }
  return h;
}

}  // namespace mopi
