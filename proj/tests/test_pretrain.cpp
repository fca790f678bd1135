#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mopi/pretrain.hpp"

using namespace mopi;

namespace {

Dataset make_pretrain(const Matrix& x, const Matrix& y) {
  return Dataset(x, y, std::vector<int>(x.rows(), 0), DataRole::Pretrain);
}

}  // namespace

TEST_CASE("ridge mean recovers a noiseless linear model") {
  SeededRng rng(1);
  const int n = 80, d = 3, q = 2;
  Matrix w_true(q, d);
  Vector b_true{0.5, -1.25};
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < d; ++j) w_true(i, j) = rng.normal();
  Matrix x(n, d), y(n, q);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = rng.normal();
    for (int k = 0; k < q; ++k) y(i, k) = b_true[k] + dot(w_true.row(k), x.row(i));
  }
  const MeanMap mu = fit_ridge_mean(make_pretrain(x, y), 0.0);
  for (int i = 0; i < q; ++i) {
    CHECK(mu.b()[i] == doctest::Approx(b_true[i]).epsilon(1e-8));
    for (int j = 0; j < d; ++j) CHECK(mu.w()(i, j) == doctest::Approx(w_true(i, j)).epsilon(1e-8));
  }
}

TEST_CASE("constant labels give w = 0, b = mean; huge ridge shrinks w to 0") {
  SeededRng rng(2);
  const int n = 50;
  Matrix x(n, 2), y(n, 1);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
    y(i, 0) = 3.25;
  }
  const MeanMap mu = fit_ridge_mean(make_pretrain(x, y), 1.0);
  CHECK(mu.b()[0] == doctest::Approx(3.25));
  CHECK(mu.w()(0, 0) == doctest::Approx(0.0).epsilon(1e-10));

  Matrix y2(n, 1);
  for (int i = 0; i < n; ++i) y2(i, 0) = x(i, 0);
  const MeanMap shrunk = fit_ridge_mean(make_pretrain(x, y2), 1e12);
  CHECK(std::fabs(shrunk.w()(0, 0)) < 1e-9);
}

TEST_CASE("rank-deficient design without ridge errors") {
  Matrix x(10, 2), y(10, 1);
  for (int i = 0; i < 10; ++i) {
    x(i, 0) = i;
    x(i, 1) = 2.0 * i;  // collinear
    y(i, 0) = i;
  }
  CHECK_THROWS_AS(fit_ridge_mean(make_pretrain(x, y), 0.0), SingularDesign);
}

TEST_CASE("pretrain ops reject non-pretrain roles") {
  Matrix x(5, 1), y(5, 1);
  const Dataset cal(x, y, std::vector<int>(5, 0), DataRole::Calibration);
  CHECK_THROWS_AS(fit_ridge_mean(cal, 0.1), Error);
  CHECK_THROWS_AS(fit_knn_mean(cal, 2), Error);
}

TEST_CASE("knn mean map") {
  Matrix x(6, 1), y(6, 1);
  for (int i = 0; i < 6; ++i) {
    x(i, 0) = i;
    y(i, 0) = 10.0 * i;
  }
  const Dataset pre = make_pretrain(x, y);
  const MeanMap global = fit_knn_mean(pre, 6);
  CHECK(global.eval(Vector{2.0})[0] == doctest::Approx(25.0));
  const MeanMap nearest = fit_knn_mean(pre, 1);
  CHECK(nearest.eval(Vector{3.0})[0] == doctest::Approx(30.0));
  // piecewise-constant target: interior predictions exact with k = 3
  Matrix x2(30, 1), y2(30, 1);
  for (int i = 0; i < 30; ++i) {
    x2(i, 0) = i < 15 ? i * 0.1 : 10.0 + (i - 15) * 0.1;
    y2(i, 0) = i < 15 ? 1.0 : 2.0;
  }
  const MeanMap knn3 = fit_knn_mean(make_pretrain(x2, y2), 3);
  CHECK(knn3.eval(Vector{0.7})[0] == doctest::Approx(1.0));
  CHECK(knn3.eval(Vector{10.7})[0] == doctest::Approx(2.0));
}

TEST_CASE("residual scales: global and grouped") {
  // residuals +-1 with mean 0 around mu = 0
  Matrix x(8, 1), y(8, 1);
  for (int i = 0; i < 8; ++i) {
    x(i, 0) = 0.5;
    y(i, 0) = (i % 2 == 0) ? 1.0 : -1.0;
  }
  const ScaleMap global = fit_scales(make_pretrain(x, y), MeanMap::zero(1));
  CHECK(global.eval(Vector{0.5})[0] == doctest::Approx(1.0));

  // two groups with residual stds 1 and 3
  Matrix xg(40, 1), yg(40, 1);
  for (int i = 0; i < 40; ++i) {
    const bool second = i >= 20;
    xg(i, 0) = second ? 1.5 : 0.5;
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    yg(i, 0) = sign * (second ? 3.0 : 1.0);
  }
  const GroupScheme scheme{GroupScheme::Kind::Interval1D, 2};
  const ScaleMap grouped = fit_scales(make_pretrain(xg, yg), MeanMap::zero(1), scheme);
  CHECK(grouped.eval(Vector{0.2})[0] == doctest::Approx(1.0));
  CHECK(grouped.eval(Vector{1.9})[0] == doctest::Approx(3.0));

  // a group with a single member trips the minimum-size guard
  Matrix xs(3, 1), ys(3, 1);
  xs(0, 0) = 0.5;
  xs(1, 0) = 0.6;
  xs(2, 0) = 1.5;
  ys(0, 0) = 1.0;
  ys(1, 0) = -1.0;
  ys(2, 0) = 0.3;
  CHECK_THROWS_AS(fit_scales(make_pretrain(xs, ys), MeanMap::zero(1), scheme), EmptyGroup);
}

TEST_CASE("global covariance and its inverse square root") {
  SeededRng rng(7);
  const int n = 10000, q = 2;
  Matrix sigma_true(q, q);
  sigma_true(0, 0) = 2.0;
  sigma_true(0, 1) = 0.7;
  sigma_true(1, 0) = 0.7;
  sigma_true(1, 1) = 1.0;
  const Cholesky chol(sigma_true);
  Matrix x(n, 1), y(n, q);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    Vector eps{rng.normal(), rng.normal()};
    for (int j = 0; j < q; ++j) {
      y(i, j) = 0.0;
      for (int k = 0; k <= j; ++k) y(i, j) += chol.lower()(j, k) * eps[k];
    }
  }
  const GlobalCovariance cov = fit_global_covariance(make_pretrain(x, y), MeanMap::zero(q));
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) CHECK(cov.sigma0(i, j) == doctest::Approx(sigma_true(i, j)).epsilon(0.1));
  const Matrix check = matmul(cov.inv_sqrt, matmul(cov.sigma0, cov.inv_sqrt));
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) CHECK(check(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-8));

  // d_y = 1 reduces to the sample variance
  Matrix y1(4, 1);
  y1(0, 0) = 1.0;
  y1(1, 0) = -1.0;
  y1(2, 0) = 1.0;
  y1(3, 0) = -1.0;
  Matrix x1(4, 1);
  const GlobalCovariance v1 = fit_global_covariance(make_pretrain(x1, y1), MeanMap::zero(1));
  CHECK(v1.sigma0(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("nll gradient matches finite differences") {
  SeededRng rng(11);
  const int n = 12, q = 2;
  Matrix x(n, 2), y(n, q);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 2; ++j) x(i, j) = rng.normal();
    for (int j = 0; j < q; ++j) y(i, j) = rng.normal();
  }
  const Dataset pre = make_pretrain(x, y);
  ShapeModel::Dims dims;
  dims.d_x = 2;
  dims.m = q * (q + 1) / 2;
  dims.hidden = 5;
  ShapeModel net = ShapeModel::init(ShapeModel::Kind::TwoLayerMlp, dims,
                                    Vector(dims.m, 0.3), rng);
  Vector params = net.params();
  for (double& p : params) p += 0.1 * rng.normal();
  net.set_params(params);
  const NllEval at = nll_covariance_objective(pre, MeanMap::zero(q), net);
  const double eps = 1e-5;
  for (int j = 0; j < net.param_count(); ++j) {
    Vector up = params, dn = params;
    up[j] += eps;
    dn[j] -= eps;
    ShapeModel nu = net, nd = net;
    nu.set_params(up);
    nd.set_params(dn);
    const double fd = (nll_covariance_objective(pre, MeanMap::zero(q), nu).value -
                       nll_covariance_objective(pre, MeanMap::zero(q), nd).value) /
                      (2.0 * eps);
    if (std::fabs(fd) > 1e-10 || std::fabs(at.grad[j]) > 1e-10) {
      CHECK(at.grad[j] == doctest::Approx(fd).epsilon(1e-4));
    }
  }
}

TEST_CASE("nll net recovers a homoscedastic precision matrix") {
  SeededRng rng(13);
  const int n = 5000, q = 2;
  Matrix sigma_true(q, q);
  sigma_true(0, 0) = 1.5;
  sigma_true(0, 1) = -0.4;
  sigma_true(1, 0) = -0.4;
  sigma_true(1, 1) = 0.8;
  const Cholesky chol(sigma_true);
  Matrix x(n, 1), y(n, q);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    Vector eps{rng.normal(), rng.normal()};
    for (int j = 0; j < q; ++j) {
      y(i, j) = 0.0;
      for (int k = 0; k <= j; ++k) y(i, j) += chol.lower()(j, k) * eps[k];
    }
  }
  NllNetConfig config;
  config.iterations = 800;
  config.hidden = 8;
  config.seed = 3;
  const ShapeModel net = fit_nll_covariance_net(make_pretrain(x, y), MeanMap::zero(q), config);
  // average fitted precision over a few inputs against the true inverse
  const Matrix prec_true = spd_solve(sigma_true, Matrix::identity(q));
  Matrix prec_fit(q, q);
  const int probes = 50;
  for (int t = 0; t < probes; ++t) {
    const Matrix l = cholesky_from_raw(net.forward(Vector{rng.normal()}), q);
    const Matrix llt = matmul(l, transpose(l));
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < q; ++j) prec_fit(i, j) += llt(i, j) / probes;
  }
  double diff = 0.0, base = 0.0;
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < q; ++j) {
      diff += (prec_fit(i, j) - prec_true(i, j)) * (prec_fit(i, j) - prec_true(i, j));
      base += prec_true(i, j) * prec_true(i, j);
    }
  }
  CHECK(std::sqrt(diff) <= 0.1 * std::sqrt(base));
}

TEST_CASE("1-d nll minimizer is L = 1/sigma") {
  SeededRng rng(17);
  const int n = 4000;
  Matrix x(n, 1), y(n, 1);
  const double sigma = 0.5;
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    y(i, 0) = sigma * rng.normal();
  }
  NllNetConfig config;
  config.iterations = 600;
  config.hidden = 4;
  const ShapeModel net = fit_nll_covariance_net(make_pretrain(x, y), MeanMap::zero(1), config);
  const Matrix l = cholesky_from_raw(net.forward(Vector{0.25}), 1);
  CHECK(l(0, 0) == doctest::Approx(1.0 / sigma).epsilon(0.1));
}

TEST_CASE("content hashes freeze pretrained components") {
  Matrix w(1, 2);
  w(0, 0) = 1.0;
  w(0, 1) = 2.0;
  const MeanMap a = MeanMap::linear(w, {0.5});
  const uint64_t h1 = content_hash(a);
  CHECK(h1 == content_hash(a));
  Matrix w2 = w;
  w2(0, 1) = 2.0000001;
  CHECK(content_hash(MeanMap::linear(w2, {0.5})) != h1);
}
