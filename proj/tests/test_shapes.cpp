#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mopi/shapes.hpp"

using namespace mopi;

namespace {

ShapeModel make_model(ShapeModel::Kind kind, int d_x, int m, SeededRng& rng) {
  ShapeModel::Dims dims;
  dims.d_x = d_x;
  dims.m = m;
  dims.hidden = 7;
  dims.scheme = GroupScheme{GroupScheme::Kind::Interval1D, 4};
  if (kind == ShapeModel::Kind::RkhsRepresenter) {
    dims.anchors = Matrix(5, d_x);
    for (int a = 0; a < 5; ++a)
      for (int j = 0; j < d_x; ++j) dims.anchors(a, j) = rng.normal();
    dims.bandwidth = 0.9;
  }
  Vector neutral(m, 0.0);
  ShapeModel model = ShapeModel::init(kind, dims, neutral, rng);
  Vector params = model.params();
  for (double& p : params) p = rng.normal();
  model.set_params(params);
  return model;
}

double directional(const ShapeModel& model, std::span<const double> x,
                   std::span<const double> cot) {
  const Vector h = model.forward(x);
  double s = 0.0;
  for (size_t j = 0; j < cot.size(); ++j) s += cot[j] * h[j];
  return s;
}

}  // namespace

TEST_CASE("constant and indicator forward") {
  SeededRng rng(1);
  ShapeModel::Dims dims;
  dims.d_x = 3;
  dims.m = 1;
  const ShapeModel c = ShapeModel::init(ShapeModel::Kind::ConstantVector, dims, {1.5}, rng);
  CHECK(c.forward(Vector{0.0, 0.0, 0.0})[0] == 1.5);
  CHECK(c.forward(Vector{9.0, -2.0, 4.0})[0] == 1.5);

  ShapeModel::Dims idims;
  idims.d_x = 1;
  idims.m = 1;
  idims.scheme = GroupScheme{GroupScheme::Kind::Interval1D, 5};
  ShapeModel ind = ShapeModel::init(ShapeModel::Kind::IndicatorBasis, idims, {0.0}, rng);
  Vector p{10.0, 20.0, 30.0, 40.0, 50.0};
  ind.set_params(p);
  CHECK(ind.forward(Vector{2.3})[0] == 30.0);  // group [2,3)
  CHECK(ind.forward(Vector{2.9})[0] == ind.forward(Vector{2.1})[0]);
  CHECK(ind.forward(Vector{-1.0})[0] == 10.0);  // clamps below
  CHECK(ind.forward(Vector{99.0})[0] == 50.0);  // clamps above
}

TEST_CASE("zero mlp outputs zero and init is seed-deterministic") {
  SeededRng rng(5);
  ShapeModel::Dims dims;
  dims.d_x = 4;
  dims.m = 2;
  dims.hidden = 6;
  ShapeModel mlp = ShapeModel::init(ShapeModel::Kind::TwoLayerMlp, dims, {0.0, 0.0}, rng);
  Vector zeros(mlp.param_count(), 0.0);
  mlp.set_params(zeros);
  for (double v : mlp.forward(Vector{1.0, -2.0, 0.5, 3.0})) CHECK(v == 0.0);

  SeededRng a(9), b(9);
  const ShapeModel m1 = ShapeModel::init(ShapeModel::Kind::TwoLayerMlp, dims, {0.0, 0.0}, a);
  const ShapeModel m2 = ShapeModel::init(ShapeModel::Kind::TwoLayerMlp, dims, {0.0, 0.0}, b);
  REQUIRE(m1.param_count() == m2.param_count());
  for (int i = 0; i < m1.param_count(); ++i) CHECK(m1.params()[i] == m2.params()[i]);
}

TEST_CASE("neutral init outputs the neutral vector everywhere") {
  SeededRng rng(21);
  const Vector neutral{0.7, -0.3};
  for (const auto kind :
       {ShapeModel::Kind::ConstantVector, ShapeModel::Kind::IndicatorBasis,
        ShapeModel::Kind::LinearFeatures, ShapeModel::Kind::RkhsRepresenter,
        ShapeModel::Kind::TwoLayerMlp}) {
    ShapeModel::Dims dims;
    dims.d_x = 2;
    dims.m = 2;
    dims.hidden = 5;
    dims.scheme = GroupScheme{GroupScheme::Kind::Interval1D, 3};
    if (kind == ShapeModel::Kind::RkhsRepresenter) {
      dims.anchors = Matrix(4, 2);
      for (int a = 0; a < 4; ++a)
        for (int j = 0; j < 2; ++j) dims.anchors(a, j) = rng.normal();
    }
    const ShapeModel model = ShapeModel::init(kind, dims, neutral, rng);
    for (int t = 0; t < 10; ++t) {
      const Vector x{rng.uniform(0.0, 3.0), rng.normal()};
      const Vector h = model.forward(x);
      CHECK(h[0] == doctest::Approx(neutral[0]).epsilon(1e-12));
      CHECK(h[1] == doctest::Approx(neutral[1]).epsilon(1e-12));
    }
  }
}

TEST_CASE("linear features vjp is cotangent outer features") {
  SeededRng rng(3);
  ShapeModel::Dims dims;
  dims.d_x = 3;
  dims.m = 2;
  ShapeModel lin = ShapeModel::init(ShapeModel::Kind::LinearFeatures, dims, {0.0, 0.0}, rng);
  Vector p(lin.param_count());
  for (double& v : p) v = rng.normal();
  lin.set_params(p);
  const Vector x{0.5, -1.0, 2.0};
  const Vector cot{2.0, -3.0};
  const Vector g = lin.vjp(x, cot);
  // layout per output row: [w..., intercept]
  const Vector feat{0.5, -1.0, 2.0, 1.0};
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 4; ++k) CHECK(g[j * 4 + k] == doctest::Approx(cot[j] * feat[k]));
}

TEST_CASE("vjp matches central finite differences over 200 random cases") {
  SeededRng rng(77);
  const ShapeModel::Kind kinds[] = {
      ShapeModel::Kind::ConstantVector, ShapeModel::Kind::IndicatorBasis,
      ShapeModel::Kind::LinearFeatures, ShapeModel::Kind::RkhsRepresenter,
      ShapeModel::Kind::TwoLayerMlp};
  for (int trial = 0; trial < 200; ++trial) {
    const auto kind = kinds[trial % 5];
    const int d_x = 1 + static_cast<int>(rng.below(3));
    const int m = 1 + static_cast<int>(rng.below(3));
    ShapeModel model = make_model(kind, d_x, m, rng);
    Vector x(d_x);
    for (double& v : x) v = rng.uniform(0.0, 4.0);
    Vector cot(m);
    for (double& v : cot) v = rng.normal();
    const Vector grad = model.vjp(x, cot);
    Vector params = model.params();
    const double eps = 1e-5;
    for (int j = 0; j < model.param_count(); ++j) {
      Vector up = params, dn = params;
      up[j] += eps;
      dn[j] -= eps;
      ShapeModel mu = model, md = model;
      mu.set_params(up);
      md.set_params(dn);
      const double fd = (directional(mu, x, cot) - directional(md, x, cot)) / (2.0 * eps);
      if (std::fabs(fd) > 1e-12 || std::fabs(grad[j]) > 1e-12) {
        CHECK(grad[j] == doctest::Approx(fd).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("vjp is linear in the cotangent") {
  SeededRng rng(91);
  ShapeModel model = make_model(ShapeModel::Kind::TwoLayerMlp, 3, 2, rng);
  const Vector x{0.3, 1.2, -0.7};
  const Vector u{1.0, -2.0};
  const Vector v{0.5, 0.25};
  const double a = 1.75, b = -0.5;
  Vector combo(2);
  for (int j = 0; j < 2; ++j) combo[j] = a * u[j] + b * v[j];
  const Vector gu = model.vjp(x, u);
  const Vector gv = model.vjp(x, v);
  const Vector gc = model.vjp(x, combo);
  for (int j = 0; j < model.param_count(); ++j) {
    CHECK(gc[j] == doctest::Approx(a * gu[j] + b * gv[j]).epsilon(1e-12));
  }
}

TEST_CASE("zero cotangent gives zero gradient") {
  SeededRng rng(15);
  ShapeModel model = make_model(ShapeModel::Kind::RkhsRepresenter, 2, 2, rng);
  for (double g : model.vjp(Vector{0.1, 0.2}, Vector{0.0, 0.0})) CHECK(g == 0.0);
}
