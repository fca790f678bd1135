#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mopi/weights.hpp"

using namespace mopi;

namespace {

MiscoverageVector phi_from(std::vector<double> m, double alpha) {
  return MiscoverageVector::from_indicators(m, alpha);
}

// Independent maximizer of Psi_hat over the indicator class: per-level grid
// search over beta.
double indicator_brute_force(std::span<const int> codes, const MiscoverageVector& phi,
                             const std::vector<int>& levels) {
  const double n = static_cast<double>(phi.n());
  double total = 0.0;
  for (int level : levels) {
    double best = -1e300;
    for (double beta = -1.0; beta <= 1.0; beta += 1e-4) {
      double val = 0.0;
      for (size_t i = 0; i < codes.size(); ++i) {
        if (codes[i] != level) continue;
        val += beta * (n * phi.phi[i]) / n - beta * beta / n;
      }
      best = std::max(best, val);
    }
    total += best;
  }
  return total;
}

// Independent maximizer of Psi_hat - gamma |f|^2 over representer
// coefficients by projected gradient ascent.
double rkhs_gradient_ascent(const KernelGram& gram, const MiscoverageVector& phi, double gamma,
                            int iters = 40000) {
  const int n = gram.k.rows();
  Vector a(n, 0.0);
  const double step = 1.0 / (2.0 * n * (1.0 + gamma));
  for (int t = 0; t < iters; ++t) {
    const Vector ka = matvec(gram.k, a);
    Vector grad(n);
    const Vector k_ka = matvec(gram.k, ka);
    for (int i = 0; i < n; ++i) {
      grad[i] = 0.0;
      for (int j = 0; j < n; ++j) grad[i] += gram.k(i, j) * phi.phi[j];
      grad[i] -= 2.0 / n * k_ka[i] + 2.0 * gamma * ka[i];
    }
    for (int i = 0; i < n; ++i) a[i] += step * grad[i];
  }
  const Vector ka = matvec(gram.k, a);
  double val = dot(phi.phi, ka);
  val -= dot(ka, ka) / n;
  val -= gamma * dot(a, ka);
  return val;
}

KernelGram identity_gram(int n) {
  KernelGram g;
  g.k = Matrix::identity(n);
  g.z_points = Matrix(n, 1);
  for (int i = 0; i < n; ++i) g.z_points(i, 0) = 1e6 * i;
  return g;
}

}  // namespace

TEST_CASE("gaussian kernel basics") {
  const Vector z{1.0, 2.0};
  CHECK(gaussian_kernel(z, z, 0.7) == doctest::Approx(1.0));
  const Vector a{0.0, 0.0};
  const Vector b{1.0, 1.0};  // squared distance 2
  CHECK(gaussian_kernel(a, b, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  double prev = 0.0;
  for (double bw : {0.5, 1.0, 2.0, 8.0, 64.0}) {
    const double v = gaussian_kernel(a, b, bw);
    CHECK(v > prev);
    prev = v;
  }
  CHECK(prev > 0.999);
  CHECK_THROWS_AS(gaussian_kernel(a, Vector{1.0}, 1.0), DimensionMismatch);
}

TEST_CASE("kernel gram invariants") {
  SeededRng rng(3);
  Matrix z(15, 2);
  for (int i = 0; i < 15; ++i)
    for (int j = 0; j < 2; ++j) z(i, j) = rng.normal();
  const KernelGram g = KernelGram::build(z, 0.9);
  for (int i = 0; i < 15; ++i) {
    CHECK(g.k(i, i) == 1.0);
    for (int j = 0; j < 15; ++j) {
      CHECK(g.k(i, j) == g.k(j, i));
      CHECK(g.k(i, j) > 0.0);
      CHECK(g.k(i, j) <= 1.0);
    }
  }
}

TEST_CASE("indicator inner max on worked examples") {
  // group sums cancel
  {
    const std::vector<int> codes{0, 0};
    const auto im = inner_max_indicator(codes, phi_from({1.0, 0.0}, 0.5), {0});
    CHECK(im.value == doctest::Approx(0.0));
  }
  // two groups, alpha = 0.1: 0.02 + 0.10125
  {
    const std::vector<int> codes{0, 0, 1, 1};
    const auto im = inner_max_indicator(codes, phi_from({1.0, 0.0, 1.0, 1.0}, 0.1), {0, 1});
    CHECK(im.value == doctest::Approx(0.12125).epsilon(1e-12));
    CHECK(im.beta_for(0) == doctest::Approx(0.8 / 4.0));
    CHECK(im.beta_for(1) == doctest::Approx(1.8 / 4.0));
    CHECK(im.beta_for(99) == 0.0);  // unseen code maps to the inert group
  }
  // all m_i = alpha
  {
    const std::vector<int> codes{0, 1, 0};
    const auto im = inner_max_indicator(codes, phi_from({0.3, 0.3, 0.3}, 0.3), {0, 1});
    CHECK(im.value == doctest::Approx(0.0));
    CHECK(im.beta[0] == doctest::Approx(0.0));
    CHECK(im.beta[1] == doctest::Approx(0.0));
  }
}

TEST_CASE("indicator inner max matches brute force on random instances") {
  SeededRng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(18));
    const int k = 1 + static_cast<int>(rng.below(3));
    std::vector<int> codes(n);
    std::vector<double> m(n);
    for (int i = 0; i < n; ++i) {
      codes[i] = static_cast<int>(rng.below(k));
      m[i] = rng.uniform();
    }
    std::vector<int> levels;
    for (int i = 0; i < n; ++i) levels.push_back(codes[i]);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    const double alpha = 0.05 + 0.9 * rng.uniform();
    const MiscoverageVector phi = phi_from(m, alpha);
    const auto im = inner_max_indicator(codes, phi, levels);
    const double brute = indicator_brute_force(codes, phi, levels);
    CHECK(im.value == doctest::Approx(brute).epsilon(1e-5));
    CHECK(im.value >= 0.0);
  }
}

TEST_CASE("singleton groups reduce to sum (m_i - alpha)^2 / (4n)") {
  SeededRng rng(13);
  const int n = 9;
  std::vector<int> codes(n);
  std::vector<double> m(n);
  std::vector<int> levels(n);
  for (int i = 0; i < n; ++i) {
    codes[i] = i;
    levels[i] = i;
    m[i] = rng.uniform();
  }
  const double alpha = 0.1;
  const auto im = inner_max_indicator(codes, phi_from(m, alpha), levels);
  double expect = 0.0;
  for (double mi : m) expect += (mi - alpha) * (mi - alpha) / (4.0 * n);
  CHECK(im.value == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("indicator errors") {
  const std::vector<int> codes{0, 0};
  CHECK_THROWS_AS(inner_max_indicator(codes, phi_from({1.0, 0.0}, 0.5), {0, 1}), EmptyGroup);
}

TEST_CASE("rkhs inner max examples") {
  // zero moment vector
  {
    const KernelGram g = identity_gram(4);
    MiscoverageVector phi;
    phi.alpha = 0.1;
    phi.phi.assign(4, 0.0);
    const auto im = inner_max_rkhs(g, phi, 0.5);
    CHECK(im.value == doctest::Approx(0.0));
    for (double d : im.dual) CHECK(d == doctest::Approx(0.0));
  }
  // n = 2, K = I, gamma = 0.5: value = (phi1^2 + phi2^2)/4 / (1/n + gamma)
  {
    const KernelGram g = identity_gram(2);
    MiscoverageVector phi;
    phi.alpha = 0.1;
    phi.phi = {0.45, -0.05};
    const auto im = inner_max_rkhs(g, phi, 0.5);
    const double expect = 0.25 * (0.45 * 0.45 + 0.05 * 0.05) / (0.5 + 0.5);
    CHECK(im.value == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("rkhs inner max matches gradient ascent oracle") {
  SeededRng rng(29);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(17));
    Matrix z(n, 1);
    for (int i = 0; i < n; ++i) z(i, 0) = 3.0 * rng.normal();
    const KernelGram g = KernelGram::build(z, 0.5 + rng.uniform());
    std::vector<double> m(n);
    for (int i = 0; i < n; ++i) m[i] = rng.uniform();
    const double gamma = 0.05 + rng.uniform();
    const MiscoverageVector phi = phi_from(m, 0.1);
    const auto im = inner_max_rkhs(g, phi, gamma);
    const double oracle = rkhs_gradient_ascent(g, phi, gamma);
    CHECK(im.value == doctest::Approx(oracle).epsilon(1e-5));
    CHECK(im.value >= 0.0);
  }
}

TEST_CASE("inner max gradients match finite differences") {
  SeededRng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(12));
    const bool indicator = trial % 2 == 0;
    std::vector<double> m(n);
    for (int i = 0; i < n; ++i) m[i] = rng.uniform();
    MiscoverageVector phi = phi_from(m, 0.2);

    std::vector<int> codes(n);
    std::vector<int> levels;
    Matrix z(n, 1);
    for (int i = 0; i < n; ++i) {
      codes[i] = static_cast<int>(rng.below(3));
      z(i, 0) = rng.normal();
    }
    for (int i = 0; i < n; ++i) levels.push_back(codes[i]);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    const KernelGram gram = indicator ? KernelGram{} : KernelGram::build(z, 0.8);
    const double gamma = 0.3;

    auto value_at = [&](const MiscoverageVector& p) {
      return indicator ? inner_max_indicator(codes, p, levels).value
                       : inner_max_rkhs(gram, p, gamma).value;
    };
    const Vector grad = indicator ? inner_max_gradient_indicator(codes, phi, levels)
                                  : inner_max_gradient_rkhs(gram, phi, gamma);
    const double eps = 1e-6;
    for (int i = 0; i < n; ++i) {
      MiscoverageVector up = phi, dn = phi;
      up.phi[i] += eps;
      dn.phi[i] -= eps;
      const double fd = (value_at(up) - value_at(dn)) / (2.0 * eps);
      CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("gradient is zero at phi = 0 and linear in phi") {
  const KernelGram g = identity_gram(5);
  MiscoverageVector zero;
  zero.alpha = 0.1;
  zero.phi.assign(5, 0.0);
  for (double v : inner_max_gradient_rkhs(g, zero, 0.4)) CHECK(v == doctest::Approx(0.0));

  SeededRng rng(5);
  MiscoverageVector phi;
  phi.alpha = 0.1;
  phi.phi.resize(5);
  for (double& v : phi.phi) v = rng.normal() / 10.0;
  MiscoverageVector scaled = phi;
  for (double& v : scaled.phi) v *= 3.0;
  const Vector g1 = inner_max_gradient_rkhs(g, phi, 0.4);
  const Vector g3 = inner_max_gradient_rkhs(g, scaled, 0.4);
  for (int i = 0; i < 5; ++i) CHECK(g3[i] == doctest::Approx(3.0 * g1[i]).epsilon(1e-12));
}

TEST_CASE("lambda only rescales the generalized closed forms") {
  SeededRng rng(37);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(10));
    std::vector<double> m(n);
    std::vector<int> codes(n);
    Matrix z(n, 1);
    for (int i = 0; i < n; ++i) {
      m[i] = rng.uniform();
      codes[i] = static_cast<int>(rng.below(2));
      z(i, 0) = rng.normal();
    }
    std::vector<int> levels;
    for (int i = 0; i < n; ++i) levels.push_back(codes[i]);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    const MiscoverageVector phi = phi_from(m, 0.15);
    const double lambda = 2.0;

    const auto ind1 = inner_max_indicator(codes, phi, levels, 1.0);
    const auto ind2 = inner_max_indicator(codes, phi, levels, lambda);
    CHECK(std::fabs(ind2.value - ind1.value / lambda) <= 1e-12 * (1.0 + std::fabs(ind1.value)));

    const KernelGram gram = KernelGram::build(z, 1.1);
    const double gamma = 0.25;
    // Same reparameterized ridge gamma_tilde = gamma / lambda on both sides.
    const auto r1 = inner_max_rkhs(gram, phi, gamma / lambda, 1.0);
    const auto r2 = inner_max_rkhs(gram, phi, gamma / lambda, lambda);
    CHECK(std::fabs(r2.value - r1.value / lambda) <= 1e-12 * (1.0 + std::fabs(r1.value)));
    const Vector g1 = inner_max_gradient_rkhs(gram, phi, gamma / lambda, 1.0);
    const Vector g2 = inner_max_gradient_rkhs(gram, phi, gamma / lambda, lambda);
    for (int i = 0; i < n; ++i) {
      CHECK(std::fabs(g2[i] - g1[i] / lambda) <= 1e-12 * (1.0 + std::fabs(g1[i])));
    }
  }
}

TEST_CASE("generalized rkhs value matches the direct lambda-penalty maximization") {
  // max_f { Psi_lambda - gamma |f|^2 } computed by an independent ascent over
  // representer coefficients equals the closed form with ridge gamma/lambda.
  SeededRng rng(43);
  const int n = 8;
  Matrix z(n, 1);
  std::vector<double> m(n);
  for (int i = 0; i < n; ++i) {
    z(i, 0) = rng.normal();
    m[i] = rng.uniform();
  }
  const KernelGram gram = KernelGram::build(z, 0.9);
  const MiscoverageVector phi = phi_from(m, 0.1);
  const double gamma = 0.2, lambda = 2.0;

  Vector a(n, 0.0);
  const double step = 1.0 / (2.0 * n * (lambda + gamma));
  for (int t = 0; t < 60000; ++t) {
    const Vector ka = matvec(gram.k, a);
    const Vector k_ka = matvec(gram.k, ka);
    for (int i = 0; i < n; ++i) {
      double g = 0.0;
      for (int j = 0; j < n; ++j) g += gram.k(i, j) * phi.phi[j];
      g -= 2.0 * lambda / n * k_ka[i] + 2.0 * gamma * ka[i];
      a[i] += step * g;
    }
  }
  const Vector ka = matvec(gram.k, a);
  const double direct = dot(phi.phi, ka) - lambda / n * dot(ka, ka) - gamma * dot(a, ka);
  const auto closed = inner_max_rkhs(gram, phi, gamma / lambda, lambda);
  CHECK(closed.value == doctest::Approx(direct).epsilon(1e-6));
}

TEST_CASE("weight context matches the free functions") {
  SeededRng rng(51);
  const int n = 12;
  Matrix z(n, 1);
  std::vector<int> codes(n);
  std::vector<double> m(n);
  for (int i = 0; i < n; ++i) {
    z(i, 0) = rng.normal();
    codes[i] = static_cast<int>(rng.below(3));
    m[i] = rng.uniform();
  }
  const MiscoverageVector phi = phi_from(m, 0.1);

  const WeightContext ind = WeightContext::build_indicator({0, 1, 2}, codes);
  const auto ie = ind.eval(phi);
  CHECK(ie.value == doctest::Approx(inner_max_indicator(codes, phi, {0, 1, 2}).value));
  const Vector ig = inner_max_gradient_indicator(codes, phi, {0, 1, 2});
  for (int i = 0; i < n; ++i) CHECK(ie.grad_phi[i] == doctest::Approx(ig[i]));

  const WeightContext rk = WeightContext::build_rkhs(z, 0.8, 0.3);
  const auto re = rk.eval(phi);
  const KernelGram gram = KernelGram::build(z, 0.8);
  CHECK(re.value == doctest::Approx(inner_max_rkhs(gram, phi, 0.3).value).epsilon(1e-12));
  const Vector rg = inner_max_gradient_rkhs(gram, phi, 0.3);
  for (int i = 0; i < n; ++i) CHECK(re.grad_phi[i] == doctest::Approx(rg[i]).epsilon(1e-10));
}

TEST_CASE("rkhs rejects gamma = 0 by default") {
  CHECK_THROWS_AS(WeightClass::rkhs(1.0, 0.0), Error);
  const KernelGram g = identity_gram(3);
  MiscoverageVector phi;
  phi.alpha = 0.1;
  phi.phi = {0.1, 0.0, -0.1};
  CHECK_THROWS_AS(inner_max_rkhs(g, phi, 0.0), Error);
}
