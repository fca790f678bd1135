#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "mopi/data.hpp"
#include "mopi/linalg.hpp"
#include "mopi/mathfn.hpp"
#include "mopi/rng.hpp"

using namespace mopi;

namespace {

Matrix random_spd(int n, SeededRng& rng) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = rng.normal();
  Matrix a = matmul(m, transpose(m));
  for (int i = 0; i < n; ++i) a(i, i) += 1.0;
  return a;
}

double residual_max(const Matrix& a, const Matrix& x, const Matrix& b) {
  const Matrix ax = matmul(a, x);
  double worst = 0.0;
  for (int i = 0; i < b.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) worst = std::max(worst, std::fabs(ax(i, j) - b(i, j)));
  return worst;
}

}  // namespace

TEST_CASE("spd_solve identity and diagonal") {
  Matrix b(2, 1);
  b(0, 0) = 1.0;
  b(1, 0) = 2.0;
  const Matrix x = spd_solve(Matrix::identity(2), b);
  CHECK(x(0, 0) == doctest::Approx(1.0));
  CHECK(x(1, 0) == doctest::Approx(2.0));

  Matrix d(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = 4.0;
  Matrix rhs(2, 1);
  rhs(0, 0) = 2.0;
  rhs(1, 0) = 8.0;
  const Matrix sol = spd_solve(d, rhs);
  CHECK(sol(0, 0) == doctest::Approx(1.0));
  CHECK(sol(1, 0) == doctest::Approx(2.0));
}

TEST_CASE("spd_solve near-singular still passes the residual oracle") {
  Matrix a(2, 2);
  a(0, 0) = 1.0;
  a(0, 1) = 0.999;
  a(1, 0) = 0.999;
  a(1, 1) = 1.0;
  Matrix b(2, 1);
  b(0, 0) = 1.0;
  b(1, 0) = -1.0;
  double b_max = 1.0;
  try {
    const Matrix x = spd_solve(a, b);
    CHECK(residual_max(a, x, b) <= 1e-8 * (1.0 + b_max));
  } catch (const NotPositiveDefinite&) {
    // acceptable only if the factorization is numerically indefinite
  }
}

TEST_CASE("spd_solve round-trip on 200 random instances") {
  SeededRng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(50));
    const int k = 1 + static_cast<int>(rng.below(3));
    const Matrix a = random_spd(n, rng);
    Matrix b(n, k);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < k; ++j) b(i, j) = rng.normal();
    const Matrix x = spd_solve(a, b);
    double b_max = 0.0;
    for (double v : b.data()) b_max = std::max(b_max, std::fabs(v));
    CHECK(residual_max(a, x, b) <= 1e-8 * (1.0 + b_max));
  }
}

TEST_CASE("cholesky rejects asymmetric and indefinite input") {
  Matrix a(2, 2);
  a(0, 0) = 1.0;
  a(0, 1) = 0.5;
  a(1, 0) = -0.5;
  a(1, 1) = 1.0;
  CHECK_THROWS_AS(Cholesky{a}, DimensionMismatch);
  Matrix ind(2, 2);
  ind(0, 0) = 1.0;
  ind(0, 1) = 2.0;
  ind(1, 0) = 2.0;
  ind(1, 1) = 1.0;
  CHECK_THROWS_AS(Cholesky{ind}, NotPositiveDefinite);
}

TEST_CASE("sym_eig and inverse square root") {
  SeededRng rng(7);
  const Matrix a = random_spd(5, rng);
  const Matrix w = inv_sqrt_spd(a);
  const Matrix check = matmul(w, matmul(a, w));
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) CHECK(check(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-8));
}

TEST_CASE("normal quantile inverts the cdf") {
  for (double p : {1e-6, 0.01, 0.1, 0.5, 0.9, 0.975, 1.0 - 1e-6}) {
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
  }
  CHECK(normal_quantile(0.95) == doctest::Approx(1.6448536269514722).epsilon(1e-12));
}

TEST_CASE("rng reproducibility and stream independence") {
  SeededRng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  SeededRng c(123, 1);
  CHECK(SeededRng(123).next_u64() != c.next_u64());
}

TEST_CASE("uniform stays in range and normals have sane moments") {
  SeededRng rng(5);
  double mean = 0.0, var = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double z = rng.normal();
    mean += z / n;
    var += z * z / n;
  }
  CHECK(mean == doctest::Approx(0.0).epsilon(0.05));
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

namespace {

Dataset pool_of(int n) {
  Matrix x(n, 2), y(n, 1);
  std::vector<int> z(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = i;
    x(i, 1) = 2 * i;
    y(i, 0) = -i;
    z[i] = i % 3;
  }
  return Dataset(std::move(x), std::move(y), std::move(z), DataRole::Calibration);
}

}  // namespace

TEST_CASE("split sizes floor-allocate with remainder to test") {
  SeededRng rng(9);
  const SplitResult s = split_dataset(pool_of(10), {0.5, 0.3, 0.2}, rng);
  CHECK(s.pretrain.size() == 5);
  CHECK(s.calibration.size() == 3);
  CHECK(s.test.size() == 2);

  SeededRng rng2(9);
  const SplitResult s2 = split_dataset(pool_of(10), {0.55, 0.25, 0.20}, rng2);
  CHECK(s2.pretrain.size() == 5);
  CHECK(s2.calibration.size() == 2);
  CHECK(s2.test.size() == 3);
}

TEST_CASE("splits form a partition and are seed-deterministic") {
  SeededRng rng(17);
  const SplitResult s = split_dataset(pool_of(57), {0.4, 0.3, 0.3}, rng);
  std::multiset<double> seen;
  for (const Dataset* d : {&s.pretrain, &s.calibration, &s.test}) {
    for (int i = 0; i < d->size(); ++i) seen.insert(d->x()(i, 0));
  }
  CHECK(seen.size() == 57);
  for (int i = 0; i < 57; ++i) CHECK(seen.count(i) == 1);

  SeededRng rng_a(3), rng_b(3);
  const SplitResult a = split_dataset(pool_of(20), {0.5, 0.25, 0.25}, rng_a);
  const SplitResult b = split_dataset(pool_of(20), {0.5, 0.25, 0.25}, rng_b);
  for (int i = 0; i < a.pretrain.size(); ++i) {
    CHECK(a.pretrain.x()(i, 0) == b.pretrain.x()(i, 0));
  }
  CHECK(a.pretrain.role() == DataRole::Pretrain);
  CHECK(a.test.role() == DataRole::Test);
}

TEST_CASE("degenerate splits error") {
  SeededRng rng(1);
  CHECK_THROWS_AS(split_dataset(pool_of(3), {0.9, 0.05, 0.05}, rng), EmptySplit);
  CHECK_THROWS_AS(split_dataset(pool_of(10), {0.5, 0.5, 0.5}, rng), Error);
}
