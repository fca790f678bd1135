#include "mopi/linalg.hpp"

#include <cmath>
#include <string>

namespace mopi {

namespace {

void check_same_size(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw DimensionMismatch(std::string(what) + ": " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
  }
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  check_same_size(a, b, "dot");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::fabs(v));
  return m;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  check_same_size(a, b, "squared_distance");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_same_size(x, y, "axpy");
  for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  if (static_cast<size_t>(a.cols()) != x.size()) {
    throw DimensionMismatch("matvec: " + std::to_string(a.cols()) + " cols vs vector " +
                            std::to_string(x.size()));
  }
  Vector y(a.rows(), 0.0);
  for (int i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionMismatch("matmul: " + std::to_string(a.cols()) + " vs " +
                            std::to_string(b.rows()));
  }
  Matrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Cholesky::Cholesky(const Matrix& a, double sym_tol) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch("cholesky: matrix is " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()));
  }
  const int n = a.rows();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (std::fabs(a(i, j) - a(j, i)) > sym_tol * (1.0 + std::fabs(a(i, j)))) {
        throw DimensionMismatch("cholesky: matrix not symmetric at (" + std::to_string(i) + "," +
                                std::to_string(j) + ")");
      }
    }
  }
  l_ = Matrix(n, n);
  for (int j = 0; j < n; ++j) {
    double d = a(j, j);
    for (int k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw NotPositiveDefinite("pivot " + std::to_string(j) + " = " + std::to_string(d));
    }
    l_(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
      l_(i, j) = s / l_(j, j);
    }
  }
}

double Cholesky::log_det() const {
  double s = 0.0;
  for (int i = 0; i < l_.rows(); ++i) s += std::log(l_(i, i));
  return 2.0 * s;
}

Vector Cholesky::solve(std::span<const double> b) const {
  const int n = l_.rows();
  if (static_cast<size_t>(n) != b.size()) {
    throw DimensionMismatch("cholesky solve: rhs size " + std::to_string(b.size()));
  }
  Vector y(b.begin(), b.end());
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < i; ++k) y[i] -= l_(i, k) * y[k];
    y[i] /= l_(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    for (int k = i + 1; k < n; ++k) y[i] -= l_(k, i) * y[k];
    y[i] /= l_(i, i);
  }
  return y;
}

Matrix Cholesky::solve(const Matrix& b) const {
  if (b.rows() != l_.rows()) {
    throw DimensionMismatch("cholesky solve: rhs has " + std::to_string(b.rows()) + " rows");
  }
  Matrix x(b.rows(), b.cols());
  Vector col(b.rows());
  for (int j = 0; j < b.cols(); ++j) {
    for (int i = 0; i < b.rows(); ++i) col[i] = b(i, j);
    Vector sol = solve(col);
    for (int i = 0; i < b.rows(); ++i) x(i, j) = sol[i];
  }
  return x;
}

Matrix spd_solve(const Matrix& a, const Matrix& b) { return Cholesky(a).solve(b); }

Vector spd_solve(const Matrix& a, std::span<const double> b) { return Cholesky(a).solve(b); }

SymEig sym_eig(const Matrix& a, int max_sweeps) {
  if (a.rows() != a.cols()) throw DimensionMismatch("sym_eig: not square");
  const int n = a.rows();
  Matrix d = a;
  Matrix v = Matrix::identity(n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += d(p, q) * d(p, q);
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::fabs(d(p, q)) < 1e-300) continue;
        const double theta = (d(q, q) - d(p, p)) / (2.0 * d(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double dkp = d(k, p), dkq = d(k, q);
          d(k, p) = c * dkp - s * dkq;
          d(k, q) = s * dkp + c * dkq;
        }
        for (int k = 0; k < n; ++k) {
          const double dpk = d(p, k), dqk = d(q, k);
          d(p, k) = c * dpk - s * dqk;
          d(q, k) = s * dpk + c * dqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  SymEig out;
  out.values.resize(n);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (d(order[j], order[j]) < d(order[i], order[i])) std::swap(order[i], order[j]);
  out.vectors = Matrix(n, n);
  for (int i = 0; i < n; ++i) {
    out.values[i] = d(order[i], order[i]);
    for (int k = 0; k < n; ++k) out.vectors(k, i) = v(k, order[i]);
  }
  return out;
}

Matrix inv_sqrt_spd(const Matrix& a) {
  const SymEig eig = sym_eig(a);
  const int n = a.rows();
  for (double lam : eig.values) {
    if (!(lam > 0.0)) throw NotPositiveDefinite("inv_sqrt_spd: eigenvalue " + std::to_string(lam));
  }
  Matrix out(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k)
        s += eig.vectors(i, k) * eig.vectors(j, k) / std::sqrt(eig.values[k]);
      out(i, j) = s;
    }
  }
  return out;
}

double det_lower_triangular(const Matrix& l) {
  double d = 1.0;
  for (int i = 0; i < l.rows(); ++i) d *= l(i, i);
  return d;
}

}  // namespace mopi
