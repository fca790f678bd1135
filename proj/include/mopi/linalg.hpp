#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mopi/errors.hpp"

namespace mopi {

using Vector = std::vector<double>;

// Dense row-major matrix. Sizes in this project are bounded by calibration
// sample counts (a few thousand), so there is no sparse or blocked path.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {}

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }

  std::span<const double> row(int i) const {
    return {data_.data() + static_cast<size_t>(i) * cols_, static_cast<size_t>(cols_)};
  }
  std::span<double> row(int i) {
    return {data_.data() + static_cast<size_t>(i) * cols_, static_cast<size_t>(cols_)};
  }
  Vector row_vec(int i) const {
    auto r = row(i);
    return Vector(r.begin(), r.end());
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Vector helpers; every operation validates dimensions.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);  // y += alpha*x

Vector matvec(const Matrix& a, std::span<const double> x);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

// Cholesky factorization A = L L^T of a symmetric positive-definite matrix.
// Holds the lower factor; solves reuse it without refactorizing.
class Cholesky {
 public:
  // Throws NotPositiveDefinite if a pivot is not strictly positive, and
  // DimensionMismatch if A is not square or not symmetric within sym_tol.
  explicit Cholesky(const Matrix& a, double sym_tol = 1e-10);

  int size() const { return l_.rows(); }
  const Matrix& lower() const { return l_; }
  double log_det() const;  // of the original matrix A

  Vector solve(std::span<const double> b) const;
  Matrix solve(const Matrix& b) const;

 private:
  Matrix l_;
};

// Solves A X = B for symmetric positive-definite A.
Matrix spd_solve(const Matrix& a, const Matrix& b);
Vector spd_solve(const Matrix& a, std::span<const double> b);

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Adequate for the small (d_Y-sized) matrices used here.
struct SymEig {
  Vector values;    // ascending
  Matrix vectors;   // columns are eigenvectors
};
SymEig sym_eig(const Matrix& a, int max_sweeps = 64);

// Symmetric inverse square root of an SPD matrix via eigendecomposition.
Matrix inv_sqrt_spd(const Matrix& a);

double det_lower_triangular(const Matrix& l);

}  // namespace mopi
