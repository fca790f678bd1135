#include "mopi/data.hpp"

#include <cmath>

#include "mopi/errors.hpp"

namespace mopi {

std::string to_string(DataRole role) {
  switch (role) {
    case DataRole::Pretrain: return "pretrain";
    case DataRole::Calibration: return "calibration";
    case DataRole::Test: return "test";
  }
  return "?";
}

Dataset::Dataset(Matrix x, Matrix y, std::vector<int> z_codes, DataRole role)
    : x_(std::move(x)),
      y_(std::move(y)),
      z_kind_(ZKind::Categorical),
      z_codes_(std::move(z_codes)),
      role_(role) {
  if (x_.rows() == 0) throw Error("dataset must be non-empty");
  if (y_.rows() != x_.rows() || static_cast<int>(z_codes_.size()) != x_.rows()) {
    throw DimensionMismatch("dataset: x has " + std::to_string(x_.rows()) + " rows, y " +
                            std::to_string(y_.rows()) + ", z " + std::to_string(z_codes_.size()));
  }
}

Dataset::Dataset(Matrix x, Matrix y, Matrix z_real, DataRole role)
    : x_(std::move(x)),
      y_(std::move(y)),
      z_kind_(ZKind::Real),
      z_real_(std::move(z_real)),
      role_(role) {
  if (x_.rows() == 0) throw Error("dataset must be non-empty");
  if (y_.rows() != x_.rows() || z_real_.rows() != x_.rows()) {
    throw DimensionMismatch("dataset: x has " + std::to_string(x_.rows()) + " rows, y " +
                            std::to_string(y_.rows()) + ", z " + std::to_string(z_real_.rows()));
  }
}

const std::vector<int>& Dataset::z_codes() const {
  if (z_kind_ != ZKind::Categorical) throw Error("dataset z is not categorical");
  return z_codes_;
}

const Matrix& Dataset::z_real() const {
  if (z_kind_ != ZKind::Real) throw Error("dataset z is not real-valued");
  return z_real_;
}

std::span<const double> Dataset::z_row(int i) const { return z_real().row(i); }

Dataset Dataset::subset(std::span<const int> indices, DataRole role) const {
  const int m = static_cast<int>(indices.size());
  Matrix x(m, dim_x());
  Matrix y(m, dim_y());
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < dim_x(); ++j) x(i, j) = x_(indices[i], j);
    for (int j = 0; j < dim_y(); ++j) y(i, j) = y_(indices[i], j);
  }
  if (z_kind_ == ZKind::Categorical) {
    std::vector<int> z(m);
    for (int i = 0; i < m; ++i) z[i] = z_codes_[indices[i]];
    return Dataset(std::move(x), std::move(y), std::move(z), role);
  }
  Matrix z(m, z_real_.cols());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < z_real_.cols(); ++j) z(i, j) = z_real_(indices[i], j);
  return Dataset(std::move(x), std::move(y), std::move(z), role);
}

Dataset Dataset::with_role(DataRole role) const {
  Dataset copy = *this;
  copy.role_ = role;
  return copy;
}

Dataset Dataset::with_z_codes(std::vector<int> codes) const {
  if (static_cast<int>(codes.size()) != size()) {
    throw DimensionMismatch("with_z_codes: " + std::to_string(codes.size()) + " codes for " +
                            std::to_string(size()) + " rows");
  }
  return Dataset(x_, y_, std::move(codes), role_);
}

SplitResult split_dataset(const Dataset& pool, const SplitFractions& f, SeededRng& rng) {
  if (!(f.pretrain > 0.0 && f.calibration > 0.0 && f.test > 0.0)) {
    throw Error("split fractions must be positive");
  }
  if (std::fabs(f.pretrain + f.calibration + f.test - 1.0) > 1e-9) {
    throw Error("split fractions must sum to 1");
  }
  const int n = pool.size();
  const int n_pre = static_cast<int>(std::floor(n * f.pretrain));
  const int n_cal = static_cast<int>(std::floor(n * f.calibration));
  const int n_test = n - n_pre - n_cal;
  if (n_pre == 0 || n_cal == 0 || n_test == 0) {
    throw EmptySplit("sizes (" + std::to_string(n_pre) + "," + std::to_string(n_cal) + "," +
                     std::to_string(n_test) + ") from pool of " + std::to_string(n));
  }
  const std::vector<int> perm = rng.permutation(n);
  const std::span<const int> all(perm);
  return SplitResult{
      pool.subset(all.subspan(0, n_pre), DataRole::Pretrain),
      pool.subset(all.subspan(n_pre, n_cal), DataRole::Calibration),
      pool.subset(all.subspan(n_pre + n_cal, n_test), DataRole::Test),
  };
}

}  // namespace mopi
