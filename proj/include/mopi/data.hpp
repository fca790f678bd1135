#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mopi/linalg.hpp"
#include "mopi/rng.hpp"

namespace mopi {

enum class DataRole { Pretrain, Calibration, Test };

std::string to_string(DataRole role);

enum class ZKind { Categorical, Real };

// Columnar sample container: covariates X (n x d_X), labels Y (n x d_Y) and a
// conditioning value Z per row, either a categorical code or a real vector.
class Dataset {
 public:
  Dataset(Matrix x, Matrix y, std::vector<int> z_codes, DataRole role);
  Dataset(Matrix x, Matrix y, Matrix z_real, DataRole role);

  int size() const { return x_.rows(); }
  int dim_x() const { return x_.cols(); }
  int dim_y() const { return y_.cols(); }
  DataRole role() const { return role_; }
  ZKind z_kind() const { return z_kind_; }

  const Matrix& x() const { return x_; }
  const Matrix& y() const { return y_; }
  std::span<const double> x_row(int i) const { return x_.row(i); }
  std::span<const double> y_row(int i) const { return y_.row(i); }

  const std::vector<int>& z_codes() const;
  const Matrix& z_real() const;
  std::span<const double> z_row(int i) const;  // Real kind only

  Dataset subset(std::span<const int> indices, DataRole role) const;
  Dataset with_role(DataRole role) const;
  // Replaces Z by the given categorical codes (e.g. a group bit pattern).
  Dataset with_z_codes(std::vector<int> codes) const;

 private:
  Matrix x_;
  Matrix y_;
  ZKind z_kind_;
  std::vector<int> z_codes_;
  Matrix z_real_;
  DataRole role_;
};

// Disjoint shuffled partition; sizes are floor-allocated with the remainder
// going to the test split.
struct SplitFractions {
  double pretrain;
  double calibration;
  double test;
};

struct SplitResult {
  Dataset pretrain;
  Dataset calibration;
  Dataset test;
};

SplitResult split_dataset(const Dataset& pool, const SplitFractions& fractions, SeededRng& rng);

}  // namespace mopi
