#pragma once

#include <optional>
#include <string>

#include "mopi/data.hpp"
#include "mopi/groups.hpp"

namespace mopi {

// Seeded synthetic benchmark generators. Every kind has closed-form Gaussian
// conditionals, exposed through conditional_law for exact-MSCE evaluation.
struct GeneratorSpec {
  enum class Kind {
    MultiLabel,       // 1-d X ~ U(0,5), d_Y-dim Y with cross-dimensional dependence
    Equalized1,       // binary sensitive Z = 1{X_1 <= 2.5}
    Equalized1Prime,  // Z = 1{rho X_1 + (1-rho) V <= 2.5 rho}
    Equalized2,       // 4-component mixture, Z | X categorical via softmax
    Hetero1x,         // test-conditional, variance driven by X_1
    Hetero2x,         // variance depends on all coordinates
    Hetero3x,         // discrete variance structure
  };

  Kind kind = Kind::Hetero1x;
  int n = 100;
  uint64_t seed = 1;
  int d_y = 2;   // MultiLabel
  int d_x = 6;   // Hetero kinds: 6 or 11
  double rho = 1.0;  // Equalized1Prime
  // When set, Z is the group membership bit pattern of X under this scheme.
  std::optional<GroupScheme> scheme;

  DataRole role = DataRole::Calibration;

  int dim_x() const;
  int dim_y() const;
  bool z_is_categorical() const;

  static Kind kind_from_string(const std::string& s);
  static std::string kind_to_string(Kind k);
};

Dataset generate(const GeneratorSpec& spec);

// Exact conditional distribution of Y given (X, Z) = (x, z); Gaussian for
// every synthetic kind.
struct ConditionalLaw {
  Vector mean;
  Matrix cov;          // d_y x d_y
  double sigma() const;          // 1-d only
  double quantile(double p) const;  // 1-d only
  // P{ Y outside [lo, hi] } for 1-d labels.
  double interval_miscoverage(double lo, double hi) const;
};

ConditionalLaw conditional_law(const GeneratorSpec& spec, std::span<const double> x,
                               std::optional<int> z_code = std::nullopt);

// Mixture weights of Equalized2 at x (softmax; sums to 1 exactly).
Vector equalized2_weights(std::span<const double> x);

// --- CSV ingestion ----------------------------------------------------------

struct CsvSchema {
  std::vector<std::string> x_columns;
  std::vector<std::string> y_columns;
  std::optional<std::string> z_column;
  bool z_categorical = true;
  DataRole role = DataRole::Calibration;
};

Dataset ingest_csv(const std::string& path, const CsvSchema& schema);

// Writes x/y/z columns with 17 significant digits plus a metadata JSON
// (generator spec when known, seed, git hash) next to the file.
void export_csv(const Dataset& data, const std::string& path,
                const std::string& metadata_json = "");

}  // namespace mopi
