#pragma once

#include <stdexcept>
#include <string>

namespace mopi {

// Base for all library errors so callers can catch mopi failures as a group.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& msg) : Error("dimension mismatch: " + msg) {}
};

struct NotPositiveDefinite : Error {
  explicit NotPositiveDefinite(const std::string& msg)
      : Error("matrix not positive definite: " + msg) {}
};

struct EmptyGroup : Error {
  explicit EmptyGroup(const std::string& msg) : Error("empty group: " + msg) {}
};

struct EmptySplit : Error {
  explicit EmptySplit(const std::string& msg) : Error("empty split: " + msg) {}
};

struct InsufficientCalibration : Error {
  explicit InsufficientCalibration(const std::string& msg)
      : Error("insufficient calibration data: " + msg) {}
};

struct NonFiniteObjective : Error {
  explicit NonFiniteObjective(const std::string& msg) : Error("non-finite objective: " + msg) {}
};

struct SingularDesign : Error {
  explicit SingularDesign(const std::string& msg) : Error("singular design: " + msg) {}
};

struct Unsupported : Error {
  explicit Unsupported(const std::string& msg) : Error("unsupported: " + msg) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& msg) : Error("parse error: " + msg) {}
};

struct SchemaError : Error {
  explicit SchemaError(const std::string& msg) : Error("schema error: " + msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

struct DegenerateBalls : Error {
  explicit DegenerateBalls(const std::string& msg) : Error("degenerate balls: " + msg) {}
};

struct AllBinsEmpty : Error {
  explicit AllBinsEmpty(const std::string& msg) : Error("all bins empty: " + msg) {}
};

struct ZeroWeightMass : Error {
  explicit ZeroWeightMass(const std::string& msg) : Error("zero weight mass: " + msg) {}
};

struct UnsupportedKind : Error {
  explicit UnsupportedKind(const std::string& msg) : Error("unsupported kind: " + msg) {}
};

struct HashMismatch : Error {
  explicit HashMismatch(const std::string& msg) : Error("pretrained hash mismatch: " + msg) {}
};

}  // namespace mopi
