#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace aploc {

inline constexpr const char* kVersion = "0.1.0";

using Vec3 = Eigen::Vector3d;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using LeadField = Eigen::Matrix<double, Eigen::Dynamic, 3>;  // M x 3

/// Invalid argument values (counts, radii, malformed requests).
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Inputs outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Rank deficiency / deflated-out configurations that make a solve impossible.
struct DegeneracyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure (singular system, non-finite result).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Configuration file violates the schema. `path` is the offending field.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& field_path, const std::string& what)
      : std::runtime_error(field_path + ": " + what), path(field_path) {}
  std::string path;
};

/// Filesystem-level failure (unreadable input, unwritable output).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class OrientationMode { fixed, free };

inline const char* to_string(OrientationMode m) {
  return m == OrientationMode::fixed ? "fixed" : "free";
}

}  // namespace aploc
