#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace trajviz {

using NodeId = std::uint32_t;

// Row i of a matrix is the vector of one node; row-major keeps rows contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Bad invocation or configuration. Maps to CLI exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input or a broken data invariant. Maps to CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical routine failed (non-finite values, no convergence). Maps to
/// CLI exit code 3. The message always names the module and operation.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::string_view module, std::string_view op, std::string_view what)
      : std::runtime_error(std::string(module) + "::" + std::string(op) + ": " +
                           std::string(what)) {}
};

/// 64-bit FNV-1a. Used for config fingerprints and provenance input hashes.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

std::string hex64(std::uint64_t value);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace trajviz
