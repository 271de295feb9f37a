#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fglab {

// Base for every error raised by the library. `kind()` is a stable
// machine-readable tag used in CLI error records.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& what) : Error("dimension_mismatch", what) {}
};

// A vector whose norm is zero reached an operation that normalizes it.
class ZeroVectorError : public Error {
 public:
  explicit ZeroVectorError(const std::string& what) : Error("zero_vector", what) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error("invalid_argument", what) {}
};

class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(const std::string& what) : Error("non_finite", what) {}
};

class SvdNonConvergence : public Error {
 public:
  SvdNonConvergence(int iterations, double residual)
      : Error("svd_non_convergence",
              "truncated SVD did not converge after " + std::to_string(iterations) +
                  " iterations (rotation " + std::to_string(residual) + ")"),
        iterations_(iterations) {}
  int iterations() const noexcept { return iterations_; }

 private:
  int iterations_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

}  // namespace fglab
