#pragma once

#include <stdexcept>
#include <string>

namespace fofreg {

/// Matrix or vector input contained NaN/Inf entries.
struct NumericalInputError : std::runtime_error {
  explicit NumericalInputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Factorization failed even after pivoting and a ridge-jitter retry.
struct SingularSystemError : std::runtime_error {
  explicit SingularSystemError(const std::string& msg) : std::runtime_error(msg) {}
};

/// GCV denominator tr(I - alpha A) was nonpositive at this lambda.
struct DegenerateSmootherError : std::runtime_error {
  explicit DegenerateSmootherError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Every lambda in the search grid was degenerate.
struct SelectionFailureError : std::runtime_error {
  explicit SelectionFailureError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fofreg
