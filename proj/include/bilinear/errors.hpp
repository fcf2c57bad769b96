#pragma once

#include <stdexcept>
#include <string>

namespace bilinear {

// Malformed or unreadable input (IDX files, model files, missing data).
// CLI maps this to exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Failure of an iterative numeric procedure (SVD non-convergence, a
// non-finite objective during training). CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bilinear
