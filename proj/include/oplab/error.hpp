#pragma once

#include <stdexcept>
#include <string>

namespace oplab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad parameters or inputs that violate a type invariant.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an algorithm does not hold for the given inputs.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Raised by the unregularized least-squares solve when the empirical design
// at some level is numerically rank deficient.
class SingularDesignError : public Error {
 public:
  SingularDesignError(int level, double min_eigenvalue, double trace)
      : Error("singular design at level " + std::to_string(level + 1) +
              ": min eigenvalue " + std::to_string(min_eigenvalue) +
              " <= 1e-10 * trace (" + std::to_string(trace) + ")"),
        level_(level) {}

  // Zero-based level index.
  int level() const noexcept { return level_; }

 private:
  int level_;
};

}  // namespace oplab
