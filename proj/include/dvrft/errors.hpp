#pragma once

#include <stdexcept>
#include <string>

namespace dvrft {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Continuous/discrete mismatch or sample-period mismatch.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent matrix or signal dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition on the arguments does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Numerical procedure failed (non-convergence, non-finite values).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Feedback interconnection with an algebraic loop (1 + D_p D_c == 0).
class IllPosedLoopError : public Error {
 public:
  using Error::Error;
};

/// Reference model cannot be inverted under the selected policy.
class NonInvertibleError : public Error {
 public:
  using Error::Error;
};

/// Sampled box of the frequency constraints has no interior.
class EmptyBoxError : public Error {
 public:
  EmptyBoxError(const std::string& what, int minimal_sampling)
      : Error(what), minimal_sampling_(minimal_sampling) {}

  /// Smallest sampling parameter M for which the box opens; -1 if none does.
  int minimal_sampling() const noexcept { return minimal_sampling_; }

 private:
  int minimal_sampling_;
};

}  // namespace dvrft
