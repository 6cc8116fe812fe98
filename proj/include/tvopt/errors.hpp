#pragma once

#include <stdexcept>
#include <string>

namespace tvopt {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent matrix/vector dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid argument values or violated construction invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A numerical routine failed to produce a trustworthy result
// (eigenvalue iteration cap, resolvent probes, non-finite values, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Controller synthesis is infeasible (undetectable pair, failed gain solve).
class SynthesisError : public Error {
 public:
  using Error::Error;
};

// A linear solve hit a numerically singular matrix.
class SingularityError : public Error {
 public:
  using Error::Error;
};

// An iterative solver ran out of iterations or line-search steps.
class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

// A requested algebraic condition cannot hold (e.g. image containment).
class InfeasibilityError : public Error {
 public:
  using Error::Error;
};

// Malformed input text (network files, scenario configs).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Adaptive step-size control collapsed below the configured minimum.
class StiffnessError : public Error {
 public:
  using Error::Error;
};

}  // namespace tvopt
