#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace scintikit {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: nonpositive extents, malformed parameters, bad fractions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A density or argument outside the domain of a thermodynamic function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The Neumann Poisson right-hand side does not integrate to zero.
class CompatibilityError : public Error {
 public:
  CompatibilityError(const std::string& what, double integral)
      : Error(what), integral_(integral) {}
  double integral() const { return integral_; }

 private:
  double integral_;
};

/// An iterative solver failed to reach its tolerance.
class IterationError : public Error {
 public:
  IterationError(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& residual_history() const { return history_; }

 private:
  std::vector<double> history_;
};

/// A constant that would be divided by is zero (K1 = 0, M* = 0, ...).
class DegenerateBoundError : public Error {
 public:
  using Error::Error;
};

/// The stationary charge constraint has no admissible solution.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// A time step could not be completed (positivity loss, retry exhaustion).
class StepError : public Error {
 public:
  using Error::Error;
};

/// Configuration parse or schema failure.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace scintikit
