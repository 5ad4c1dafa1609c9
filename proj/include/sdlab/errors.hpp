#pragma once

#include <stdexcept>
#include <string>

namespace sdlab {

/// Invalid input: bad parameters, region mismatch, malformed config.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A requested computation exceeds the configured memory or work budget.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A checked numerical property failed at run time (duality gap, stagnation, ...).
class PropertyFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Explicit time step violates the stability bound.
class CflViolation : public InvalidArgument {
 public:
  CflViolation(const std::string& what, double admissible_dt)
      : InvalidArgument(what), admissible_dt_(admissible_dt) {}
  double admissible_dt() const noexcept { return admissible_dt_; }

 private:
  double admissible_dt_;
};

}  // namespace sdlab
