#pragma once

#include <stdexcept>
#include <string>

namespace asep {

/// Base of every error raised by the library. `exit_code()` follows the CLI
/// contract: 2 precondition, 3 convergence/budget, 4 internal inconsistency.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 4; }
  virtual const char* kind() const noexcept { return "error"; }
};

class DomainError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
  const char* kind() const noexcept override { return "domain_error"; }
};

/// A denominator came within the pole threshold; the contour is misplaced.
class PoleError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
  const char* kind() const noexcept override { return "pole_error"; }
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
  const char* kind() const noexcept override { return "convergence_error"; }
};

class BudgetError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
  const char* kind() const noexcept override { return "budget_error"; }
};

/// NaN or Inf produced by an integrand.
class EvaluationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "evaluation_error"; }
};

/// A computed probability violates a structural property (imaginary part,
/// negativity) beyond tolerance.
class ConsistencyError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "consistency_error"; }
};

}  // namespace asep
