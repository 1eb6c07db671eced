#pragma once

#include <stdexcept>
#include <string>

namespace eigenshrink {

/// Bad input: wrong shape, unsorted spectrum, negative values, inconsistent dimensions.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input that is well formed but outside the mathematical domain of the operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical procedure failed to reach its tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double last_residual);
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

}  // namespace eigenshrink
