#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace critpoints {

/// Invalid measure description or experiment configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Evaluation point sits on a point mass of the measure.
class SingularityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Evaluation point coincides with a root; `index` names the root.
class PoleError : public std::domain_error {
 public:
  PoleError(std::size_t index, const std::string& what)
      : std::domain_error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Simultaneous iteration did not certify every zero.
class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(double worst_residual, const std::string& what)
      : std::runtime_error(what), worst_residual_(worst_residual) {}
  double worst_residual() const noexcept { return worst_residual_; }

 private:
  double worst_residual_;
};

/// A certified point lies too close to a counting circle to decide inside/outside.
class IndeterminateCount : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace critpoints
