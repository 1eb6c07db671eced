#pragma once

#include <optional>

#include <Eigen/Core>

namespace eigenshrink::detail {

/// Least-squares problem min (1/m) ||r(x)||^2 for the damped Gauss-Newton driver.
class LmProblem {
 public:
  virtual ~LmProblem() = default;
  /// Residual at x. May normalise x in place (for instance sort it). Throws SolverError on failure.
  virtual Eigen::VectorXd residual(Eigen::VectorXd& x) = 0;
  /// Make the most recent residual() evaluation the current point.
  virtual void accept() = 0;
  /// Jacobian at the current point.
  virtual Eigen::MatrixXd jacobian() = 0;
};

struct LmOptions {
  int max_iterations = 500;
  double tolerance = 1e-8;             // stop when the relative objective decrease falls below this
  std::optional<double> lower_bound;   // box constraint x >= lower_bound
  std::optional<double> objective_floor;  // stop once the objective is this small; default 1e-20 max|x0|^2
  /// Accepted steps between Jacobian evaluations; in between the Jacobian gets Broyden
  /// rank-one updates. 0 evaluates it at every step. Convergence is only declared right
  /// after a fresh evaluation.
  int broyden_steps = 0;
};

struct LmResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  double initial_objective = 0.0;
  int iterations = 0;
  int evaluations = 0;
  int jacobians = 0;
  bool converged = false;
};

LmResult levenberg_marquardt(LmProblem& problem, Eigen::VectorXd x0, const LmOptions& opts);

}  // namespace eigenshrink::detail
