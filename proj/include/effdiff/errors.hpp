#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace effdiff {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad call arguments (empty sample lists, non-positive step sizes, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Coefficient map returned a non-finite value; carries the evaluation point.
class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, Eigen::VectorXd y)
      : Error(what), point(std::move(y)) {}
  Eigen::VectorXd point;
};

// Integrator produced a non-finite state; carries the pre-step state.
class StepError : public Error {
 public:
  StepError(const std::string& what, Eigen::VectorXd x)
      : Error(what), state(std::move(x)) {}
  Eigen::VectorXd state;
};

// Linear solve failed to reach tolerance; keeps the residual trail.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::vector<double> residuals = {})
      : Error(what), residual_history(std::move(residuals)) {}
  std::vector<double> residual_history;
};

// Grid too coarse for a positivity-preserving discrete solution.
class GridError : public Error {
 public:
  using Error::Error;
};

// Ensemble-level failure (too many aborted trajectories).
class EnsembleError : public Error {
 public:
  using Error::Error;
};

// Config file / flag parsing problems. Message carries key context.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace effdiff
