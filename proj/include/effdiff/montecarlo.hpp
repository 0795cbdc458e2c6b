#pragma once

// Particle ensembles: drives M trajectories to horizon T = N h, estimates
// the effective diffusivity from the endpoint spread, accumulates torus
// occupation histograms, and runs time-step convergence studies.

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "effdiff/eulerian.hpp"
#include "effdiff/schemes.hpp"

namespace effdiff {

struct EnsembleConfig {
  long long M = 200000;
  double T = 50.0;
  SchemeConfig scheme;
  std::uint64_t seed = 0;
  Eigen::VectorXd x0;        // empty means the origin
  int histogram_bins = 0;    // per axis; 0 disables
  double burn_in_fraction = 0.10;
};

struct ExecutionPolicy {
  int workers = 0;           // 0: hardware concurrency
  bool force_scalar = false; // diagnostic: per-particle path even when a batch kernel exists
};

struct DiffusivityEstimate {
  Eigen::MatrixXd matrix;     // Var(X_T) / (2T), 1/M normalization
  Eigen::MatrixXd std_error;  // per entry, delta method on fourth moments
  long long M = 0;
  double T = 0.0;
  double h = 0.0;
};

struct EnsembleResult {
  DiffusivityEstimate diffusivity;
  Eigen::VectorXd mean_drift;            // (mean(X_T) - x0) / T
  Eigen::VectorXd mean_drift_std_error;
  std::optional<TorusGridField> histogram;
  long long failures = 0;
  long long steps = 0;    // N after rounding T/h
  double T_adjusted = 0;  // N h; equals T when T/h is integral
};

// Bitwise deterministic for fixed (problem, config): every particle owns the
// (seed, particle, step) substream and all floating-point reductions run in
// particle-index order after the parallel sweep.
EnsembleResult simulate_ensemble(const ProblemDefinition& problem,
                                 const EnsembleConfig& config,
                                 const ExecutionPolicy& exec = {});

// Covariance of the rows about their mean, scaled by 1/(2 M T). Rows are
// final unwrapped positions. Deviations are taken against the first row
// before accumulation, so a constant shift of all rows that stays exact in
// floating point leaves the result bitwise unchanged.
DiffusivityEstimate effective_diffusivity_estimate(const Eigen::MatrixXd& final_positions,
                                                   double T, double h = 0.0);

// (mean of rows - x0) / T, with per-component standard errors from the 1/M
// sample variance of the rows.
std::pair<Eigen::VectorXd, Eigen::VectorXd> mean_drift_estimate(
    const Eigen::MatrixXd& final_positions, const Eigen::VectorXd& x0, double T);

// Normalized occupation density from wrapped samples (rows in [0,1)^d);
// (cell volume) * sum of cells = 1.
TorusGridField invariant_histogram(const Eigen::MatrixXd& wrapped_samples, int bins);

struct ConvergencePoint {
  double h = 0.0;
  SchemeKind scheme = SchemeKind::euler_maruyama;
  Eigen::MatrixXd err_entries;        // |estimate - reference|
  Eigen::MatrixXd std_error_entries;
  double err_frobenius = 0.0;
  double std_error_frobenius = 0.0;   // first-order propagation through the norm
  double wallclock_seconds = 0.0;
  bool excluded = false;              // noise gate: std error above 20% of error
  DiffusivityEstimate estimate;
};

struct ConvergenceStudy {
  std::vector<ConvergencePoint> points;
  double slope_frobenius = 0.0;  // OLS on log h vs log err over kept points
  int points_used = 0;
};

// Runs simulate_ensemble per h with the same master seed (T fixed, N
// rounded per h) and fits the log-log slope of the Frobenius error against
// the supplied reference matrix.
ConvergenceStudy convergence_study(const ProblemDefinition& problem,
                                   const std::vector<double>& h_list,
                                   const EnsembleConfig& base,
                                   const Eigen::MatrixXd& reference,
                                   const ExecutionPolicy& exec = {});

// Least-squares slope of log(err) against log(h); pairs are (h, err).
double fit_loglog_slope(const std::vector<std::pair<double, double>>& pts);

}  // namespace effdiff
