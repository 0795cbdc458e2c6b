#pragma once

// Grid-based reference solutions on the torus: stationary Fokker-Planck
// density, drift cell problem, and the effective-diffusivity integral.

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "effdiff/problem.hpp"

namespace effdiff {

// Scalar or vector field on the uniform periodic grid {0, 1/n, ...}^d.
// Nodes are flattened lexicographically with axis 0 fastest.
struct TorusGridField {
  int dim = 0;
  int n = 0;
  Eigen::MatrixXd values;  // (n^d) x components

  TorusGridField() = default;
  TorusGridField(int dim_, int n_, int components);

  int components() const { return static_cast<int>(values.cols()); }
  long long nodes() const { return values.rows(); }

  long long flat_index(const Eigen::VectorXi& idx) const;        // mod-n wrap
  Eigen::VectorXi multi_index(long long flat) const;
  Eigen::VectorXd node_point(long long flat) const;

  // periodic trapezoidal rule: h^d * sum over nodes
  double integral(int component = 0) const;
};

struct EulerianSolution {
  TorusGridField r;    // invariant density, integral 1
  TorusGridField chi;  // corrector, d components, each mean zero
  Eigen::VectorXd b_bar;
  Eigen::MatrixXd A_eff;           // symmetrized
  double asymmetry = 0.0;          // |A - A^T|_max before symmetrizing
  double density_residual = 0.0;   // discrete operator residuals, relative
  Eigen::VectorXd cell_residuals;
  int n = 0;
};

// Discrete adjoint-operator solve of L* r = 0 with integral(r) = 1 imposed
// through a Lagrange-multiplier bordering. Fourth-order central differences.
TorusGridField solve_invariant_density(const ProblemDefinition& problem, int n,
                                       double tol_lin = 1e-10);

// One nondivergence solve per component: -A:hess chi_i - b.grad chi_i =
// b_i - b_bar_i with mean-zero bordering; b_bar by grid quadrature of b r.
std::pair<TorusGridField, Eigen::VectorXd> solve_cell_problem(
    const ProblemDefinition& problem, const TorusGridField& r, double tol_lin = 1e-10);

// integral of (I + grad chi) A (I + grad chi)^T r, symmetrized; the
// asymmetry of the raw quadrature is reported when requested.
Eigen::MatrixXd effective_diffusivity_eulerian(const ProblemDefinition& problem,
                                               const TorusGridField& r,
                                               const TorusGridField& chi,
                                               double* asymmetry_out = nullptr);

Eigen::VectorXd mean_drift_eulerian(const ProblemDefinition& problem,
                                    const TorusGridField& r);

EulerianSolution solve_reference(const ProblemDefinition& problem, int n,
                                 double tol_lin = 1e-10);

}  // namespace effdiff
