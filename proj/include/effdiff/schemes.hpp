#pragma once

// Single-step weak SDE integrators: Euler-Maruyama, Milstein with either the
// commutative shortcut or Fourier-Legendre sampling of the double Ito
// integral, and the second-order modified Milstein scheme.

#include <optional>
#include <string>

#include <Eigen/Dense>

#include "effdiff/problem.hpp"

namespace effdiff {

enum class SchemeKind { euler_maruyama, milstein, modified_milstein };

std::string to_string(SchemeKind kind);
SchemeKind scheme_from_string(const std::string& s);

struct SchemeConfig {
  SchemeKind kind = SchemeKind::euler_maruyama;
  double h = 0.01;
  int fl_order = 2;  // q; auxiliary Gaussian vectors per step on the FL path
  std::optional<bool> force_commutative;
};

struct GaussianDraw {
  Eigen::VectorXd xi;                   // primary N(0, I_d) vector
  std::vector<Eigen::VectorXd> xi_aux;  // q extra vectors, FL path only
};

// x + b(x) h + sigma(x) sqrt(h) xi
Eigen::VectorXd em_step(const ProblemDefinition& problem, const Eigen::VectorXd& x,
                        double h, const GaussianDraw& draw);

// Double Ito integral matrix J for one step. The commutative path returns
// (h/2)(xi xi^T - I). The Fourier-Legendre path of order q returns
//   J[j1,j2] = (h/2)(xi_j1 xi_j2
//              + sum_k (4k^2-1)^{-1/2} (xi^(k-1)_j1 xi^(k)_j2 - xi^(k)_j1 xi^(k-1)_j2)
//              - delta_j1j2)
// with xi^(0) = xi. Either way J + J^T = h(xi xi^T - I) holds exactly.
Eigen::MatrixXd sample_double_ito(int d, double h, int q, const GaussianDraw& draw,
                                  bool commutative);

// em_step plus the correction M_i = Xi_i(x) : J. Uses the problem's cached
// commutativity verdict unless overridden.
Eigen::VectorXd milstein_step(const ProblemDefinition& problem, const Eigen::VectorXd& x,
                              double h, int q, const GaussianDraw& draw,
                              std::optional<bool> commutative_override = {});

// Milstein step with (b + h b1, sigma + h sigma1) in the increment and Xi
// built from the unmodified sigma.
Eigen::VectorXd modified_milstein_step(const ProblemDefinition& problem,
                                       const Eigen::VectorXd& x, double h, int q,
                                       const GaussianDraw& draw,
                                       std::optional<bool> commutative_override = {});

// Dispatch on config.kind, applying config.force_commutative.
Eigen::VectorXd scheme_step(const ProblemDefinition& problem, const SchemeConfig& config,
                            const Eigen::VectorXd& x, const GaussianDraw& draw);

// Draw slots consumed per step: d primaries plus, on the FL path, q*d
// auxiliaries. The ensemble driver and the schemes must agree on this.
int normals_per_step(int d, const SchemeConfig& config, bool commutative);

}  // namespace effdiff
