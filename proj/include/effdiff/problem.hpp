#pragma once

// Problem coefficients on the d-torus: drift b, diffusion factor sigma,
// their derivatives, the Milstein correction tensor, and the modified
// coefficient maps (b + h b1, sigma + h sigma1).

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "effdiff/detail/simd.hpp"
#include "effdiff/errors.hpp"

namespace effdiff {

enum class DerivLevel { values = 0, first = 1, second = 2 };

struct DerivativeMode {
  bool analytic = true;
  double fd_step = 1e-5;  // central-difference step when not analytic
};

// Coefficient data at one point, filled up to a requested derivative level.
// Buffers keep their size across calls, so reuse avoids allocation.
struct CoefficientSet {
  Eigen::VectorXd b;                        // d
  Eigen::MatrixXd sigma;                    // d x d
  Eigen::MatrixXd jac_b;                    // (i,k) = d_k b_i
  std::vector<Eigen::MatrixXd> hess_b;      // i -> Hessian of b_i
  std::vector<Eigen::MatrixXd> grad_sigma;  // k -> d_k sigma
  std::vector<Eigen::MatrixXd> hess_sigma;  // k1*d + k2 -> d_k1 d_k2 sigma
  void resize(int d);
};

// Same data for kLanes particles at once, diagonal-sigma layout only.
// Index caps at 3 because every shipped benchmark is 2- or 3-dimensional.
struct BatchCoefficients {
  detail::Pack b[3];
  detail::Pack sig[3];           // sigma_ii
  detail::Pack jac_b[3][3];      // [i][k] = d_k b_i
  detail::Pack hess_b[3][3][3];  // [i][k1][k2]
  detail::Pack dsig[3][3];       // [k][i] = d_k sigma_ii
  detail::Pack hsig[3][3][3];    // [k1][k2][i] = d_k1 d_k2 sigma_ii
};

struct CommutativityReport {
  bool commutative = false;
  double max_asymmetry = 0.0;
};

// Tolerance for the commutativity detector: well above roundoff, well below
// any genuine asymmetry of the shipped problems.
inline constexpr double kCommutativityTol = 1e-10;

// componentwise y - floor(y)
Eigen::VectorXd wrap_torus(const Eigen::VectorXd& y);

class ProblemDefinition {
 public:
  explicit ProblemDefinition(int dim, std::string name = "custom");
  virtual ~ProblemDefinition() = default;

  ProblemDefinition(const ProblemDefinition&) = delete;
  ProblemDefinition& operator=(const ProblemDefinition&) = delete;

  int dim() const { return dim_; }
  const std::string& name() const { return name_; }

  // Fills `out` at the torus point wrap(y), up to `level`. Throws
  // EvaluationError when a coefficient comes back non-finite.
  virtual void evaluate(const Eigen::VectorXd& y, DerivLevel level,
                        CoefficientSet& out) const = 0;

  virtual bool sigma_is_diagonal() const { return false; }
  virtual bool sigma_is_constant() const { return false; }

  // Batched evaluation used by the ensemble driver. Only problems with
  // diagonal sigma provide one; everything else takes the scalar path.
  virtual bool has_batch_kernel() const { return false; }
  virtual void evaluate_batch(const detail::Pack* y, DerivLevel level,
                              BatchCoefficients& out) const;

  // spec-shaped accessors over evaluate()
  Eigen::VectorXd drift(const Eigen::VectorXd& y) const;
  Eigen::MatrixXd sigma(const Eigen::VectorXd& y) const;
  Eigen::MatrixXd drift_jacobian(const Eigen::VectorXd& y) const;
  std::vector<Eigen::MatrixXd> drift_hessians(const Eigen::VectorXd& y) const;
  std::vector<Eigen::MatrixXd> sigma_gradients(const Eigen::VectorXd& y) const;
  std::vector<Eigen::MatrixXd> sigma_hessians(const Eigen::VectorXd& y) const;

  // Commutativity of the Milstein tensor, detected once on 100 quasi-random
  // points and cached. Thread-safe.
  const CommutativityReport& commutativity() const;

  DerivativeMode derivative_mode;
  std::function<double(const Eigen::VectorXd&)> known_invariant_density;
  std::optional<bool> known_centered;

 protected:
  int dim_;
  std::string name_;

 private:
  mutable std::once_flag comm_once_;
  mutable CommutativityReport comm_report_;
};

using ProblemPtr = std::shared_ptr<const ProblemDefinition>;

struct CoefficientValues {
  Eigen::VectorXd b;
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd A;  // 1/2 sigma sigma^T, computed on the fly
};

CoefficientValues evaluate_coefficients(const ProblemDefinition& problem,
                                        const Eigen::VectorXd& y);

// Xi_i[j1,j2] = sum_k d_k sigma(i,j2) sigma(k,j1), one d x d matrix per i.
std::vector<Eigen::MatrixXd> milstein_xi(const ProblemDefinition& problem,
                                         const Eigen::VectorXd& y);
void milstein_xi(const CoefficientSet& c, std::vector<Eigen::MatrixXd>& out);

CommutativityReport is_commutative(const ProblemDefinition& problem,
                                   const std::vector<Eigen::VectorXd>& sample_points);

// First-order corrections of the modified equation:
//   b1_i    = 1/2 b.grad b_i + 1/4 (sigma sigma^T) : hess b_i
//   sigma1  = 1/2 (jac_b) sigma + 1/2 (b.grad) sigma + 1/4 (sigma sigma^T) : hess sigma
void modified_correction(const CoefficientSet& c, Eigen::VectorXd& b1,
                         Eigen::MatrixXd& sigma1);

// Callable maps y -> b(y) + h b1(y), y -> sigma(y) + h sigma1(y).
class ModifiedCoefficients {
 public:
  ModifiedCoefficients(ProblemPtr problem, double h);
  Eigen::VectorXd drift(const Eigen::VectorXd& y) const;
  Eigen::MatrixXd sigma(const Eigen::VectorXd& y) const;
  double h() const { return h_; }

 private:
  ProblemPtr problem_;
  double h_;
};

// h = 0 returns the original maps exactly; h < 0 is rejected.
ModifiedCoefficients modified_coefficients(ProblemPtr problem, double h);

// Shipped problems: "benchmark-2d-constant", "benchmark-2d-variable",
// "benchmark-3d", "free-brownian-2d", "free-brownian-3d" ("free-brownian"
// is accepted for the 2d one).
ProblemPtr make_problem(const std::string& name);
std::vector<std::string> problem_names();

// Same problem with drift b + c. Closed-form density and centering flags are
// dropped unless the base density is uniform, where the shift leaves it intact.
ProblemPtr shift_drift(ProblemPtr base, const Eigen::VectorXd& c);

// User problems from plain callables; missing derivatives fall back to
// central finite differences with `fd_step`.
struct CallableSpec {
  int dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> drift;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> sigma;
  double fd_step = 1e-5;
  bool sigma_diagonal = false;
  bool sigma_constant = false;
  std::string name = "custom";
};
ProblemPtr make_callable_problem(CallableSpec spec);

// Inline coefficient family for config files: sums of
// c * prod_j trig(2 pi k_j y_j) terms with exact termwise derivatives.
struct TrigTerm {
  struct Factor {
    int axis = 0;
    int k = 0;            // harmonic; k = 0 with cosine means the constant 1
    bool cosine = true;
  };
  double c = 0.0;
  std::vector<Factor> factors;
};
using TrigPoly = std::vector<TrigTerm>;

// sigma given as a full d x d grid of polynomials; empty cells are zero.
ProblemPtr make_trigpoly_problem(int dim, std::vector<TrigPoly> drift,
                                 std::vector<std::vector<TrigPoly>> sigma,
                                 std::string name = "inline");

// Low-discrepancy points on [0,1)^d (additive recurrence), deterministic.
std::vector<Eigen::VectorXd> quasi_random_points(int dim, int count);

}  // namespace effdiff
