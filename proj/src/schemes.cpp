#include "effdiff/schemes.hpp"

#include <cmath>

namespace effdiff {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::euler_maruyama: return "euler-maruyama";
    case SchemeKind::milstein: return "milstein";
    case SchemeKind::modified_milstein: return "modified-milstein";
  }
  throw ArgumentError("unknown scheme kind");
}

SchemeKind scheme_from_string(const std::string& s) {
  if (s == "euler-maruyama" || s == "em" || s == "euler") return SchemeKind::euler_maruyama;
  if (s == "milstein") return SchemeKind::milstein;
  if (s == "modified-milstein" || s == "modified") return SchemeKind::modified_milstein;
  throw ArgumentError("unknown scheme '" + s + "'");
}

namespace {

void check_step_inputs(const ProblemDefinition& problem, const VectorXd& x, double h,
                       const GaussianDraw& draw) {
  if (h <= 0.0) throw ArgumentError("step size must be positive");
  if (x.size() != problem.dim()) throw ArgumentError("state dimension mismatch");
  if (draw.xi.size() != problem.dim()) throw ArgumentError("draw dimension mismatch");
}

VectorXd finish_step(const VectorXd& x, VectorXd&& next) {
  if (!next.allFinite())
    throw StepError("integrator produced a non-finite state", x);
  return std::move(next);
}

// Milstein correction M_i = Xi_i : J added onto an increment in place.
void add_xi_contraction(const CoefficientSet& c, const MatrixXd& J, VectorXd& inc,
                        bool diagonal) {
  const int d = static_cast<int>(c.b.size());
  if (diagonal) {
    // Xi_i(j1,j2) = delta_{i,j2} sigma_{j1 j1} d_{j1} sigma_{ii}
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int j1 = 0; j1 < d; ++j1)
        s += c.sigma(j1, j1) * c.grad_sigma[j1](i, i) * J(j1, i);
      inc[i] += s;
    }
    return;
  }
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (int j1 = 0; j1 < d; ++j1)
      for (int j2 = 0; j2 < d; ++j2) {
        double xi = 0.0;
        for (int k = 0; k < d; ++k) xi += c.grad_sigma[k](i, j2) * c.sigma(k, j1);
        s += xi * J(j1, j2);
      }
    inc[i] += s;
  }
}

bool take_commutative_path(const ProblemDefinition& problem,
                           std::optional<bool> commutative_override) {
  if (commutative_override) return *commutative_override;
  return problem.commutativity().commutative;
}

}  // namespace

VectorXd em_step(const ProblemDefinition& problem, const VectorXd& x, double h,
                 const GaussianDraw& draw) {
  check_step_inputs(problem, x, h, draw);
  CoefficientSet c;
  problem.evaluate(x, DerivLevel::values, c);
  // increment built separately so the zero-correction reductions of the
  // higher-order schemes reproduce this arithmetic bitwise
  const VectorXd inc = c.b * h + std::sqrt(h) * (c.sigma * draw.xi);
  return finish_step(x, VectorXd(x + inc));
}

MatrixXd sample_double_ito(int d, double h, int q, const GaussianDraw& draw,
                           bool commutative) {
  if (d < 1 || h <= 0.0) throw ArgumentError("double Ito sample needs d >= 1, h > 0");
  if (draw.xi.size() != d) throw ArgumentError("draw dimension mismatch");
  const double half_h = 0.5 * h;
  MatrixXd J(d, d);
  if (commutative) {
    for (int a = 0; a < d; ++a) {
      J(a, a) = (draw.xi[a] * draw.xi[a] - 1.0) * half_h;
      for (int b = a + 1; b < d; ++b) {
        const double s = (draw.xi[a] * draw.xi[b]) * half_h;
        J(a, b) = s;
        J(b, a) = s;
      }
    }
    return J;
  }
  if (q < 1) throw ArgumentError("series order q must be at least 1");
  if (static_cast<int>(draw.xi_aux.size()) < q)
    throw ArgumentError("series path needs q auxiliary draws");
  for (int k = 0; k < q; ++k)
    if (draw.xi_aux[k].size() != d) throw ArgumentError("auxiliary draw dimension mismatch");

  // v_0 = xi, v_k = the k-th auxiliary vector
  auto v = [&](int k) -> const VectorXd& {
    return k == 0 ? draw.xi : draw.xi_aux[k - 1];
  };
  for (int a = 0; a < d; ++a) {
    J(a, a) = (draw.xi[a] * draw.xi[a] - 1.0) * half_h;
    for (int b = a + 1; b < d; ++b) {
      double t = 0.0;
      for (int k = 1; k <= q; ++k) {
        const double ck = 1.0 / std::sqrt(4.0 * k * k - 1.0);
        t += ck * (v(k - 1)[a] * v(k)[b] - v(k)[a] * v(k - 1)[b]);
      }
      const double s = (draw.xi[a] * draw.xi[b]) * half_h;
      J(a, b) = s + t * half_h;
      // exact complement: J(a,b) + J(b,a) recovers the symmetric part with
      // no series noise (see the J identity test for why S - t is not it)
      J(b, a) = h * (draw.xi[a] * draw.xi[b]) - J(a, b);
    }
  }
  return J;
}

VectorXd milstein_step(const ProblemDefinition& problem, const VectorXd& x, double h,
                       int q, const GaussianDraw& draw,
                       std::optional<bool> commutative_override) {
  check_step_inputs(problem, x, h, draw);
  if (problem.sigma_is_constant()) return em_step(problem, x, h, draw);
  CoefficientSet c;
  problem.evaluate(x, DerivLevel::first, c);
  VectorXd inc = c.b * h + std::sqrt(h) * (c.sigma * draw.xi);
  const bool comm = take_commutative_path(problem, commutative_override);
  const MatrixXd J = sample_double_ito(problem.dim(), h, q, draw, comm);
  add_xi_contraction(c, J, inc, problem.sigma_is_diagonal());
  return finish_step(x, VectorXd(x + inc));
}

VectorXd modified_milstein_step(const ProblemDefinition& problem, const VectorXd& x,
                                double h, int q, const GaussianDraw& draw,
                                std::optional<bool> commutative_override) {
  check_step_inputs(problem, x, h, draw);
  CoefficientSet c;
  problem.evaluate(x, DerivLevel::second, c);
  VectorXd b1;
  MatrixXd s1;
  modified_correction(c, b1, s1);
  const VectorXd bh = c.b + h * b1;
  const MatrixXd sh = c.sigma + h * s1;
  VectorXd inc = bh * h + std::sqrt(h) * (sh * draw.xi);
  if (!problem.sigma_is_constant()) {
    const bool comm = take_commutative_path(problem, commutative_override);
    const MatrixXd J = sample_double_ito(problem.dim(), h, q, draw, comm);
    add_xi_contraction(c, J, inc, problem.sigma_is_diagonal());
  }
  return finish_step(x, VectorXd(x + inc));
}

VectorXd scheme_step(const ProblemDefinition& problem, const SchemeConfig& config,
                     const VectorXd& x, const GaussianDraw& draw) {
  switch (config.kind) {
    case SchemeKind::euler_maruyama:
      return em_step(problem, x, config.h, draw);
    case SchemeKind::milstein:
      return milstein_step(problem, x, config.h, config.fl_order, draw,
                           config.force_commutative);
    case SchemeKind::modified_milstein:
      return modified_milstein_step(problem, x, config.h, config.fl_order, draw,
                                    config.force_commutative);
  }
  throw ArgumentError("unknown scheme kind");
}

int normals_per_step(int d, const SchemeConfig& config, bool commutative) {
  if (config.kind == SchemeKind::euler_maruyama) return d;
  return commutative ? d : d + config.fl_order * d;
}

}  // namespace effdiff
