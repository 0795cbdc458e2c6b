#include "effdiff/problem.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace effdiff {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using detail::kLanes;
using detail::Pack;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// sin/cos of 2 pi y, argument reduced first so unwrapped particle positions
// far from the origin keep full accuracy.
inline void sc2pi(double y, double& s, double& c) {
  const double t = y - std::round(y);
  s = std::sin(kTwoPi * t);
  c = std::cos(kTwoPi * t);
}

}  // namespace

void CoefficientSet::resize(int d) {
  b.resize(d);
  sigma.resize(d, d);
  jac_b.resize(d, d);
  hess_b.assign(d, MatrixXd::Zero(d, d));
  grad_sigma.assign(d, MatrixXd::Zero(d, d));
  hess_sigma.assign(static_cast<size_t>(d) * d, MatrixXd::Zero(d, d));
}

VectorXd wrap_torus(const VectorXd& y) {
  VectorXd w(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) w[i] = y[i] - std::floor(y[i]);
  return w;
}

ProblemDefinition::ProblemDefinition(int dim, std::string name)
    : dim_(dim), name_(std::move(name)) {
  if (dim < 1) throw ArgumentError("problem dimension must be positive");
}

void ProblemDefinition::evaluate_batch(const Pack*, DerivLevel,
                                       BatchCoefficients&) const {
  throw Error("problem '" + name_ + "' has no batched kernel");
}

VectorXd ProblemDefinition::drift(const VectorXd& y) const {
  CoefficientSet c;
  evaluate(y, DerivLevel::values, c);
  return c.b;
}

MatrixXd ProblemDefinition::sigma(const VectorXd& y) const {
  CoefficientSet c;
  evaluate(y, DerivLevel::values, c);
  return c.sigma;
}

MatrixXd ProblemDefinition::drift_jacobian(const VectorXd& y) const {
  CoefficientSet c;
  evaluate(y, DerivLevel::first, c);
  return c.jac_b;
}

std::vector<MatrixXd> ProblemDefinition::drift_hessians(const VectorXd& y) const {
  CoefficientSet c;
  evaluate(y, DerivLevel::second, c);
  return c.hess_b;
}

std::vector<MatrixXd> ProblemDefinition::sigma_gradients(const VectorXd& y) const {
  CoefficientSet c;
  evaluate(y, DerivLevel::first, c);
  return c.grad_sigma;
}

std::vector<MatrixXd> ProblemDefinition::sigma_hessians(const VectorXd& y) const {
  CoefficientSet c;
  evaluate(y, DerivLevel::second, c);
  return c.hess_sigma;
}

const CommutativityReport& ProblemDefinition::commutativity() const {
  std::call_once(comm_once_, [this] {
    comm_report_ = is_commutative(*this, quasi_random_points(dim_, 100));
  });
  return comm_report_;
}

CoefficientValues evaluate_coefficients(const ProblemDefinition& problem,
                                        const VectorXd& y) {
  CoefficientSet c;
  problem.evaluate(y, DerivLevel::values, c);
  CoefficientValues v;
  v.b = c.b;
  v.sigma = c.sigma;
  v.A = 0.5 * c.sigma * c.sigma.transpose();
  return v;
}

void milstein_xi(const CoefficientSet& c, std::vector<MatrixXd>& out) {
  const int d = static_cast<int>(c.b.size());
  out.resize(d);
  for (int i = 0; i < d; ++i) {
    out[i].resize(d, d);
    for (int j1 = 0; j1 < d; ++j1)
      for (int j2 = 0; j2 < d; ++j2) {
        double s = 0.0;
        for (int k = 0; k < d; ++k)
          s += c.grad_sigma[k](i, j2) * c.sigma(k, j1);
        out[i](j1, j2) = s;
      }
  }
}

std::vector<MatrixXd> milstein_xi(const ProblemDefinition& problem,
                                  const VectorXd& y) {
  CoefficientSet c;
  problem.evaluate(y, DerivLevel::first, c);
  std::vector<MatrixXd> out;
  milstein_xi(c, out);
  return out;
}

CommutativityReport is_commutative(const ProblemDefinition& problem,
                                   const std::vector<VectorXd>& sample_points) {
  CommutativityReport report;
  CoefficientSet c;
  std::vector<MatrixXd> xi;
  for (const auto& y : sample_points) {
    problem.evaluate(y, DerivLevel::first, c);
    milstein_xi(c, xi);
    for (const auto& m : xi) {
      const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
      report.max_asymmetry = std::max(report.max_asymmetry, asym);
    }
  }
  report.commutative = report.max_asymmetry <= kCommutativityTol;
  return report;
}

void modified_correction(const CoefficientSet& c, VectorXd& b1, MatrixXd& sigma1) {
  const int d = static_cast<int>(c.b.size());
  const MatrixXd sst = c.sigma * c.sigma.transpose();
  b1.resize(d);
  for (int i = 0; i < d; ++i) {
    const double advect = c.jac_b.row(i).dot(c.b);
    const double diffuse = (sst.array() * c.hess_b[i].array()).sum();
    b1[i] = 0.5 * advect + 0.25 * diffuse;
  }
  sigma1 = 0.5 * c.jac_b * c.sigma;
  for (int k = 0; k < d; ++k) sigma1 += 0.5 * c.b[k] * c.grad_sigma[k];
  for (int k1 = 0; k1 < d; ++k1)
    for (int k2 = 0; k2 < d; ++k2)
      sigma1 += 0.25 * sst(k1, k2) * c.hess_sigma[k1 * d + k2];
}

ModifiedCoefficients::ModifiedCoefficients(ProblemPtr problem, double h)
    : problem_(std::move(problem)), h_(h) {}

VectorXd ModifiedCoefficients::drift(const VectorXd& y) const {
  if (h_ == 0.0) return problem_->drift(y);
  CoefficientSet c;
  problem_->evaluate(y, DerivLevel::second, c);
  VectorXd b1;
  MatrixXd s1;
  modified_correction(c, b1, s1);
  return c.b + h_ * b1;
}

MatrixXd ModifiedCoefficients::sigma(const VectorXd& y) const {
  if (h_ == 0.0) return problem_->sigma(y);
  CoefficientSet c;
  problem_->evaluate(y, DerivLevel::second, c);
  VectorXd b1;
  MatrixXd s1;
  modified_correction(c, b1, s1);
  return c.sigma + h_ * s1;
}

ModifiedCoefficients modified_coefficients(ProblemPtr problem, double h) {
  if (h < 0.0) throw ArgumentError("modified coefficients need h >= 0");
  return ModifiedCoefficients(std::move(problem), h);
}

namespace {

// Shared scaffolding: wraps the point, runs the concrete fill, then rejects
// non-finite coefficient values with the offending point attached.
class ProblemBase : public ProblemDefinition {
 public:
  using ProblemDefinition::ProblemDefinition;

  void evaluate(const VectorXd& y, DerivLevel level, CoefficientSet& out) const final {
    if (y.size() != dim_)
      throw ArgumentError("evaluation point has dimension " +
                          std::to_string(y.size()) + ", problem has " +
                          std::to_string(dim_));
    if (out.b.size() != dim_) out.resize(dim_);
    const VectorXd w = wrap_torus(y);
    fill(w, level, out);
    if (!out.b.allFinite() || !out.sigma.allFinite())
      throw EvaluationError("non-finite coefficient value at a sample point", w);
    if (level >= DerivLevel::first &&
        (!out.jac_b.allFinite() ||
         std::any_of(out.grad_sigma.begin(), out.grad_sigma.end(),
                     [](const MatrixXd& m) { return !m.allFinite(); })))
      throw EvaluationError("non-finite coefficient derivative at a sample point", w);
    if (level >= DerivLevel::second &&
        (std::any_of(out.hess_b.begin(), out.hess_b.end(),
                     [](const MatrixXd& m) { return !m.allFinite(); }) ||
         std::any_of(out.hess_sigma.begin(), out.hess_sigma.end(),
                     [](const MatrixXd& m) { return !m.allFinite(); })))
      throw EvaluationError("non-finite coefficient second derivative at a sample point", w);
  }

 protected:
  virtual void fill(const VectorXd& y, DerivLevel level, CoefficientSet& out) const = 0;
};

// ---------------------------------------------------------------------------
// Free Brownian motion: b = 0, sigma = sqrt(2) I. The reference answer for
// every estimator in the library is the identity matrix.

class FreeBrownian final : public ProblemBase {
 public:
  explicit FreeBrownian(int d)
      : ProblemBase(d, d == 2 ? "free-brownian-2d" : "free-brownian-3d") {
    known_invariant_density = [](const VectorXd&) { return 1.0; };
    known_centered = true;
  }

  bool sigma_is_diagonal() const override { return true; }
  bool sigma_is_constant() const override { return true; }
  bool has_batch_kernel() const override { return dim_ <= 3; }

  void evaluate_batch(const Pack*, DerivLevel level, BatchCoefficients& out) const override {
    for (int i = 0; i < dim_; ++i) {
      out.b[i] = Pack::Zero();
      out.sig[i] = Pack::Constant(kSqrt2);
    }
    if (level >= DerivLevel::first)
      for (int i = 0; i < dim_; ++i)
        for (int k = 0; k < dim_; ++k) {
          out.jac_b[i][k] = Pack::Zero();
          out.dsig[k][i] = Pack::Zero();
        }
    if (level >= DerivLevel::second)
      for (int i = 0; i < dim_; ++i)
        for (int k1 = 0; k1 < dim_; ++k1)
          for (int k2 = 0; k2 < dim_; ++k2) {
            out.hess_b[i][k1][k2] = Pack::Zero();
            out.hsig[k1][k2][i] = Pack::Zero();
          }
  }

 protected:
  void fill(const VectorXd&, DerivLevel, CoefficientSet& out) const override {
    out.b.setZero();
    out.sigma = kSqrt2 * MatrixXd::Identity(dim_, dim_);
    out.jac_b.setZero();
    for (auto& m : out.hess_b) m.setZero();
    for (auto& m : out.grad_sigma) m.setZero();
    for (auto& m : out.hess_sigma) m.setZero();
  }

 private:
  static constexpr double kSqrt2 = 1.4142135623730950488016887242097;
};

// ---------------------------------------------------------------------------
// 2d benchmark with constant sigma: incompressible drift
//   b = 2 pi (sin1 sin2, cos1 cos2),  sigma = 2 I,
// whose invariant density is uniform.

class BenchConstant2d final : public ProblemBase {
 public:
  BenchConstant2d() : ProblemBase(2, "benchmark-2d-constant") {
    known_invariant_density = [](const VectorXd&) { return 1.0; };
    known_centered = true;
  }

  bool sigma_is_diagonal() const override { return true; }
  bool sigma_is_constant() const override { return true; }
  bool has_batch_kernel() const override { return true; }

  void evaluate_batch(const Pack* y, DerivLevel level, BatchCoefficients& out) const override {
    Pack s1, c1, s2, c2;
    detail::sincospi2(y[0], s1, c1);
    detail::sincospi2(y[1], s2, c2);
    out.b[0] = kTwoPi * s1 * s2;
    out.b[1] = kTwoPi * c1 * c2;
    out.sig[0] = Pack::Constant(2.0);
    out.sig[1] = Pack::Constant(2.0);
    if (level >= DerivLevel::first) {
      const double g = kTwoPi * kTwoPi;
      out.jac_b[0][0] = g * c1 * s2;
      out.jac_b[0][1] = g * s1 * c2;
      out.jac_b[1][0] = -g * s1 * c2;
      out.jac_b[1][1] = -g * c1 * s2;
      for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i) out.dsig[k][i] = Pack::Zero();
    }
    if (level >= DerivLevel::second) {
      const double g2 = kTwoPi * kTwoPi * kTwoPi;
      out.hess_b[0][0][0] = -g2 * s1 * s2;
      out.hess_b[0][0][1] = g2 * c1 * c2;
      out.hess_b[0][1][0] = out.hess_b[0][0][1];
      out.hess_b[0][1][1] = -g2 * s1 * s2;
      out.hess_b[1][0][0] = -g2 * c1 * c2;
      out.hess_b[1][0][1] = g2 * s1 * s2;
      out.hess_b[1][1][0] = out.hess_b[1][0][1];
      out.hess_b[1][1][1] = -g2 * c1 * c2;
      for (int k1 = 0; k1 < 2; ++k1)
        for (int k2 = 0; k2 < 2; ++k2)
          for (int i = 0; i < 2; ++i) out.hsig[k1][k2][i] = Pack::Zero();
    }
  }

 protected:
  void fill(const VectorXd& y, DerivLevel level, CoefficientSet& out) const override {
    double s1, c1, s2, c2;
    sc2pi(y[0], s1, c1);
    sc2pi(y[1], s2, c2);
    out.b[0] = kTwoPi * s1 * s2;
    out.b[1] = kTwoPi * c1 * c2;
    out.sigma << 2.0, 0.0, 0.0, 2.0;
    for (auto& m : out.grad_sigma) m.setZero();
    for (auto& m : out.hess_sigma) m.setZero();
    if (level >= DerivLevel::first) {
      const double g = kTwoPi * kTwoPi;
      out.jac_b << g * c1 * s2, g * s1 * c2, -g * s1 * c2, -g * c1 * s2;
    }
    if (level >= DerivLevel::second) {
      const double g2 = kTwoPi * kTwoPi * kTwoPi;
      out.hess_b[0] << -g2 * s1 * s2, g2 * c1 * c2, g2 * c1 * c2, -g2 * s1 * s2;
      out.hess_b[1] << -g2 * c1 * c2, g2 * s1 * s2, g2 * s1 * s2, -g2 * c1 * c2;
    }
  }
};

// ---------------------------------------------------------------------------
// Variable-sigma benchmarks. Both are built from
//   D(y)     = 2 + (product of two sines),
//   A_ii(y)  = (2 + sin_i) / D,   sigma_ii = sqrt(2 A_ii),
//   b_i(y)   = 2 pi cos_i / D,
// with closed-form invariant density r = D / 2. Derivatives follow the
// quotient and square-root chain rules; everything is per-axis trig.
//
// Quotient u = p / D:
//   u_k  = (p_k - u D_k) / D
//   u_lk = (p_lk - u_k D_l - u_l D_k - u D_lk) / D
// Square root s = sqrt(2u):
//   s_k  = u_k / s
//   s_lk = (u_lk - s_l s_k) / s

template <int N>
struct TrigAxis {
  double s[N], c[N];  // sin(2 pi y_i), cos(2 pi y_i)
};

// D = 2 + s[a] s[b]; derivative stencil of D w.r.t. each axis
template <int N>
struct DenomTerms {
  double D;
  double D1[N];      // d_k D
  double D2[N][N];   // d_l d_k D
};

template <int N>
DenomTerms<N> denom(const TrigAxis<N>& t, int a, int b) {
  DenomTerms<N> d{};
  d.D = 2.0 + t.s[a] * t.s[b];
  for (int k = 0; k < N; ++k) {
    d.D1[k] = 0.0;
    for (int l = 0; l < N; ++l) d.D2[k][l] = 0.0;
  }
  d.D1[a] = kTwoPi * t.c[a] * t.s[b];
  d.D1[b] = kTwoPi * t.s[a] * t.c[b];
  const double w2 = kTwoPi * kTwoPi;
  d.D2[a][a] = -w2 * t.s[a] * t.s[b];
  d.D2[b][b] = -w2 * t.s[a] * t.s[b];
  d.D2[a][b] = d.D2[b][a] = w2 * t.c[a] * t.c[b];
  return d;
}

// Fills one coefficient family u = p/D given p and its per-axis derivatives.
// p depends on a single axis `ax` (p = 2 + sin or p = 2 pi cos).
template <int N>
void quotient_derivs(double p, double dp, double ddp, int ax,
                     const DenomTerms<N>& dn, DerivLevel level, double& u,
                     double u1[N], double u2[N][N]) {
  u = p / dn.D;
  if (level < DerivLevel::first) return;
  for (int k = 0; k < N; ++k) {
    const double pk = (k == ax) ? dp : 0.0;
    u1[k] = (pk - u * dn.D1[k]) / dn.D;
  }
  if (level < DerivLevel::second) return;
  for (int l = 0; l < N; ++l)
    for (int k = 0; k < N; ++k) {
      const double plk = (l == ax && k == ax) ? ddp : 0.0;
      u2[l][k] = (plk - u1[k] * dn.D1[l] - u1[l] * dn.D1[k] - u * dn.D2[l][k]) / dn.D;
    }
}

template <int N>
class BenchVariable final : public ProblemBase {
 public:
  BenchVariable(std::string name, int da, int db)
      : ProblemBase(N, std::move(name)), da_(da), db_(db) {
    known_invariant_density = [da, db](const VectorXd& y) {
      return 1.0 + 0.5 * std::sin(kTwoPi * y[da]) * std::sin(kTwoPi * y[db]);
    };
    known_centered = true;
  }

  bool sigma_is_diagonal() const override { return true; }
  bool has_batch_kernel() const override { return true; }

  void evaluate_batch(const Pack* y, DerivLevel level, BatchCoefficients& out) const override {
    Pack s[N], c[N];
    for (int i = 0; i < N; ++i) detail::sincospi2(y[i], s[i], c[i]);
    const Pack D = 2.0 + s[da_] * s[db_];
    Pack D1[N], D2[N][N];
    for (int k = 0; k < N; ++k) {
      D1[k] = Pack::Zero();
      for (int l = 0; l < N; ++l) D2[k][l] = Pack::Zero();
    }
    const double w2 = kTwoPi * kTwoPi;
    D1[da_] = kTwoPi * c[da_] * s[db_];
    D1[db_] = kTwoPi * s[da_] * c[db_];
    D2[da_][da_] = -w2 * s[da_] * s[db_];
    D2[db_][db_] = D2[da_][da_];
    D2[da_][db_] = w2 * c[da_] * c[db_];
    D2[db_][da_] = D2[da_][db_];

    const Pack invD = D.inverse();
    for (int i = 0; i < N; ++i) {
      // b_i = 2 pi c_i / D
      const Pack bi = kTwoPi * c[i] * invD;
      out.b[i] = bi;
      // u_i = (2 + s_i) / D, sigma_ii = sqrt(2 u_i)
      const Pack ui = (2.0 + s[i]) * invD;
      const Pack sig = (2.0 * ui).sqrt();
      out.sig[i] = sig;
      if (level < DerivLevel::first) continue;

      Pack b1[N], u1[N];
      for (int k = 0; k < N; ++k) {
        const Pack qk = (k == i) ? Pack(-w2 * s[i]) : Pack(Pack::Zero());
        b1[k] = (qk - bi * D1[k]) * invD;
        const Pack pk = (k == i) ? Pack(kTwoPi * c[i]) : Pack(Pack::Zero());
        u1[k] = (pk - ui * D1[k]) * invD;
        out.jac_b[i][k] = b1[k];
        out.dsig[k][i] = u1[k] / sig;
      }
      if (level < DerivLevel::second) continue;

      const double w3 = w2 * kTwoPi;
      for (int l = 0; l < N; ++l)
        for (int k = 0; k < N; ++k) {
          const Pack qlk = (l == i && k == i) ? Pack(-w3 * c[i]) : Pack(Pack::Zero());
          out.hess_b[i][l][k] =
              (qlk - b1[k] * D1[l] - b1[l] * D1[k] - bi * D2[l][k]) * invD;
          const Pack plk = (l == i && k == i) ? Pack(-w2 * s[i]) : Pack(Pack::Zero());
          const Pack ulk =
              (plk - u1[k] * D1[l] - u1[l] * D1[k] - ui * D2[l][k]) * invD;
          out.hsig[l][k][i] = (ulk - out.dsig[l][i] * out.dsig[k][i]) / sig;
        }
    }
  }

 protected:
  void fill(const VectorXd& y, DerivLevel level, CoefficientSet& out) const override {
    TrigAxis<N> t;
    for (int i = 0; i < N; ++i) sc2pi(y[i], t.s[i], t.c[i]);
    const DenomTerms<N> dn = denom<N>(t, da_, db_);

    out.sigma.setZero();
    for (auto& m : out.grad_sigma) m.setZero();
    for (auto& m : out.hess_sigma) m.setZero();

    const double w2 = kTwoPi * kTwoPi;
    const double w3 = w2 * kTwoPi;
    for (int i = 0; i < N; ++i) {
      double bi, b1[N], b2[N][N];
      quotient_derivs<N>(kTwoPi * t.c[i], -w2 * t.s[i], -w3 * t.c[i], i, dn,
                         level, bi, b1, b2);
      out.b[i] = bi;

      double ui, u1[N], u2[N][N];
      quotient_derivs<N>(2.0 + t.s[i], kTwoPi * t.c[i], -w2 * t.s[i], i, dn,
                         level, ui, u1, u2);
      const double sig = std::sqrt(2.0 * ui);
      out.sigma(i, i) = sig;

      if (level < DerivLevel::first) continue;
      double s1[N];
      for (int k = 0; k < N; ++k) {
        out.jac_b(i, k) = b1[k];
        s1[k] = u1[k] / sig;
        out.grad_sigma[k](i, i) = s1[k];
      }
      if (level < DerivLevel::second) continue;
      for (int l = 0; l < N; ++l)
        for (int k = 0; k < N; ++k) {
          out.hess_b[i](l, k) = b2[l][k];
          out.hess_sigma[l * N + k](i, i) = (u2[l][k] - s1[l] * s1[k]) / sig;
        }
    }
  }

 private:
  int da_, db_;
};

// ---------------------------------------------------------------------------
// Trigonometric polynomial problems (inline config specs).

struct FactorEval {
  double v, d1, d2;
};

FactorEval eval_factor(const TrigTerm::Factor& f, double y) {
  const double w = kTwoPi * f.k;
  if (f.k == 0) {
    if (f.cosine) return {1.0, 0.0, 0.0};
    return {0.0, 0.0, 0.0};
  }
  const double t = y - std::round(y);
  const double a = w * t;
  if (f.cosine) return {std::cos(a), -w * std::sin(a), -w * w * std::cos(a)};
  return {std::sin(a), w * std::cos(a), -w * w * std::sin(a)};
}

// Value, gradient, and Hessian of one trig polynomial at y.
void eval_poly(const TrigPoly& poly, const VectorXd& y, DerivLevel level,
               double& v, VectorXd& g, MatrixXd& H) {
  const int d = static_cast<int>(y.size());
  v = 0.0;
  if (level >= DerivLevel::first) g.setZero(d);
  if (level >= DerivLevel::second) H.setZero(d, d);
  std::vector<FactorEval> fe;
  for (const auto& term : poly) {
    fe.clear();
    double prod = term.c;
    for (const auto& f : term.factors) {
      fe.push_back(eval_factor(f, y[f.axis]));
      prod *= fe.back().v;
    }
    v += prod;
    if (level < DerivLevel::first) continue;
    const int nf = static_cast<int>(term.factors.size());
    auto rest = [&](int skip1, int skip2) {
      double r = term.c;
      for (int j = 0; j < nf; ++j)
        if (j != skip1 && j != skip2) r *= fe[j].v;
      return r;
    };
    for (int j = 0; j < nf; ++j) {
      const int ax = term.factors[j].axis;
      g[ax] += fe[j].d1 * rest(j, -1);
      if (level < DerivLevel::second) continue;
      H(ax, ax) += fe[j].d2 * rest(j, -1);
      for (int m = j + 1; m < nf; ++m) {
        const int ax2 = term.factors[m].axis;
        const double cross = fe[j].d1 * fe[m].d1 * rest(j, m);
        H(ax, ax2) += cross;
        H(ax2, ax) += cross;
      }
    }
  }
}

bool poly_is_constant(const TrigPoly& p) {
  for (const auto& t : p)
    for (const auto& f : t.factors)
      if (f.k != 0) return false;
  return true;
}

class TrigPolyProblem final : public ProblemBase {
 public:
  TrigPolyProblem(int d, std::vector<TrigPoly> drift,
                  std::vector<std::vector<TrigPoly>> sigma, std::string name)
      : ProblemBase(d, std::move(name)),
        drift_(std::move(drift)),
        sigma_(std::move(sigma)) {
    diagonal_ = true;
    constant_ = true;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        if (i != j && !sigma_[i][j].empty()) diagonal_ = false;
        if (!poly_is_constant(sigma_[i][j])) constant_ = false;
      }
  }

  bool sigma_is_diagonal() const override { return diagonal_; }
  bool sigma_is_constant() const override { return constant_; }

 protected:
  void fill(const VectorXd& y, DerivLevel level, CoefficientSet& out) const override {
    double v;
    VectorXd g;
    MatrixXd H;
    for (int i = 0; i < dim_; ++i) {
      eval_poly(drift_[i], y, level, v, g, H);
      out.b[i] = v;
      if (level >= DerivLevel::first) out.jac_b.row(i) = g.transpose();
      if (level >= DerivLevel::second) out.hess_b[i] = H;
    }
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) {
        eval_poly(sigma_[i][j], y, level, v, g, H);
        out.sigma(i, j) = v;
        if (level >= DerivLevel::first)
          for (int k = 0; k < dim_; ++k) out.grad_sigma[k](i, j) = g[k];
        if (level >= DerivLevel::second)
          for (int k1 = 0; k1 < dim_; ++k1)
            for (int k2 = 0; k2 < dim_; ++k2)
              out.hess_sigma[k1 * dim_ + k2](i, j) = H(k1, k2);
      }
  }

 private:
  std::vector<TrigPoly> drift_;
  std::vector<std::vector<TrigPoly>> sigma_;
  bool diagonal_, constant_;
};

// ---------------------------------------------------------------------------
// Callable problems with central finite differences for the derivatives.

class CallableProblem final : public ProblemBase {
 public:
  explicit CallableProblem(CallableSpec spec)
      : ProblemBase(spec.dim, std::move(spec.name)), spec_(std::move(spec)) {
    if (!spec_.drift || !spec_.sigma)
      throw ArgumentError("callable problem needs both drift and sigma");
    derivative_mode.analytic = false;
    derivative_mode.fd_step = spec_.fd_step;
  }

  bool sigma_is_diagonal() const override { return spec_.sigma_diagonal; }
  bool sigma_is_constant() const override { return spec_.sigma_constant; }

 protected:
  void fill(const VectorXd& y, DerivLevel level, CoefficientSet& out) const override {
    out.b = spec_.drift(y);
    out.sigma = spec_.sigma(y);
    if (out.b.size() != dim_ || out.sigma.rows() != dim_ || out.sigma.cols() != dim_)
      throw ArgumentError("callable coefficients returned the wrong shape");
    if (level < DerivLevel::first) return;

    const double e = spec_.fd_step;
    VectorXd yp = y, ym = y;
    // first derivatives, plus same-axis second differences
    std::vector<VectorXd> bp(dim_), bm(dim_);
    std::vector<MatrixXd> sp(dim_), sm(dim_);
    for (int k = 0; k < dim_; ++k) {
      yp[k] = y[k] + e;
      ym[k] = y[k] - e;
      bp[k] = spec_.drift(yp);
      bm[k] = spec_.drift(ym);
      sp[k] = spec_.sigma(yp);
      sm[k] = spec_.sigma(ym);
      out.jac_b.col(k) = (bp[k] - bm[k]) / (2 * e);
      out.grad_sigma[k] = (sp[k] - sm[k]) / (2 * e);
      yp[k] = y[k];
      ym[k] = y[k];
    }
    if (level < DerivLevel::second) return;

    for (int k = 0; k < dim_; ++k) {
      const VectorXd bkk = (bp[k] - 2 * out.b + bm[k]) / (e * e);
      const MatrixXd skk = (sp[k] - 2 * out.sigma + sm[k]) / (e * e);
      for (int i = 0; i < dim_; ++i) out.hess_b[i](k, k) = bkk[i];
      out.hess_sigma[k * dim_ + k] = skk;
    }
    VectorXd q = y;
    for (int k = 0; k < dim_; ++k)
      for (int l = k + 1; l < dim_; ++l) {
        auto corner = [&](double dk, double dl, auto&& f) {
          q[k] = y[k] + dk;
          q[l] = y[l] + dl;
          auto r = f(q);
          q[k] = y[k];
          q[l] = y[l];
          return r;
        };
        const VectorXd bkl = (corner(e, e, spec_.drift) - corner(e, -e, spec_.drift) -
                              corner(-e, e, spec_.drift) + corner(-e, -e, spec_.drift)) /
                             (4 * e * e);
        const MatrixXd skl = (corner(e, e, spec_.sigma) - corner(e, -e, spec_.sigma) -
                              corner(-e, e, spec_.sigma) + corner(-e, -e, spec_.sigma)) /
                             (4 * e * e);
        for (int i = 0; i < dim_; ++i) {
          out.hess_b[i](k, l) = bkl[i];
          out.hess_b[i](l, k) = bkl[i];
        }
        out.hess_sigma[k * dim_ + l] = skl;
        out.hess_sigma[l * dim_ + k] = skl;
      }
  }

 private:
  CallableSpec spec_;
};

// ---------------------------------------------------------------------------
// Constant drift shift of a base problem.

class ShiftedProblem final : public ProblemBase {
 public:
  ShiftedProblem(ProblemPtr base, VectorXd c)
      : ProblemBase(base->dim(), base->name() + "+shift"),
        base_(std::move(base)),
        c_(std::move(c)) {
    derivative_mode = base_->derivative_mode;
    // a constant shift leaves a uniform invariant density invariant; any
    // other closed form stops being valid
    if (base_->known_invariant_density) {
      bool uniform = true;
      for (const auto& y : quasi_random_points(dim_, 16))
        if (base_->known_invariant_density(y) != 1.0) uniform = false;
      if (uniform)
        known_invariant_density = [](const VectorXd&) { return 1.0; };
    }
    if (c_.cwiseAbs().maxCoeff() == 0.0)
      known_centered = base_->known_centered;
    else
      known_centered = false;
  }

  bool sigma_is_diagonal() const override { return base_->sigma_is_diagonal(); }
  bool sigma_is_constant() const override { return base_->sigma_is_constant(); }
  bool has_batch_kernel() const override { return base_->has_batch_kernel(); }

  void evaluate_batch(const Pack* y, DerivLevel level, BatchCoefficients& out) const override {
    base_->evaluate_batch(y, level, out);
    for (int i = 0; i < dim_; ++i) out.b[i] += c_[i];
  }

 protected:
  void fill(const VectorXd& y, DerivLevel level, CoefficientSet& out) const override {
    base_->evaluate(y, level, out);
    out.b += c_;
  }

 private:
  ProblemPtr base_;
  VectorXd c_;
};

}  // namespace

ProblemPtr make_problem(const std::string& name) {
  if (name == "benchmark-2d-constant") return std::make_shared<BenchConstant2d>();
  if (name == "benchmark-2d-variable")
    return std::make_shared<BenchVariable<2>>("benchmark-2d-variable", 0, 1);
  if (name == "benchmark-3d")
    return std::make_shared<BenchVariable<3>>("benchmark-3d", 1, 2);
  if (name == "free-brownian-2d" || name == "free-brownian")
    return std::make_shared<FreeBrownian>(2);
  if (name == "free-brownian-3d") return std::make_shared<FreeBrownian>(3);
  throw ArgumentError("unknown problem '" + name + "'");
}

std::vector<std::string> problem_names() {
  return {"benchmark-2d-constant", "benchmark-2d-variable", "benchmark-3d",
          "free-brownian-2d", "free-brownian-3d"};
}

ProblemPtr shift_drift(ProblemPtr base, const VectorXd& c) {
  if (!base) throw ArgumentError("shift_drift needs a problem");
  if (c.size() != base->dim())
    throw ArgumentError("drift shift has dimension " + std::to_string(c.size()) +
                        ", problem has " + std::to_string(base->dim()));
  return std::make_shared<ShiftedProblem>(std::move(base), c);
}

ProblemPtr make_callable_problem(CallableSpec spec) {
  return std::make_shared<CallableProblem>(std::move(spec));
}

ProblemPtr make_trigpoly_problem(int dim, std::vector<TrigPoly> drift,
                                 std::vector<std::vector<TrigPoly>> sigma,
                                 std::string name) {
  if (dim < 1) throw ArgumentError("trig problem dimension must be positive");
  if (static_cast<int>(drift.size()) != dim)
    throw ArgumentError("trig drift needs one polynomial per component");
  if (static_cast<int>(sigma.size()) != dim)
    throw ArgumentError("trig sigma needs a full d x d grid");
  for (const auto& row : sigma)
    if (static_cast<int>(row.size()) != dim)
      throw ArgumentError("trig sigma needs a full d x d grid");
  for (const auto& poly : drift)
    for (const auto& term : poly)
      for (const auto& f : term.factors)
        if (f.axis < 0 || f.axis >= dim)
          throw ArgumentError("trig factor axis out of range");
  for (const auto& row : sigma)
    for (const auto& poly : row)
      for (const auto& term : poly)
        for (const auto& f : term.factors)
          if (f.axis < 0 || f.axis >= dim)
            throw ArgumentError("trig factor axis out of range");
  return std::make_shared<TrigPolyProblem>(dim, std::move(drift), std::move(sigma),
                                           std::move(name));
}

std::vector<VectorXd> quasi_random_points(int dim, int count) {
  if (dim < 1 || count < 0) throw ArgumentError("bad quasi-random request");
  // additive recurrence on the inverse powers of the generalized golden
  // ratio: x^(d+1) = x + 1
  double phi = 1.5;
  for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / (dim + 1));
  std::vector<VectorXd> pts(count, VectorXd(dim));
  std::vector<double> alpha(dim);
  for (int j = 0; j < dim; ++j) alpha[j] = std::pow(1.0 / phi, j + 1);
  for (int m = 0; m < count; ++m)
    for (int j = 0; j < dim; ++j) {
      const double v = 0.5 + (m + 1) * alpha[j];
      pts[m][j] = v - std::floor(v);
    }
  return pts;
}

}  // namespace effdiff
