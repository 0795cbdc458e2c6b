#include "effdiff/eulerian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "effdiff/errors.hpp"

namespace effdiff {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// 4th-order periodic central differences; weights are exact integers so the
// discrete operator annihilates constants to roundoff.
constexpr int kD1Off[4] = {-2, -1, 1, 2};
constexpr double kD1W[4] = {1.0, -8.0, 8.0, -1.0};  // over 12 dx
constexpr int kD2Off[5] = {-2, -1, 0, 1, 2};
constexpr double kD2W[5] = {-1.0, 16.0, -30.0, 16.0, -1.0};  // over 12 dx^2

long long node_count(int d, int n) {
  long long N = 1;
  for (int a = 0; a < d; ++a) N *= n;
  return N;
}

inline int wrap_line(int i, int n) {
  if (i < 0) return i + n;
  if (i >= n) return i - n;
  return i;
}

// The nondivergence operator K = -A:grad^2 - b.grad with nodal coefficients.
// Its transpose is exactly the divergence-form adjoint -grad^2:(A r) +
// div(b r) built from the same stencils, so one matrix serves both solves.
struct Assembly {
  int d = 0, n = 0;
  long long N = 0;
  double dx = 0.0, wq = 0.0;  // spacing, quadrature weight dx^d
  SpMat K;                    // N x N
  SpMat B;                    // bordered [[K, 1], [wq^T, 0]], (N+1)^2
  MatrixXd b_nodal;           // N x d
  double Knorm = 1.0;         // infinity norm; residuals are backward errors
};

Assembly assemble(const ProblemDefinition& p, int n) {
  const int d = p.dim();
  if (d < 1 || d > 3) throw ArgumentError("grid solver supports 1 to 3 dimensions");
  if (n < 16) throw ArgumentError("grid resolution must be at least 16");

  Assembly a;
  a.d = d;
  a.n = n;
  a.N = node_count(d, n);
  a.dx = 1.0 / n;
  a.wq = std::pow(a.dx, d);
  a.b_nodal.resize(a.N, d);

  long long stride[3] = {1, 1, 1};
  for (int k = 1; k < d; ++k) stride[k] = stride[k - 1] * n;
  const double inv12dx = n / 12.0;
  const double inv12dx2 = static_cast<double>(n) * n / 12.0;

  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(a.N) * (9 * d - 3));

  CoefficientSet c;
  VectorXd y(d);
  MatrixXd A(d, d);
  int idx[3] = {0, 0, 0};
  for (long long flat = 0; flat < a.N; ++flat) {
    for (int k = 0; k < d; ++k) y[k] = idx[k] * a.dx;
    p.evaluate(y, DerivLevel::values, c);
    A.noalias() = 0.5 * c.sigma * c.sigma.transpose();
    a.b_nodal.row(flat) = c.b;

    auto nb = [&](int axis, int off) {
      return flat +
             (wrap_line(idx[axis] + off, n) - idx[axis]) * stride[axis];
    };
    for (int j = 0; j < d; ++j) {
      const double cjj = -A(j, j) * inv12dx2;
      for (int t = 0; t < 5; ++t)
        trip.emplace_back(flat, nb(j, kD2Off[t]), cjj * kD2W[t]);
      const double cj = -c.b[j] * inv12dx;
      for (int t = 0; t < 4; ++t)
        trip.emplace_back(flat, nb(j, kD1Off[t]), cj * kD1W[t]);
      for (int k = j + 1; k < d; ++k) {
        const double cjk = -(A(j, k) + A(k, j)) * inv12dx * inv12dx;
        if (cjk == 0.0) continue;
        for (int tj = 0; tj < 4; ++tj)
          for (int tk = 0; tk < 4; ++tk)
            trip.emplace_back(
                flat,
                nb(j, kD1Off[tj]) +
                    (wrap_line(idx[k] + kD1Off[tk], n) - idx[k]) * stride[k],
                cjk * kD1W[tj] * kD1W[tk]);
      }
    }
    for (int k = 0; k < d; ++k) {
      if (++idx[k] < n) break;
      idx[k] = 0;
    }
  }

  a.K.resize(a.N, a.N);
  a.K.setFromTriplets(trip.begin(), trip.end());
  const VectorXd rowsum = a.K.cwiseAbs() * VectorXd::Ones(a.N);
  a.Knorm = std::max(rowsum.maxCoeff(), 1.0);

  for (long long i = 0; i < a.N; ++i) {
    trip.emplace_back(i, a.N, 1.0);
    trip.emplace_back(a.N, i, a.wq);
  }
  a.B.resize(a.N + 1, a.N + 1);
  a.B.setFromTriplets(trip.begin(), trip.end());
  return a;
}

// Solves on the bordered matrix with iterative refinement to push the
// relative residual near roundoff; direct factorization in 2d, ILUT
// preconditioned BiCGSTAB in 3d where fill-in rules the direct solver out.
class BorderedSolver {
 public:
  virtual ~BorderedSolver() = default;
  virtual VectorXd once(const VectorXd& rhs, const VectorXd* guess) = 0;
  virtual VectorXd once_t(const VectorXd& rhs, const VectorXd* guess) = 0;

  VectorXd solve(const SpMat& B, const VectorXd& rhs, const VectorXd* guess,
                 double tol, std::vector<double>& hist, bool transposed) {
    VectorXd x = transposed ? once_t(rhs, guess) : once(rhs, guess);
    const double scale = std::max(rhs.norm(), 1e-300);
    const double target = std::max(5e-15, 0.01 * tol);
    VectorXd best = x;
    double best_rel = std::numeric_limits<double>::infinity();
    double prev = best_rel;
    for (int pass = 0; pass < 5; ++pass) {
      const VectorXd res =
          transposed ? (rhs - B.transpose() * x).eval() : (rhs - B * x).eval();
      const double rel = res.norm() / scale;
      hist.push_back(rel);
      if (rel < best_rel) {
        best_rel = rel;
        best = x;
      }
      if (rel < target || rel > 0.5 * prev) break;  // done or stagnated
      prev = rel;
      x += transposed ? once_t(res, nullptr) : once(res, nullptr);
    }
    if (!(best_rel <= tol))
      throw SolverError("linear solve stalled at relative residual " +
                            std::to_string(best_rel),
                        hist);
    return best;
  }
};

class DirectSolver final : public BorderedSolver {
 public:
  explicit DirectSolver(const SpMat& B) {
    lu_.compute(B);
    if (lu_.info() != Eigen::Success)
      throw SolverError("sparse factorization of the bordered operator failed");
  }
  VectorXd once(const VectorXd& rhs, const VectorXd*) override {
    return lu_.solve(rhs);
  }
  VectorXd once_t(const VectorXd& rhs, const VectorXd*) override {
    return lu_.transpose().solve(rhs);
  }

 private:
  Eigen::SparseLU<SpMat> lu_;
};

class IterativeSolver final : public BorderedSolver {
 public:
  IterativeSolver(const SpMat& B, double tol) : Bt_(B.transpose()) {
    configure(fw_, tol);
    configure(bw_, tol);
    fw_.compute(B);
    bw_.compute(Bt_);
    if (fw_.info() != Eigen::Success || bw_.info() != Eigen::Success)
      throw SolverError("incomplete factorization of the bordered operator failed");
  }
  VectorXd once(const VectorXd& rhs, const VectorXd* guess) override {
    return guess ? fw_.solveWithGuess(rhs, *guess).eval() : fw_.solve(rhs).eval();
  }
  VectorXd once_t(const VectorXd& rhs, const VectorXd* guess) override {
    return guess ? bw_.solveWithGuess(rhs, *guess).eval() : bw_.solve(rhs).eval();
  }

 private:
  using Solver = Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>>;
  static void configure(Solver& s, double tol) {
    s.setTolerance(std::max(1e-14, 0.01 * tol));
    s.setMaxIterations(5000);
    s.preconditioner().setDroptol(1e-5);
    s.preconditioner().setFillfactor(30);
  }
  SpMat Bt_;
  Solver fw_, bw_;
};

std::unique_ptr<BorderedSolver> make_solver(const Assembly& a, double tol) {
  if (a.d <= 2) return std::make_unique<DirectSolver>(a.B);
  return std::make_unique<IterativeSolver>(a.B, tol);
}

TorusGridField density_from(const Assembly& a, BorderedSolver& solver,
                            double tol, double* residual_out) {
  VectorXd rhs = VectorXd::Zero(a.N + 1);
  rhs[a.N] = static_cast<double>(a.N);  // sum r = n^d, so integral(r) = 1
  VectorXd guess(a.N + 1);
  guess.head(a.N).setOnes();
  guess[a.N] = 0.0;
  std::vector<double> hist;
  const VectorXd x = solver.solve(a.B, rhs, &guess, tol, hist, true);
  const VectorXd r = x.head(a.N);

  const double res = (a.K.transpose() * r).norm() / (a.Knorm * r.norm());
  if (!(res <= tol)) {
    hist.push_back(res);
    throw SolverError("stationary density residual above tolerance", hist);
  }
  if (r.minCoeff() < -1e-10)
    throw GridError(
        "stationary density has negative nodes; the grid is too coarse for "
        "this problem, increase n");

  TorusGridField f(a.d, a.n, 1);
  f.values.col(0) = r;
  if (residual_out) *residual_out = res;
  return f;
}

std::pair<TorusGridField, VectorXd> cell_from(const Assembly& a,
                                              BorderedSolver& solver,
                                              const VectorXd& r, double tol,
                                              VectorXd* residuals_out) {
  const VectorXd b_bar = a.wq * (a.b_nodal.transpose() * r);
  TorusGridField chi(a.d, a.n, a.d);
  VectorXd cellres(a.d);
  VectorXd rhs = VectorXd::Zero(a.N + 1);
  for (int i = 0; i < a.d; ++i) {
    const VectorXd g = a.b_nodal.col(i).array() - b_bar[i];
    const double gn = g.norm();
    const double bscale =
        a.b_nodal.col(i).norm() + std::abs(b_bar[i]) * std::sqrt(double(a.N));
    if (gn <= 1e-13 * bscale) {
      // Drift component is constant on the grid; the corrector vanishes.
      chi.values.col(i).setZero();
      cellres[i] = 0.0;
      continue;
    }
    rhs.head(a.N) = g;
    std::vector<double> hist;
    const VectorXd x = solver.solve(a.B, rhs, nullptr, tol, hist, false);
    chi.values.col(i) = x.head(a.N);
    const double res = (a.K * x.head(a.N) - g).norm() /
                       std::max(a.Knorm * x.head(a.N).norm() + gn, 1e-300);
    if (!(res <= tol)) {
      hist.push_back(res);
      throw SolverError("cell problem residual above tolerance", hist);
    }
    cellres[i] = res;
  }
  if (residuals_out) *residuals_out = cellres;
  return {std::move(chi), b_bar};
}

void check_field(const ProblemDefinition& p, const TorusGridField& f,
                 int components, const char* what) {
  if (f.dim != p.dim() || f.n < 16 || f.components() != components ||
      f.nodes() != node_count(f.dim, f.n))
    throw ArgumentError(std::string(what) +
                        " grid does not match the problem dimensions");
}

}  // namespace

TorusGridField::TorusGridField(int dim_, int n_, int components)
    : dim(dim_), n(n_), values(MatrixXd::Zero(node_count(dim_, n_), components)) {}

long long TorusGridField::flat_index(const VectorXi& idx) const {
  long long flat = 0, stride = 1;
  for (int a = 0; a < dim; ++a) {
    const int w = ((idx[a] % n) + n) % n;
    flat += w * stride;
    stride *= n;
  }
  return flat;
}

VectorXi TorusGridField::multi_index(long long flat) const {
  VectorXi idx(dim);
  for (int a = 0; a < dim; ++a) {
    idx[a] = static_cast<int>(flat % n);
    flat /= n;
  }
  return idx;
}

VectorXd TorusGridField::node_point(long long flat) const {
  return multi_index(flat).cast<double>() / n;
}

double TorusGridField::integral(int component) const {
  return std::pow(1.0 / n, dim) * values.col(component).sum();
}

TorusGridField solve_invariant_density(const ProblemDefinition& problem, int n,
                                       double tol_lin) {
  const Assembly a = assemble(problem, n);
  const auto solver = make_solver(a, tol_lin);
  return density_from(a, *solver, tol_lin, nullptr);
}

std::pair<TorusGridField, VectorXd> solve_cell_problem(
    const ProblemDefinition& problem, const TorusGridField& r, double tol_lin) {
  check_field(problem, r, 1, "density");
  const Assembly a = assemble(problem, r.n);
  const auto solver = make_solver(a, tol_lin);
  return cell_from(a, *solver, r.values.col(0), tol_lin, nullptr);
}

Eigen::MatrixXd effective_diffusivity_eulerian(const ProblemDefinition& problem,
                                               const TorusGridField& r,
                                               const TorusGridField& chi,
                                               double* asymmetry_out) {
  check_field(problem, r, 1, "density");
  check_field(problem, chi, problem.dim(), "corrector");
  if (chi.n != r.n)
    throw ArgumentError("density and corrector grids have different resolutions");

  const int d = problem.dim();
  const int n = r.n;
  const long long N = r.nodes();
  const double dx = 1.0 / n;
  const double wq = std::pow(dx, d);
  const double inv12dx = n / 12.0;

  long long stride[3] = {1, 1, 1};
  for (int k = 1; k < d; ++k) stride[k] = stride[k - 1] * n;

  CoefficientSet c;
  VectorXd y(d);
  MatrixXd A(d, d), G(d, d), P(d, d), acc = MatrixXd::Zero(d, d);
  int idx[3] = {0, 0, 0};
  for (long long flat = 0; flat < N; ++flat) {
    for (int k = 0; k < d; ++k) y[k] = idx[k] * dx;
    problem.evaluate(y, DerivLevel::values, c);
    A.noalias() = 0.5 * c.sigma * c.sigma.transpose();
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int t = 0; t < 4; ++t) {
          const long long nbf =
              flat + (wrap_line(idx[j] + kD1Off[t], n) - idx[j]) * stride[j];
          s += kD1W[t] * chi.values(nbf, i);
        }
        G(i, j) = s * inv12dx;
      }
    P = MatrixXd::Identity(d, d) + G;
    acc.noalias() += (wq * r.values(flat, 0)) * (P * A * P.transpose());
    for (int k = 0; k < d; ++k) {
      if (++idx[k] < n) break;
      idx[k] = 0;
    }
  }
  if (asymmetry_out) *asymmetry_out = (acc - acc.transpose()).cwiseAbs().maxCoeff();
  return 0.5 * (acc + acc.transpose());
}

Eigen::VectorXd mean_drift_eulerian(const ProblemDefinition& problem,
                                    const TorusGridField& r) {
  check_field(problem, r, 1, "density");
  const int d = problem.dim();
  const double dx = 1.0 / r.n;
  CoefficientSet c;
  VectorXd y(d), acc = VectorXd::Zero(d);
  for (long long flat = 0; flat < r.nodes(); ++flat) {
    const VectorXi idx = r.multi_index(flat);
    for (int k = 0; k < d; ++k) y[k] = idx[k] * dx;
    problem.evaluate(y, DerivLevel::values, c);
    acc += r.values(flat, 0) * c.b;
  }
  return std::pow(dx, d) * acc;
}

EulerianSolution solve_reference(const ProblemDefinition& problem, int n,
                                 double tol_lin) {
  const Assembly a = assemble(problem, n);
  const auto solver = make_solver(a, tol_lin);

  EulerianSolution sol;
  sol.n = n;
  sol.r = density_from(a, *solver, tol_lin, &sol.density_residual);
  auto cell = cell_from(a, *solver, sol.r.values.col(0), tol_lin,
                        &sol.cell_residuals);
  sol.chi = std::move(cell.first);
  sol.b_bar = std::move(cell.second);
  sol.A_eff = effective_diffusivity_eulerian(problem, sol.r, sol.chi,
                                             &sol.asymmetry);
  return sol;
}

}  // namespace effdiff
