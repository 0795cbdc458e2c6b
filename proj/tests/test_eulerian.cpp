#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <utility>

#include <effdiff/errors.hpp>
#include <effdiff/eulerian.hpp>
#include <effdiff/problem.hpp>

using namespace effdiff;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Expected effective diffusivities below are frozen from an independent
// Fourier-Galerkin solve of the same cell problems, converged past 15 digits,
// and from closed forms where the coefficients admit one (harmonic means for
// the separable benchmarks). Grid tolerances are set at roughly twice the
// measured fourth-order discretization error at each resolution.

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kBenchConstADiag = 2.061541391919713;  // spectral, converged
const double kRoot3 = std::sqrt(3.0);

double max_abs_offdiag(const MatrixXd& m) {
  double v = 0.0;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (i != j) v = std::max(v, std::abs(m(i, j)));
  return v;
}

// Max node error of the density field against a closed-form density.
template <class F>
double density_error(const TorusGridField& r, F&& exact) {
  double v = 0.0;
  for (Eigen::Index k = 0; k < r.nodes(); ++k) {
    const VectorXd y = r.node_point(k);
    v = std::max(v, std::abs(r.values(k, 0) - exact(y)));
  }
  return v;
}

// 1d problem with sigma(y)^2/2 = 2 + sin(2 pi y) and drift matching its
// derivative; the generator is then in divergence form and the effective
// diffusivity is the harmonic mean sqrt(3) exactly.
ProblemPtr harmonic_mean_1d() {
  CallableSpec s;
  s.dim = 1;
  s.drift = [](const VectorXd& y) {
    VectorXd b(1);
    b[0] = 2.0 * kPi * std::cos(2.0 * kPi * y[0]);
    return b;
  };
  s.sigma = [](const VectorXd& y) {
    MatrixXd m(1, 1);
    m(0, 0) = std::sqrt(2.0 * (2.0 + std::sin(2.0 * kPi * y[0])));
    return m;
  };
  s.sigma_diagonal = true;
  s.name = "harmonic-1d";
  return make_callable_problem(std::move(s));
}

}  // namespace

TEST_CASE("free Brownian motion reproduces the identity exactly") {
  auto p = make_problem("free-brownian-2d");
  const EulerianSolution sol = solve_reference(*p, 32);
  CHECK(sol.n == 32);
  CHECK(sol.A_eff.rows() == 2);
  for (int i = 0; i < 2; ++i) CHECK(sol.A_eff(i, i) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(max_abs_offdiag(sol.A_eff) <= 1e-13);
  CHECK(density_error(sol.r, [](const VectorXd&) { return 1.0; }) <= 1e-12);
  CHECK(sol.b_bar.cwiseAbs().maxCoeff() <= 1e-13);
  CHECK(sol.asymmetry <= 1e-14);
  CHECK(sol.density_residual <= 1e-12);
  // Zero drift never reaches the linear solver; the corrector is exact.
  CHECK(sol.cell_residuals.cwiseAbs().maxCoeff() == 0.0);
  CHECK(sol.chi.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK(sol.r.integral() == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("incompressible 2d benchmark converges at fourth order") {
  auto p = make_problem("benchmark-2d-constant");
  const EulerianSolution s64 = solve_reference(*p, 64);
  const EulerianSolution s128 = solve_reference(*p, 128);

  // The drift is divergence free, so the invariant density is uniform and
  // sits in the kernel of the discrete operator up to roundoff.
  CHECK(density_error(s64.r, [](const VectorXd&) { return 1.0; }) <= 1e-12);
  CHECK(density_error(s128.r, [](const VectorXd&) { return 1.0; }) <= 1e-12);

  const double e64 = std::abs(s64.A_eff(0, 0) - kBenchConstADiag);
  const double e128 = std::abs(s128.A_eff(0, 0) - kBenchConstADiag);
  CHECK(e64 <= 5e-7);
  CHECK(e128 <= 4e-8);
  CHECK(e64 / e128 >= 10.0);  // fourth order: ratio 16 per doubling
  CHECK(e64 / e128 <= 22.0);
  CHECK(s64.A_eff(0, 0) == doctest::Approx(s64.A_eff(1, 1)).epsilon(1e-13));
  CHECK(max_abs_offdiag(s64.A_eff) <= 1e-12);
  CHECK(s64.b_bar.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(s64.asymmetry <= 1e-13);
  CHECK(s64.density_residual <= 1e-12);
  CHECK(s64.cell_residuals.maxCoeff() <= 1e-12);
  for (int i = 0; i < 2; ++i)
    CHECK(s64.chi.integral(i) == doctest::Approx(0.0).epsilon(1e-12));

  // Deterministic regression pin for the direct-solver path.
  CHECK(s64.A_eff(0, 0) == doctest::Approx(2.061541141189190).epsilon(1e-12));
}

TEST_CASE("halving the spacing moves the 2d benchmark answer below 1e-6") {
  auto p = make_problem("benchmark-2d-constant");
  const MatrixXd a128 = solve_reference(*p, 128).A_eff;
  const MatrixXd a256 = solve_reference(*p, 256).A_eff;
  CHECK((a128 - a256).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(std::abs(a256(0, 0) - kBenchConstADiag) <= 3e-9);
}

TEST_CASE("variable-coefficient 2d benchmark matches its closed forms") {
  auto p = make_problem("benchmark-2d-variable");
  const EulerianSolution s64 = solve_reference(*p, 64);
  const EulerianSolution s128 = solve_reference(*p, 128);

  auto exact_r = [](const VectorXd& y) {
    return 1.0 + 0.5 * std::sin(2.0 * kPi * y[0]) * std::sin(2.0 * kPi * y[1]);
  };
  CHECK(density_error(s64.r, exact_r) <= 8e-6);
  CHECK(density_error(s128.r, exact_r) <= 5e-7);

  const double target = 0.5 * kRoot3;  // per-axis harmonic mean
  const double e64 = std::abs(s64.A_eff(0, 0) - target);
  const double e128 = std::abs(s128.A_eff(0, 0) - target);
  CHECK(e64 <= 6e-7);
  CHECK(e128 <= 4e-8);
  CHECK(e64 / e128 >= 10.0);
  CHECK(e64 / e128 <= 22.0);
  CHECK(std::abs(s128.A_eff(1, 1) - target) <= 4e-8);
  CHECK(max_abs_offdiag(s128.A_eff) <= 1e-12);
  CHECK(s128.b_bar.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(s128.asymmetry <= 1e-13);
  for (int i = 0; i < 2; ++i)
    CHECK(s128.chi.integral(i) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s128.r.integral() == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("1d divergence-form problem recovers the harmonic mean") {
  auto p = harmonic_mean_1d();
  const EulerianSolution s16 = solve_reference(*p, 16);
  const EulerianSolution s32 = solve_reference(*p, 32);
  const EulerianSolution s64 = solve_reference(*p, 64);

  const double e16 = std::abs(s16.A_eff(0, 0) - kRoot3);
  const double e32 = std::abs(s32.A_eff(0, 0) - kRoot3);
  const double e64 = std::abs(s64.A_eff(0, 0) - kRoot3);
  CHECK(e16 <= 3e-4);
  CHECK(e32 <= 2e-5);
  CHECK(e64 <= 2e-6);
  CHECK(e16 / e32 >= 10.0);
  CHECK(e16 / e32 <= 22.0);
  CHECK(e32 / e64 >= 10.0);
  CHECK(e32 / e64 <= 22.0);

  CHECK(density_error(s64.r, [](const VectorXd&) { return 1.0; }) <= 5e-6);
  CHECK(std::abs(s64.b_bar[0]) <= 1e-12);
  CHECK(s64.density_residual <= 1e-12);
  CHECK(s64.cell_residuals[0] <= 1e-12);
}

TEST_CASE("3d benchmark agrees with closed forms through the iterative path") {
  auto p = make_problem("benchmark-3d");
  const EulerianSolution sol = solve_reference(*p, 32);

  const double target = 0.5 * kRoot3;
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(sol.A_eff(i, i) - target) <= 1e-5);
  CHECK(max_abs_offdiag(sol.A_eff) <= 1e-10);

  auto exact_r = [](const VectorXd& y) {
    return 1.0 + 0.5 * std::sin(2.0 * kPi * y[1]) * std::sin(2.0 * kPi * y[2]);
  };
  CHECK(density_error(sol.r, exact_r) <= 2e-4);
  CHECK(sol.b_bar.cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(sol.density_residual <= 1e-10);
  CHECK(sol.cell_residuals.maxCoeff() <= 1e-10);
  CHECK(sol.asymmetry <= 1e-12);
  CHECK(sol.r.integral() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("adding a constant to the drift shifts the mean drift exactly") {
  VectorXd c(2);
  c << 0.3, -0.2;
  auto p = shift_drift(make_problem("benchmark-2d-constant"), c);
  const EulerianSolution sol = solve_reference(*p, 64);
  CHECK(sol.b_bar[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(sol.b_bar[1] == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(density_error(sol.r, [](const VectorXd&) { return 1.0; }) <= 1e-12);
}

TEST_CASE("constant drift has a vanishing corrector") {
  CallableSpec s;
  s.dim = 2;
  s.drift = [](const VectorXd&) {
    VectorXd b(2);
    b << 0.3, -0.2;
    return b;
  };
  s.sigma = [](const VectorXd&) {
    return MatrixXd(MatrixXd::Identity(2, 2) * std::sqrt(2.0));
  };
  s.sigma_diagonal = true;
  s.sigma_constant = true;
  auto p = make_callable_problem(std::move(s));

  const EulerianSolution sol = solve_reference(*p, 16);
  CHECK(sol.chi.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK(sol.cell_residuals.cwiseAbs().maxCoeff() == 0.0);
  CHECK(sol.b_bar[0] == doctest::Approx(0.3).epsilon(1e-13));
  CHECK(sol.b_bar[1] == doctest::Approx(-0.2).epsilon(1e-13));
  for (int i = 0; i < 2; ++i)
    CHECK(sol.A_eff(i, i) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(max_abs_offdiag(sol.A_eff) <= 1e-13);
}

TEST_CASE("field index helpers round-trip") {
  TorusGridField f(3, 16, 2);
  CHECK(f.nodes() == 16 * 16 * 16);
  CHECK(f.components() == 2);
  Eigen::VectorXi idx(3);
  idx << 3, 0, 15;
  CHECK(f.multi_index(f.flat_index(idx)) == idx);
  // Indices wrap around the torus.
  Eigen::VectorXi shifted(3);
  shifted << 3 + 16, -16, 15 - 32;
  CHECK(f.flat_index(shifted) == f.flat_index(idx));
  const VectorXd y = f.node_point(f.flat_index(idx));
  CHECK(y[0] == doctest::Approx(3.0 / 16.0));
  CHECK(y[1] == 0.0);
  CHECK(y[2] == doctest::Approx(15.0 / 16.0));
  f.values.col(1).setConstant(2.5);
  CHECK(f.integral(1) == doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("under-resolved peaked density is reported as a grid failure") {
  // Strong confining drift concentrates the density; at n=16 the stencil
  // produces negative nodes, which must surface as GridError, not as noise.
  CallableSpec s;
  s.dim = 1;
  s.drift = [](const VectorXd& y) {
    VectorXd b(1);
    b[0] = -16.0 * kPi * std::sin(2.0 * kPi * y[0]);
    return b;
  };
  s.sigma = [](const VectorXd&) {
    MatrixXd m(1, 1);
    m(0, 0) = std::sqrt(2.0);
    return m;
  };
  s.sigma_diagonal = true;
  auto p = make_callable_problem(std::move(s));
  CHECK_THROWS_AS(solve_invariant_density(*p, 16), GridError);
}

TEST_CASE("argument validation") {
  auto p = make_problem("benchmark-2d-constant");
  CHECK_THROWS_AS(solve_invariant_density(*p, 8), ArgumentError);
  CHECK_THROWS_AS(solve_invariant_density(*p, 0), ArgumentError);

  // Density field from the wrong problem dimension or resolution.
  TorusGridField r1(1, 32, 1);
  CHECK_THROWS_AS(solve_cell_problem(*p, r1), ArgumentError);
  TorusGridField r2(2, 32, 2);  // two components is not a density
  CHECK_THROWS_AS(solve_cell_problem(*p, r2), ArgumentError);

  const TorusGridField r = solve_invariant_density(*p, 32);
  auto [chi, b_bar] = solve_cell_problem(*p, r);
  CHECK(b_bar.cwiseAbs().maxCoeff() <= 1e-12);
  TorusGridField chi16(2, 16, 2);
  CHECK_THROWS_AS(effective_diffusivity_eulerian(*p, r, chi16), ArgumentError);
  TorusGridField chi1(2, 32, 1);
  CHECK_THROWS_AS(effective_diffusivity_eulerian(*p, r, chi1), ArgumentError);

  // Mixed resolutions between density and corrector are rejected even though
  // each matches the problem on its own.
  const TorusGridField r16 = solve_invariant_density(*p, 16);
  CHECK_THROWS_AS(effective_diffusivity_eulerian(*p, r16, chi), ArgumentError);

  // An unreachable tolerance must surface as a solver failure.
  CHECK_THROWS_AS(solve_invariant_density(*p, 32, 1e-30), SolverError);
}

TEST_CASE("mean drift quadrature matches the reference solve") {
  auto p = make_problem("benchmark-2d-variable");
  const TorusGridField r = solve_invariant_density(*p, 64);
  const VectorXd md = mean_drift_eulerian(*p, r);
  CHECK(md.cwiseAbs().maxCoeff() <= 1e-12);
}
