#include <cmath>
#include <random>

#include "doctest.h"
#include "sdlab/counterexample.hpp"
#include "sdlab/errors.hpp"
#include "test_support.hpp"

using namespace sdlab;
using sdlab::testing::random_controls;
using sdlab::testing::random_fn;

namespace {
const Box kOffDiagonal{{0.55, 0.05}, {0.95, 0.45}};
}

TEST_CASE("checkerboard on N = 3") {
  const Mesh m(2, 3);
  const CheckerboardMode cb = build_checkerboard(m);
  CHECK(cb.psi[0] == -1.0);
  CHECK(cb.psi[4] == 1.0);
  CHECK(cb.psi[8] == -1.0);
  for (std::size_t q : {1, 2, 3, 5, 6, 7}) CHECK(cb.psi[q] == 0.0);
  CHECK(cb.eigenvalue == doctest::Approx(-64.0));
  CHECK(inner(cb.psi, cb.psi) == doctest::Approx(m.h() * m.h() * 3));
  CHECK(verify_eigen(cb) <= 1e-12);
}

TEST_CASE("checkerboard eigen residual across sizes") {
  for (int N : {1, 2, 5, 8, 15}) {
    const CheckerboardMode cb = build_checkerboard(Mesh(2, N));
    CHECK(verify_eigen(cb) <= 1e-12 * std::abs(cb.eigenvalue));
  }
  CHECK_THROWS_AS(build_checkerboard(Mesh(3, 3)), InvalidArgument);
}

TEST_CASE("control box on the diagonal is refused") {
  const Mesh m(2, 7);
  CHECK_NOTHROW(require_off_diagonal(m, kOffDiagonal));
  CHECK_THROWS_AS(require_off_diagonal(m, Box::cube(2, 0.2, 0.6)), InvalidArgument);
}

TEST_CASE("mode component ignores every admissible control") {
  const Mesh m(2, 7);
  const ScenarioTree tree(8, 0.01);
  std::mt19937_64 rng(11);
  for (TimeScheme scheme : {TimeScheme::explicit_euler, TimeScheme::implicit_drift}) {
    SolverOptions opt;
    opt.scheme = scheme;
    const StochasticSolver s(m, Coefficients::heat(m), tree, kOffDiagonal, opt);
    const CheckerboardMode cb = build_checkerboard(m);
    const MeshFn y0 = cb.psi + random_fn(m, Region::primal(), rng);
    const ModeExperiment base =
        uncontrollable_mode_experiment(s, cb, y0, ControlPair::zero(m, tree), kOffDiagonal);
    CHECK(base.deviation <= 1e-12);
    for (int t = 0; t < 20; ++t) {
      const ModeExperiment e =
          uncontrollable_mode_experiment(s, cb, y0, random_controls(s, rng), kOffDiagonal);
      CHECK(e.deviation <= 1e-10);
      CHECK(std::abs(e.measured - base.measured) <= 1e-10 * std::abs(base.measured));
    }
  }
}

TEST_CASE("state orthogonal to the mode keeps a zero component") {
  const Mesh m(2, 5);
  const ScenarioTree tree(6, 0.01);
  const StochasticSolver s(m, Coefficients::heat(m), tree, kOffDiagonal);
  const CheckerboardMode cb = build_checkerboard(m);
  MeshFn y0 = MeshFn::constant(m, Region::primal(), 1.0);
  y0 -= (inner(y0, cb.psi) / inner(cb.psi, cb.psi)) * cb.psi;
  std::mt19937_64 rng(5);
  const ModeExperiment e = uncontrollable_mode_experiment(s, cb, y0, random_controls(s, rng), kOffDiagonal);
  CHECK(std::abs(e.measured) <= 1e-14);
}

TEST_CASE("step factor") {
  const Mesh m(2, 7);
  const ScenarioTree tree(10, 0.01);
  const double r = 4 * 0.001 / (m.h() * m.h());
  const StochasticSolver ex(m, Coefficients::heat(m), tree, kOffDiagonal);
  CHECK(mode_step_factor(ex) == doctest::Approx(1 - r));
  SolverOptions opt;
  opt.scheme = TimeScheme::implicit_drift;
  const StochasticSolver im(m, Coefficients::heat(m), tree, kOffDiagonal, opt);
  CHECK(mode_step_factor(im) == doctest::Approx(1 / (1 + r)));
}

TEST_CASE("mode experiment needs heat coefficients") {
  const Mesh m(2, 5);
  const ScenarioTree tree(4, 0.01);
  Coefficients c = Coefficients::heat(m);
  c.a3 = MeshFn::constant(m, Region::primal(), 0.3);
  const StochasticSolver s(m, c, tree, kOffDiagonal);
  const CheckerboardMode cb = build_checkerboard(m);
  CHECK_THROWS_AS(uncontrollable_mode_experiment(s, cb, cb.psi, ControlPair::zero(m, tree), kOffDiagonal),
                  InvalidArgument);
}

TEST_CASE("discrete factor converges at first order under K-doubling") {
  const std::vector<FactorRow> rows = factor_convergence(0.25, 1.0, 16384, 4);
  REQUIRE(rows.size() == 4);
  // long double oracle for the first row
  const long double K = 16384.0L;
  const long double disc = std::exp(K * std::log1p(-64.0L / K));
  CHECK(rows[0].discrete == doctest::Approx(static_cast<double>(disc)).epsilon(1e-12));
  CHECK(rows[0].continuous == doctest::Approx(std::exp(-64.0)).epsilon(1e-14));
  CHECK(std::isnan(rows[0].observed_order));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].K == 2 * rows[i - 1].K);
    CHECK(rows[i].relative_error < rows[i - 1].relative_error);
    CHECK(rows[i].observed_order == doctest::Approx(1.0).epsilon(0.2));
  }
}
