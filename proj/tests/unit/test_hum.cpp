#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "sdlab/errors.hpp"
#include "sdlab/hum.hpp"
#include "test_support.hpp"

using namespace sdlab;
using sdlab::testing::random_coeffs;
using sdlab::testing::random_fn;
using sdlab::testing::random_leaves;

namespace {

// Primal oracle: minimize ½ ΣΔt E(|u|²_{G0} + |v|²) + (1/2φ) E‖y_K‖² over all
// controls by assembling the control-to-state map column by column with the
// forward solver only.
struct PrimalOptimum {
  Eigen::VectorXd yK;
  double control_cost;
};

PrimalOptimum primal_oracle(const StochasticSolver& s, const MeshFn& y0, double phi) {
  const Mesh& m = s.mesh();
  const ScenarioTree& tree = s.tree();
  const std::size_t np = m.count(Region::primal());
  const double hn = std::pow(m.h(), m.dim());
  struct Slot {
    bool is_u;
    int k;
    std::size_t j, q;
  };
  std::vector<Slot> slots;
  for (int k = 0; k < tree.steps(); ++k)
    for (std::size_t j = 0; j < tree.nodes_at(k); ++j)
      for (std::size_t q = 0; q < np; ++q) {
        if (s.control_mask()[q] != 0.0) slots.push_back({true, k, j, q});
        slots.push_back({false, k, j, q});
      }
  const auto nc = static_cast<Eigen::Index>(slots.size());
  const auto nl = static_cast<Eigen::Index>(s.leaf_size());
  Eigen::VectorXd mass(nc);
  Eigen::MatrixXd F(nl, nc);
  for (Eigen::Index c = 0; c < nc; ++c) {
    const Slot& sl = slots[static_cast<std::size_t>(c)];
    mass[c] = tree.dt() * tree.weight(sl.k) * hn;
    ControlPair ctl = ControlPair::zero(m, tree);
    (sl.is_u ? ctl.u : ctl.v).at(sl.k, sl.j)[sl.q] = 1.0;
    F.col(c) = s.leaves(s.solve_forward(MeshFn(m, Region::primal()), ctl));
  }
  const Eigen::VectorXd free = s.leaves(s.solve_forward(y0));
  const Eigen::VectorXd W = Eigen::VectorXd::Constant(nl, tree.weight(tree.steps()) * hn);
  const Eigen::MatrixXd H =
      Eigen::MatrixXd(mass.asDiagonal()) + F.transpose() * W.asDiagonal() * F / phi;
  const Eigen::VectorXd c = H.ldlt().solve(-F.transpose() * (W.asDiagonal() * free) / phi);
  return {free + F * c, c.dot(mass.asDiagonal() * c)};
}

}  // namespace

TEST_CASE("phi rates") {
  CHECK(PhiRate::parse("h2")(0.25) == 0.0625);
  CHECK(PhiRate::parse("exp_sqrt", 2.0)(0.25) == doctest::Approx(std::exp(-4.0)));
  CHECK(PhiRate::parse("h2").name() == "h2");
  CHECK_THROWS_AS(PhiRate::parse("h3"), InvalidArgument);
  CHECK_THROWS_AS(PhiRate::parse("exp_sqrt", -1.0), InvalidArgument);
  CHECK_THROWS_AS(PhiRate::parse("h2")(0.0), InvalidArgument);
}

TEST_CASE("zero initial state gives the zero minimizer") {
  const Mesh m(2, 3);
  const ScenarioTree tree(3, 0.03);
  const StochasticSolver s(m, Coefficients::heat(m), tree, Box::cube(2, 0.2, 0.6));
  const HumSolution sol = solve_hum(s, MeshFn(m, Region::primal()), HumConfig{});
  CHECK(sol.z_T.norm() == 0.0);
  CHECK(sol.control_cost == 0.0);
}

TEST_CASE("HUM matches the dense primal optimum") {
  std::mt19937_64 rng(17);
  for (int n : {1, 2}) {
    const Mesh m(n, n == 1 ? 3 : 2);
    const ScenarioTree tree(3, 0.2);
    SolverOptions opt;
    opt.scheme = TimeScheme::implicit_drift;
    const StochasticSolver s(m, random_coeffs(m, rng), tree, Box::cube(n, 0.2, 0.6), opt);
    const MeshFn y0 = random_fn(m, Region::primal(), rng);
    HumConfig cfg;
    cfg.phi = PhiRate::parse("h2");
    const HumSolution sol = solve_hum(s, y0, cfg);
    const PrimalOptimum ref = primal_oracle(s, y0, sol.phi);
    const Eigen::VectorXd yK = s.leaves(sol.y);
    CHECK((yK - ref.yK).norm() <= 1e-8 * ref.yK.norm());
    const ControllabilityReport rep = verify_controllability(s, sol, y0);
    CHECK(rep.control_cost == doctest::Approx(ref.control_cost).epsilon(1e-8));
    CHECK(sol.optimality_residual <= 1e-8);
  }
}

TEST_CASE("HUM optimality, operator probes and gradient") {
  const Mesh m(2, 7);
  const ScenarioTree tree(10, 1.0);
  SolverOptions opt;
  opt.scheme = TimeScheme::implicit_drift;
  Coefficients c = Coefficients::heat(m);
  for (auto& g : c.drift.gamma) g *= 0.1;
  c.a3 = MeshFn::constant(m, Region::primal(), 0.5);
  const StochasticSolver s(m, c, tree, Box::cube(2, 0.2, 0.8), opt);
  std::mt19937_64 rng(23);
  const MeshFn y0 = random_fn(m, Region::primal(), rng);
  HumConfig cfg;
  cfg.phi = PhiRate::parse("h2");
  const HumSolution sol = solve_hum(s, y0, cfg);
  CHECK(sol.converged);
  CHECK(sol.optimality_residual <= 1e-8);
  for (std::size_t i = 1; i < sol.residuals.size(); ++i) {
    CHECK(sol.residuals[i] <= sol.residuals[i - 1] * (1 + 1e-12));
  }

  const OperatorProbe p = probe_hum_operator(s, sol.phi, 5, 3);
  CHECK(p.symmetry <= 1e-10);
  CHECK(p.coercivity_margin >= -1e-10);
  CHECK(p.gram_identity <= 1e-10);

  // J is quadratic: the central difference is exact up to rounding
  const LeafVector z = sol.z_T + random_leaves(s, rng);
  const LeafVector d = random_leaves(s, rng);
  CHECK(gradient_check(s, z, y0, sol.phi, d, 1e-2) <= 1e-6);
  // and the optimum has the smallest functional value along any line
  const double j0 = hum_functional(s, sol.z_T, y0, sol.phi);
  CHECK(j0 == doctest::Approx(sol.cost).epsilon(1e-12));
  for (double t : {-1e-2, 1e-2, 1.0}) CHECK(hum_functional(s, sol.z_T + t * d, y0, sol.phi) >= j0);
}

TEST_CASE("HUM feedback controls stay inside G0") {
  const Mesh m(2, 5);
  const ScenarioTree tree(4, 0.5);
  SolverOptions opt;
  opt.scheme = TimeScheme::implicit_drift;
  const StochasticSolver s(m, Coefficients::heat(m), tree, Box::cube(2, 0.3, 0.7), opt);
  std::mt19937_64 rng(2);
  const BackwardPair adj = s.solve_backward(random_leaves(s, rng));
  const ControlPair ctl = feedback_controls(s, adj);
  CHECK_NOTHROW(s.check_control(ctl));
  const std::size_t np = m.count(Region::primal());
  for (int k = 0; k < tree.steps(); ++k) {
    const auto u = ctl.u.level(k);
    const auto mk = adj.m.level(k);
    for (std::size_t q = 0; q < u.size(); ++q) {
      CHECK(u[q] == -s.control_mask()[q % np] * mk[q]);
    }
  }
}

TEST_CASE("per-level control energy sums to the control cost") {
  const Mesh m(2, 5);
  const ScenarioTree tree(5, 1.0);
  SolverOptions opt;
  opt.scheme = TimeScheme::implicit_drift;
  const StochasticSolver s(m, Coefficients::heat(m), tree, Box::cube(2, 0.2, 0.8), opt);
  std::mt19937_64 rng(9);
  const MeshFn y0 = random_fn(m, Region::primal(), rng);
  const HumSolution sol = solve_hum(s, y0, HumConfig{});
  const auto levels = control_energy_per_level(s, sol);
  REQUIRE(levels.size() == 5);
  double total = 0.0;
  for (const LevelEnergy& e : levels) total += tree.dt() * (e.u + e.v);
  const ControllabilityReport rep = verify_controllability(s, sol, y0);
  CHECK(total == doctest::Approx(rep.control_cost).epsilon(1e-12));
  CHECK(rep.cost_ratio == doctest::Approx(rep.control_cost / rep.initial_energy));
  CHECK(rep.terminal_ratio == doctest::Approx(rep.terminal_energy / (sol.phi * rep.initial_energy)));
}
