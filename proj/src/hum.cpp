#include "sdlab/hum.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "sdlab/errors.hpp"
#include "sdlab/rng.hpp"

namespace sdlab {

double PhiRate::operator()(double h) const {
  if (!(h > 0.0)) throw InvalidArgument("phi(h) needs h > 0");
  return kind == Kind::h_squared ? h * h : std::exp(-c / std::sqrt(h));
}

std::string PhiRate::name() const {
  if (kind == Kind::h_squared) return "h2";
  std::ostringstream os;
  os << "exp_sqrt(c=" << c << ")";
  return os.str();
}

PhiRate PhiRate::parse(const std::string& name, double c) {
  if (name == "h2") return {Kind::h_squared, 1.0};
  if (name == "exp_sqrt") {
    if (!(c > 0.0)) throw InvalidArgument("phi exp_sqrt needs c > 0");
    return {Kind::exp_sqrt, c};
  }
  throw InvalidArgument("unknown phi rate '" + name + "' (expected h2 or exp_sqrt)");
}

GramTerms gram_terms(const StochasticSolver& solver, const BackwardPair& adj) {
  const ScenarioTree& tree = solver.tree();
  const double hn = solver.mesh().cell_measure(Region::primal());
  const std::size_t n = solver.mesh().count(Region::primal());
  const MeshFn& mask = solver.control_mask();
  GramTerms g;
  for (int k = 0; k < tree.steps(); ++k) {
    auto Z = adj.Z.level(k);
    auto m = adj.m.level(k);
    double sz = 0.0, sm = 0.0;
    for (std::size_t q = 0; q < Z.size(); ++q) {
      sz += Z[q] * Z[q];
      sm += mask[q % n] * m[q] * m[q];
    }
    g.martingale += std::ldexp(sz, -k);
    g.observation += std::ldexp(sm, -k);
  }
  g.martingale *= tree.dt() * hn;
  g.observation *= tree.dt() * hn;
  return g;
}

ControlPair feedback_controls(const StochasticSolver& solver, const BackwardPair& adj) {
  ControlPair ctl = ControlPair::zero(solver.mesh(), solver.tree());
  const std::size_t n = solver.mesh().count(Region::primal());
  const MeshFn& mask = solver.control_mask();
  for (int k = 0; k < solver.tree().steps(); ++k) {
    auto u = ctl.u.level(k);
    auto v = ctl.v.level(k);
    auto m = adj.m.level(k);
    auto Z = adj.Z.level(k);
    for (std::size_t q = 0; q < u.size(); ++q) {
      u[q] = -mask[q % n] * m[q];
      v[q] = -Z[q];
    }
  }
  return ctl;
}

double hum_functional(const StochasticSolver& solver, const LeafVector& z_T, const MeshFn& y0,
                      double phi) {
  const BackwardPair adj = solver.solve_backward(z_T);
  return 0.5 * gram_terms(solver, adj).total() + 0.5 * phi * solver.leaf_inner(z_T, z_T) -
         inner(y0, adj.z.value(0, 0));
}

namespace {

constexpr double kDualityTolerance = 1e-10;

LeafVector zero_leaves(const StochasticSolver& solver) {
  return LeafVector::Zero(static_cast<Eigen::Index>(solver.leaf_size()));
}

double leaf_norm(const StochasticSolver& s, const LeafVector& v) {
  return std::sqrt(s.leaf_inner(v, v));
}

}  // namespace

LeafVector hum_gradient(const StochasticSolver& solver, const LeafVector& z_T, const MeshFn& y0,
                        double phi) {
  const BackwardPair adj = solver.solve_backward(z_T);
  const ControlPair ctl = feedback_controls(solver, adj);
  const AdaptedProcess y = solver.solve_forward(y0, ctl);
  const DualityReport d = solver.duality(y0, y, ctl, adj);
  if (d.relative_gap() > kDualityTolerance) {
    throw PropertyFailure("duality identity broken: relative gap " +
                          std::to_string(d.relative_gap()));
  }
  return phi * z_T - solver.leaves(y);
}

LeafVector hum_operator(const StochasticSolver& solver, const LeafVector& d, double phi) {
  const BackwardPair adj = solver.solve_backward(d);
  const AdaptedProcess y =
      solver.solve_forward_feedback(MeshFn(solver.mesh(), Region::primal()), adj);
  return phi * d - solver.leaves(y);
}

HumSolution solve_hum(const StochasticSolver& solver, const MeshFn& y0, const HumConfig& cfg) {
  const double phi = cfg.phi(solver.mesh().h());
  const LeafVector b = solver.leaves(solver.solve_forward(y0));
  const InnerProduct dot = [&](const KrylovVector& a, const KrylovVector& c) {
    return solver.leaf_inner(a, c);
  };
  const LinearMap A = [&](const KrylovVector& d) { return hum_operator(solver, d, phi); };
  const double bnorm = leaf_norm(solver, b);
  // ‖y_K − φz‖ = ‖r‖ must be small against both ‖b‖ and ‖φz‖
  const auto threshold = [&](const KrylovVector& x) {
    return std::min(bnorm, phi * leaf_norm(solver, x));
  };
  KrylovResult kr = conjugate_residual(A, b, dot, cfg.cg_tol, cfg.cg_max_iter, threshold);
  if (!kr.converged) {
    std::ostringstream os;
    os << "conjugate residual stalled after " << kr.iterations << " iterations; residuals:";
    const std::size_t step = std::max<std::size_t>(1, kr.residuals.size() / 12);
    for (std::size_t i = 0; i < kr.residuals.size(); i += step) os << ' ' << kr.residuals[i];
    os << " final " << kr.true_residual;
    throw PropertyFailure(os.str());
  }

  BackwardPair adj = solver.solve_backward(kr.x);
  AdaptedProcess y = solver.solve_forward_feedback(y0, adj);
  HumSolution sol{kr.x, std::move(adj), std::move(y), phi, 0, {}, false, 0.0, 0.0, 0.0, 0.0, 0.0};
  sol.iterations = kr.iterations;
  sol.residuals = std::move(kr.residuals);
  sol.converged = kr.converged;
  const LeafVector yK = solver.leaves(sol.y);
  const LeafVector phiz = phi * sol.z_T;
  sol.gradient_norm = leaf_norm(solver, phiz - yK);
  const double pz = leaf_norm(solver, phiz);
  sol.optimality_residual = pz > 0.0 ? sol.gradient_norm / pz : sol.gradient_norm;
  sol.control_cost = gram_terms(solver, sol.adj).total();
  sol.terminal_energy = solver.leaf_inner(yK, yK);
  sol.cost = 0.5 * sol.control_cost + 0.5 * phi * solver.leaf_inner(sol.z_T, sol.z_T) -
             inner(y0, sol.adj.z.value(0, 0));
  return sol;
}

ControllabilityReport verify_controllability(const StochasticSolver& solver,
                                             const HumSolution& sol, const MeshFn& y0) {
  ControllabilityReport r;
  r.initial_energy = integral(y0 * y0);
  r.control_cost = gram_terms(solver, sol.adj).total();
  const LeafVector yK = solver.leaves(sol.y);
  r.terminal_energy = solver.leaf_inner(yK, yK);
  if (r.initial_energy > 0.0) {
    r.cost_ratio = r.control_cost / r.initial_energy;
    r.terminal_ratio = r.terminal_energy / (sol.phi * r.initial_energy);
  }
  return r;
}

std::vector<LevelEnergy> control_energy_per_level(const StochasticSolver& solver,
                                                  const HumSolution& sol) {
  const ScenarioTree& tree = solver.tree();
  const double hn = solver.mesh().cell_measure(Region::primal());
  const std::size_t n = solver.mesh().count(Region::primal());
  const MeshFn& mask = solver.control_mask();
  std::vector<LevelEnergy> out;
  for (int k = 0; k < tree.steps(); ++k) {
    auto m = sol.adj.m.level(k);
    auto Z = sol.adj.Z.level(k);
    double su = 0.0, sv = 0.0;
    for (std::size_t q = 0; q < m.size(); ++q) {
      su += mask[q % n] * m[q] * m[q];
      sv += Z[q] * Z[q];
    }
    out.push_back({tree.time(k), std::ldexp(su, -k) * hn, std::ldexp(sv, -k) * hn});
  }
  return out;
}

OperatorProbe probe_hum_operator(const StochasticSolver& solver, double phi, std::uint64_t seed,
                                 int probes) {
  if (probes < 1) throw InvalidArgument("operator probes must be at least 1");
  OperatorProbe out;
  out.coercivity_margin = std::numeric_limits<double>::infinity();
  for (int p = 0; p < probes; ++p) {
    std::mt19937_64 rng = stream_rng(seed, Stream::hum_probes, static_cast<std::uint64_t>(p));
    std::normal_distribution<double> N01;
    LeafVector a = zero_leaves(solver), b = zero_leaves(solver);
    for (Eigen::Index q = 0; q < a.size(); ++q) a[q] = N01(rng);
    for (Eigen::Index q = 0; q < b.size(); ++q) b[q] = N01(rng);
    const LeafVector La = hum_operator(solver, a, phi);
    const LeafVector Lb = hum_operator(solver, b, phi);
    const double lab = solver.leaf_inner(La, b);
    const double alb = solver.leaf_inner(a, Lb);
    const double scale = leaf_norm(solver, La) * leaf_norm(solver, b) +
                         leaf_norm(solver, a) * leaf_norm(solver, Lb);
    out.symmetry = std::max(out.symmetry, std::abs(lab - alb) / scale);

    const double aa = solver.leaf_inner(a, a);
    const double laa = solver.leaf_inner(La, a);
    out.coercivity_margin = std::min(out.coercivity_margin, (laa - phi * aa) / (phi * aa));

    const double gram = gram_terms(solver, solver.solve_backward(a)).total();
    out.gram_identity = std::max(out.gram_identity, std::abs((laa - phi * aa) - gram) / laa);
  }
  return out;
}

double gradient_check(const StochasticSolver& solver, const LeafVector& z_T, const MeshFn& y0,
                      double phi, const LeafVector& d, double eps) {
  const double jp = hum_functional(solver, z_T + eps * d, y0, phi);
  const double jm = hum_functional(solver, z_T - eps * d, y0, phi);
  const double fd = (jp - jm) / (2.0 * eps);
  const double an = solver.leaf_inner(hum_gradient(solver, z_T, y0, phi), d);
  return std::abs(fd - an) / std::max(std::abs(an), std::abs(fd));
}

}  // namespace sdlab
