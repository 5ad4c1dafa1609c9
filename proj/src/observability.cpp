#include "sdlab/observability.hpp"

#include <cmath>
#include <random>

#include "sdlab/errors.hpp"
#include "sdlab/rng.hpp"

namespace sdlab {

ObservabilityForms observability_forms(const StochasticSolver& solver, const LeafVector& z_T,
                                       double phi) {
  if (!(phi > 0.0)) throw InvalidArgument("phi(h) must be positive");
  const BackwardPair adj = solver.solve_backward(z_T);
  const MeshFn z0 = adj.z.value(0, 0);
  const GramTerms g = gram_terms(solver, adj);
  return {integral(z0 * z0), g.martingale, g.observation, phi * solver.leaf_inner(z_T, z_T)};
}

double observability_ratio(const StochasticSolver& solver, const LeafVector& z_T, double phi) {
  if (z_T.cwiseAbs().maxCoeff() == 0.0) throw InvalidArgument("terminal datum z_T is zero");
  return observability_forms(solver, z_T, phi).ratio();
}

double denominator_form(const StochasticSolver& solver, const LeafVector& a, const LeafVector& b,
                        double phi) {
  const BackwardPair pa = solver.solve_backward(a);
  const BackwardPair pb = solver.solve_backward(b);
  const ScenarioTree& tree = solver.tree();
  const std::size_t n = solver.mesh().count(Region::primal());
  const MeshFn& mask = solver.control_mask();
  double s = 0.0;
  for (int k = 0; k < tree.steps(); ++k) {
    auto Za = pa.Z.level(k), Zb = pb.Z.level(k);
    auto ma = pa.m.level(k), mb = pb.m.level(k);
    double lvl = 0.0;
    for (std::size_t q = 0; q < Za.size(); ++q) {
      lvl += Za[q] * Zb[q] + mask[q % n] * ma[q] * mb[q];
    }
    s += std::ldexp(lvl, -k);
  }
  return s * tree.dt() * solver.mesh().cell_measure(Region::primal()) +
         phi * solver.leaf_inner(a, b);
}

namespace {

LeafVector random_leaves(const StochasticSolver& solver, std::mt19937_64& rng) {
  std::normal_distribution<double> N01;
  LeafVector v(static_cast<Eigen::Index>(solver.leaf_size()));
  for (Eigen::Index q = 0; q < v.size(); ++q) v[q] = N01(rng);
  return v;
}

}  // namespace

double polarization_defect(const StochasticSolver& solver, double phi, std::uint64_t seed,
                           int pairs) {
  double worst = 0.0;
  for (int p = 0; p < pairs; ++p) {
    std::mt19937_64 rng =
        stream_rng(seed, Stream::observability_probes, 1'000'000 + static_cast<std::uint64_t>(p));
    const LeafVector a = random_leaves(solver, rng);
    const LeafVector b = random_leaves(solver, rng);
    const double dab = denominator_form(solver, a, b, phi);
    const double dba = denominator_form(solver, b, a, phi);
    const double dp = denominator_form(solver, a + b, a + b, phi);
    const double dm = denominator_form(solver, a - b, a - b, phi);
    const double scale = std::abs(dp) + std::abs(dm);
    worst = std::max({worst, std::abs(4.0 * dab - (dp - dm)) / scale, std::abs(dab - dba) / scale});
  }
  return worst;
}

ObservabilityEstimate estimate_constant(const StochasticSolver& solver, double phi, int probes,
                                        int ascent_steps, std::uint64_t seed, double inner_tol) {
  if (probes < 1) throw InvalidArgument("observability estimate needs at least one probe");
  if (ascent_steps < 0) throw InvalidArgument("ascent steps must be nonnegative");
  ObservabilityEstimate est;
  est.h = solver.mesh().h();
  est.phi = phi;
  est.probes = probes;
  est.ascent_steps = ascent_steps;

  const InnerProduct dot = [&](const KrylovVector& a, const KrylovVector& b) {
    return solver.leaf_inner(a, b);
  };
  const LinearMap den = [&](const KrylovVector& d) { return hum_operator(solver, d, phi); };

  for (int p = 0; p < probes; ++p) {
    std::mt19937_64 rng = stream_rng(seed, Stream::observability_probes, static_cast<std::uint64_t>(p));
    LeafVector z = random_leaves(solver, rng);
    double best = observability_ratio(solver, z, phi);
    for (int step = 0; step < ascent_steps; ++step) {
      const MeshFn z0 = solver.solve_backward(z).z.value(0, 0);
      const LeafVector num = solver.leaves(solver.solve_forward(z0));
      const KrylovResult kr = conjugate_residual(den, num, dot, inner_tol, 400);
      const double nrm = std::sqrt(solver.leaf_inner(kr.x, kr.x));
      if (!(nrm > 0.0)) break;
      z = kr.x / nrm;
      best = std::max(best, observability_ratio(solver, z, phi));
    }
    est.probe_ratios.push_back(best);
    if (best > est.c_est) {
      est.c_est = best;
      est.best_probe = p;
    }
  }
  return est;
}

}  // namespace sdlab
