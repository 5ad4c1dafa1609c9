#include "sdlab/counterexample.hpp"

#include <cmath>
#include <limits>

#include "sdlab/errors.hpp"

namespace sdlab {

CheckerboardMode build_checkerboard(const Mesh& mesh) {
  if (mesh.dim() != 2) throw InvalidArgument("the checkerboard mode is defined for n = 2 only");
  MeshFn psi(mesh, Region::primal());
  std::array<int, kMaxDim> idx{};
  for (std::size_t k = 0; k < psi.size(); ++k) {
    mesh.multi_index(Region::primal(), k, idx);
    if (idx[0] == idx[1]) psi[k] = ((idx[0] + 1) % 2 == 0) ? 1.0 : -1.0;
  }
  const double h = mesh.h();
  return {mesh, std::move(psi), -4.0 / (h * h)};
}

double verify_eigen(const CheckerboardMode& mode) {
  const Mesh& m = mode.mesh;
  MeshFn lap(m, Region::primal());
  for (int i = 0; i < m.dim(); ++i) lap += diff(diff(mode.psi, i), i);
  double r = 0.0;
  for (std::size_t k = 0; k < lap.size(); ++k) {
    r = std::max(r, std::abs(lap[k] - mode.eigenvalue * mode.psi[k]));
  }
  return r;
}

void require_off_diagonal(const Mesh& mesh, const Box& g0) {
  if (mesh.dim() != 2) throw InvalidArgument("the checkerboard experiment needs n = 2");
  g0.validate(2);
  std::array<int, kMaxDim> idx{};
  mesh.for_each_node(Region::primal(), [&](std::size_t k, std::span<const double> x) {
    if (!g0.contains(x)) return;
    mesh.multi_index(Region::primal(), k, idx);
    if (idx[0] == idx[1]) {
      throw InvalidArgument("G_0 contains the diagonal node (" + std::to_string(idx[0] + 1) + ", " +
                            std::to_string(idx[1] + 1) +
                            "); choose a box whose x- and y-ranges do not overlap");
    }
  });
}

double mode_step_factor(const StochasticSolver& solver) {
  const double h = solver.mesh().h();
  const double r = 4.0 * solver.tree().dt() / (h * h);
  return solver.options().scheme == TimeScheme::explicit_euler ? 1.0 - r : 1.0 / (1.0 + r);
}

namespace {

void require_heat(const StochasticSolver& solver) {
  const Coefficients& c = solver.coefficients();
  auto all = [](const MeshFn& f, double v) {
    for (double x : f.values()) {
      if (x != v) return false;
    }
    return true;
  };
  bool ok = all(c.drift.a2, 0.0) && all(c.a3, 0.0);
  for (int i = 0; i < solver.mesh().dim(); ++i) {
    ok = ok && all(c.drift.gamma[i], 1.0) && all(c.drift.a1[i], 0.0);
  }
  if (!ok) throw InvalidArgument("the checkerboard experiment needs gamma = 1 and a1 = a2 = a3 = 0");
}

}  // namespace

ModeExperiment uncontrollable_mode_experiment(const StochasticSolver& solver,
                                              const CheckerboardMode& mode, const MeshFn& y0,
                                              const ControlPair& ctl, const Box& g0) {
  require_heat(solver);
  require_off_diagonal(solver.mesh(), g0);
  const AdaptedProcess y = solver.solve_forward(y0, ctl);
  const int K = solver.tree().steps();
  ModeExperiment out;
  out.measured = expectation(y, K, std::function<double(std::span<const double>)>(
                                       [&](std::span<const double> v) {
                                         double s = 0.0;
                                         for (std::size_t q = 0; q < v.size(); ++q) {
                                           s += mode.psi[q] * v[q];
                                         }
                                         return s;
                                       })) *
                 solver.mesh().cell_measure(Region::primal());
  out.predicted = std::pow(mode_step_factor(solver), K) * inner(mode.psi, y0);
  const double scale = std::max(std::abs(out.predicted), std::numeric_limits<double>::min());
  out.deviation = std::abs(out.measured - out.predicted) / scale;
  return out;
}

std::vector<FactorRow> factor_convergence(double h, double T, long K0, int levels) {
  if (!(h > 0.0) || !(T > 0.0) || K0 < 1 || levels < 1) {
    throw InvalidArgument("factor_convergence needs h, T > 0, K0 >= 1 and levels >= 1");
  }
  if (4.0 * T / (h * h) >= static_cast<double>(K0)) {
    throw InvalidArgument("K0 too small: 1 - 4 dt/h^2 must be positive, need K0 > " +
                          std::to_string(4.0 * T / (h * h)));
  }
  const double a = 4.0 * T / (h * h);
  const double cont = std::exp(-a);
  std::vector<FactorRow> rows;
  long K = K0;
  for (int l = 0; l < levels; ++l, K *= 2) {
    // (1 − a/K)^K through log1p keeps full relative accuracy for large K
    const double disc = std::exp(static_cast<double>(K) * std::log1p(-a / static_cast<double>(K)));
    FactorRow r{K, disc, cont, std::abs(disc - cont) / cont,
                std::numeric_limits<double>::quiet_NaN()};
    if (!rows.empty()) r.observed_order = std::log2(rows.back().relative_error / r.relative_error);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace sdlab
