#include "sdlab/weights.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>

#include "sdlab/errors.hpp"

namespace sdlab {

void CarlemanParams::validate(double max_psi) const {
  if (!(lambda >= 1.0)) throw InvalidArgument("Carleman lambda must be >= 1");
  if (!(tau >= 1.0)) throw InvalidArgument("Carleman tau must be >= 1");
  if (!(delta > 0.0 && delta < 0.5)) throw InvalidArgument("Carleman delta must lie in (0, 1/2)");
  if (!(T > 0.0)) throw InvalidArgument("time horizon T must be positive");
  if (!(K_psi > max_psi)) {
    throw InvalidArgument("K_psi must exceed max psi = " + std::to_string(max_psi));
  }
}

double theta(double t, double delta, double T) {
  if (!(t >= 0.0 && t <= T)) throw InvalidArgument("theta: t must lie in [0, T]");
  return 1.0 / ((t + delta * T) * (T + delta * T - t));
}

double theta_derivative(double t, double delta, double T) {
  const double th = theta(t, delta, T);
  return 2.0 * (t - 0.5 * T) * th * th;
}

double theta_max(double delta, double T) { return 1.0 / (T * T * delta * (1.0 + delta)); }

double theta_min(double delta, double T) {
  return 4.0 / (T * T * (1.0 + 2.0 * delta) * (1.0 + 2.0 * delta));
}

// ---------------------------------------------------------------------------

WeightField::WeightField(std::vector<double> center, double peak)
    : x0_(std::move(center)), c0_(peak) {}

double WeightField::psi(std::span<const double> x) const {
  double d2 = 0.0;
  for (std::size_t a = 0; a < x0_.size(); ++a) d2 += (x[a] - x0_[a]) * (x[a] - x0_[a]);
  return c0_ - d2;
}

double WeightField::dpsi(std::span<const double> x, int i) const { return -2.0 * (x[i] - x0_[i]); }

double WeightField::grad_norm(std::span<const double> x) const {
  double g = 0.0;
  for (int a = 0; a < dim(); ++a) g += dpsi(x, a) * dpsi(x, a);
  return std::sqrt(g);
}

double WeightField::xi(std::span<const double> x, const CarlemanParams& p) const {
  return std::exp(p.lambda * psi(x));
}

double WeightField::phi(std::span<const double> x, const CarlemanParams& p) const {
  return std::exp(p.lambda * psi(x)) - std::exp(p.lambda * p.K_psi);
}

double WeightField::rho(std::span<const double> x, double s, const CarlemanParams& p) const {
  return std::exp(-s * phi(x, p));
}

double WeightField::r(std::span<const double> x, double s, const CarlemanParams& p) const {
  return std::exp(s * phi(x, p));
}

namespace {

struct PhiDerivs {
  double d_i;
  double d_j;
  double d_ij;
};

PhiDerivs phi_derivs(const WeightField& w, std::span<const double> x, int i, int j,
                     const CarlemanParams& p) {
  const double e = p.lambda * std::exp(p.lambda * w.psi(x));
  const double pi = w.dpsi(x, i);
  const double pj = w.dpsi(x, j);
  return {e * pi, e * pj, e * (p.lambda * pi * pj + w.d2psi(i, j))};
}

}  // namespace

double WeightField::drho(std::span<const double> x, int i, double s,
                         const CarlemanParams& p) const {
  const PhiDerivs d = phi_derivs(*this, x, i, i, p);
  return -s * d.d_i * rho(x, s, p);
}

double WeightField::d2rho(std::span<const double> x, int i, int j, double s,
                          const CarlemanParams& p) const {
  const PhiDerivs d = phi_derivs(*this, x, i, j, p);
  return rho(x, s, p) * (s * s * d.d_i * d.d_j - s * d.d_ij);
}

double WeightField::d_r_drho(std::span<const double> x, int i, int j, double s,
                             const CarlemanParams& p) const {
  // r ∂_j ρ = −s ∂_j φ, so its derivative is −s ∂_i ∂_j φ.
  return -s * phi_derivs(*this, x, i, j, p).d_ij;
}

// ---------------------------------------------------------------------------

PsiReport build_psi(const Mesh& mesh, const Box& g1) {
  g1.validate(mesh.dim());
  std::vector<double> x0 = g1.center();
  for (double c : x0) {
    if (!(c > 0.0 && c < 1.0)) throw InvalidArgument("psi center lies on the boundary");
  }
  PsiReport rep{WeightField(x0, 1.0 + mesh.dim()), std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity()};

  mesh.for_each_node(Region::primal(), [&](std::size_t, std::span<const double> x) {
    if (!g1.contains(x)) rep.grad_margin = std::min(rep.grad_margin, rep.field.grad_norm(x));
  });

  // One-cell layer next to each face: boundary nodes and the first primal layer.
  const double h = mesh.h();
  for (int i = 0; i < mesh.dim(); ++i) {
    auto visit = [&](std::span<const double> x) {
      const double nu = x[i] < 0.5 ? -1.0 : 1.0;
      rep.normal_margin = std::min(rep.normal_margin, -nu * rep.field.dpsi(x, i));
    };
    mesh.for_each_node(Region::boundary(i),
                       [&](std::size_t, std::span<const double> x) { visit(x); });
    mesh.for_each_node(Region::primal(), [&](std::size_t, std::span<const double> x) {
      if (x[i] < 1.5 * h || x[i] > 1.0 - 1.5 * h) visit(x);
    });
  }
  if (!(rep.grad_margin > 0.0)) throw InvalidArgument("psi has a critical point outside G_1");
  if (!(rep.normal_margin > 0.0)) {
    throw InvalidArgument("psi fails the outward normal-derivative condition near the boundary");
  }
  return rep;
}

// ---------------------------------------------------------------------------

double RateReport::min_order() const {
  double m = std::numeric_limits<double>::quiet_NaN();
  for (const RateRow& r : rows) {
    if (std::isnan(r.observed_order)) continue;
    m = std::isnan(m) ? r.observed_order : std::min(m, r.observed_order);
  }
  return m;
}

double RateReport::max_order() const {
  double m = std::numeric_limits<double>::quiet_NaN();
  for (const RateRow& r : rows) {
    if (std::isnan(r.observed_order)) continue;
    m = std::isnan(m) ? r.observed_order : std::max(m, r.observed_order);
  }
  return m;
}

namespace {

using Point = std::array<double, kMaxDim>;
using PointFn = std::function<double(const Point&)>;

struct ShiftOp {
  bool difference;  // D_i when true, A_i otherwise
  int axis;
};

// Applies ops[k] ∘ ops[k+1] ∘ ... to f at x by expanding the half-step shifts.
double apply_ops(const std::vector<ShiftOp>& ops, std::size_t k, const PointFn& f, Point x,
                 double h) {
  if (k == ops.size()) return f(x);
  const ShiftOp op = ops[k];
  const double x_axis = x[op.axis];
  x[op.axis] = x_axis + 0.5 * h;
  const double plus = apply_ops(ops, k + 1, f, x, h);
  x[op.axis] = x_axis - 0.5 * h;
  const double minus = apply_ops(ops, k + 1, f, x, h);
  return op.difference ? (plus - minus) / h : 0.5 * (plus + minus);
}

struct Identity {
  std::string name;
  double s_power;
  std::function<double(const Point&, double h)> discrete;
  std::function<double(const Point&)> continuous;
};

}  // namespace

RateReport verify_weight_rates(int n, int N0, int levels, const WeightField& field,
                               const CarlemanParams& params, double smallness) {
  if (field.dim() != n) throw InvalidArgument("weight field dimension does not match n");
  if (levels < 2) throw InvalidArgument("rate study needs at least two meshes");
  params.validate(field.max_over_cube());
  const double s = params.tau * theta_max(params.delta, params.T);
  const double h0 = 1.0 / (N0 + 1);
  if (s * h0 > smallness) {
    throw InvalidArgument("smallness condition violated: tau*h*max(theta) = " +
                          std::to_string(s * h0) + " > " + std::to_string(smallness) +
                          "; need h <= " + std::to_string(smallness / s));
  }

  const CarlemanParams& p = params;
  auto span_of = [n](const Point& x) { return std::span<const double>(x.data(), n); };
  const PointFn rho = [&](const Point& x) { return field.rho(span_of(x), s, p); };
  auto r_at = [&](const Point& x) { return field.r(span_of(x), s, p); };

  const int i = 0;
  const int j = n > 1 ? 1 : 0;
  std::vector<Identity> ids;

  ids.push_back({"r*A_i^2 rho", 0.0,
                 [&](const Point& x, double h) {
                   return r_at(x) * apply_ops({{false, i}, {false, i}}, 0, rho, x, h);
                 },
                 [&](const Point&) { return 1.0; }});
  ids.push_back({"r*A_iD_i rho", 1.0,
                 [&](const Point& x, double h) {
                   return r_at(x) * apply_ops({{false, i}, {true, i}}, 0, rho, x, h);
                 },
                 [&](const Point& x) { return r_at(x) * field.drho(span_of(x), i, s, p); }});
  ids.push_back({"r*D_i^2 rho", 2.0,
                 [&](const Point& x, double h) {
                   return r_at(x) * apply_ops({{true, i}, {true, i}}, 0, rho, x, h);
                 },
                 [&](const Point& x) { return r_at(x) * field.d2rho(span_of(x), i, i, s, p); }});
  if (n > 1) {
    ids.push_back(
        {"r*D_iD_j rho", 2.0,
         [&](const Point& x, double h) {
           return r_at(x) * apply_ops({{true, i}, {true, j}}, 0, rho, x, h);
         },
         [&](const Point& x) { return r_at(x) * field.d2rho(span_of(x), i, j, s, p); }});
  }
  const PointFn drho_j = [&](const Point& x) { return field.drho(span_of(x), j, s, p); };
  ids.push_back({"r*A_iD_i d_j rho", 2.0,
                 [&](const Point& x, double h) {
                   return r_at(x) * apply_ops({{false, i}, {true, i}}, 0, drho_j, x, h);
                 },
                 [&](const Point& x) { return r_at(x) * field.d2rho(span_of(x), i, j, s, p); }});
  ids.push_back({"r^2*(A_iD_i rho)(A_jD_j rho)", 2.0,
                 [&](const Point& x, double h) {
                   const double r = r_at(x);
                   return r * r * apply_ops({{false, i}, {true, i}}, 0, rho, x, h) *
                          apply_ops({{false, j}, {true, j}}, 0, rho, x, h);
                 },
                 [&](const Point& x) {
                   const double r = r_at(x);
                   return r * r * field.drho(span_of(x), i, s, p) * field.drho(span_of(x), j, s, p);
                 }});
  ids.push_back({"A_iD_i(r*A_jD_j rho)", 1.0,
                 [&](const Point& x, double h) {
                   const PointFn inner = [&, h](const Point& y) {
                     return r_at(y) * apply_ops({{false, j}, {true, j}}, 0, rho, y, h);
                   };
                   return apply_ops({{false, i}, {true, i}}, 0, inner, x, h);
                 },
                 [&](const Point& x) { return field.d_r_drho(span_of(x), i, j, s, p); }});

  RateReport rep;
  std::vector<double> prev(ids.size(), std::numeric_limits<double>::quiet_NaN());
  int N = N0;
  for (int level = 0; level < levels; ++level) {
    const Mesh mesh(n, N);
    const double h = mesh.h();
    for (std::size_t id = 0; id < ids.size(); ++id) {
      double err = 0.0;
      mesh.for_each_node(Region::primal(), [&](std::size_t, std::span<const double> xs) {
        Point x{};
        std::copy(xs.begin(), xs.end(), x.begin());
        err = std::max(err, std::abs(ids[id].discrete(x, h) - ids[id].continuous(x)));
      });
      err /= std::pow(s, ids[id].s_power);
      const double order = std::isnan(prev[id]) ? std::numeric_limits<double>::quiet_NaN()
                                                : std::log2(prev[id] / err);
      rep.rows.push_back({ids[id].name, h, err, order});
      prev[id] = err;
    }
    N = 2 * N + 1;
  }
  return rep;
}

}  // namespace sdlab
