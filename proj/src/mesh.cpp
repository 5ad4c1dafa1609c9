#include "sdlab/mesh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "sdlab/errors.hpp"

namespace sdlab {

std::string Region::name() const {
  switch (kind) {
    case RegionKind::primal:
      return "primal";
    case RegionKind::dual:
      return "dual(" + std::to_string(axis) + ")";
    case RegionKind::boundary:
      return "boundary(" + std::to_string(axis) + ")";
  }
  return "?";
}

Mesh::Mesh(int n, int N) : n_(n), N_(N), h_(1.0 / (N + 1)) {
  if (n < 1 || n > kMaxDim) {
    throw InvalidArgument("mesh dimension must be in [1, " + std::to_string(kMaxDim) +
                          "], got " + std::to_string(n));
  }
  if (N < 1) throw InvalidArgument("mesh needs N >= 1 interior points, got " + std::to_string(N));
}

void Mesh::check_region(Region region) const {
  if (region.kind != RegionKind::primal && (region.axis < 0 || region.axis >= n_)) {
    throw InvalidArgument("region axis " + std::to_string(region.axis) + " out of range for n=" +
                          std::to_string(n_));
  }
}

int Mesh::extent(Region region, int axis) const {
  check_region(region);
  if (region.kind == RegionKind::primal || axis != region.axis) return N_;
  return region.kind == RegionKind::dual ? N_ + 1 : 2;
}

std::size_t Mesh::count(Region region) const {
  std::size_t c = 1;
  for (int a = 0; a < n_; ++a) c *= static_cast<std::size_t>(extent(region, a));
  return c;
}

double Mesh::coordinate(Region region, int axis, int index) const {
  if (region.kind == RegionKind::primal || axis != region.axis) return (index + 1) * h_;
  if (region.kind == RegionKind::dual) return (index + 0.5) * h_;
  return index == 0 ? 0.0 : 1.0;
}

void Mesh::multi_index(Region region, std::size_t flat, std::span<int> out) const {
  for (int a = n_ - 1; a >= 0; --a) {
    const auto e = static_cast<std::size_t>(extent(region, a));
    out[a] = static_cast<int>(flat % e);
    flat /= e;
  }
}

std::size_t Mesh::flat_index(Region region, std::span<const int> idx) const {
  std::size_t flat = 0;
  for (int a = 0; a < n_; ++a) {
    flat = flat * static_cast<std::size_t>(extent(region, a)) + static_cast<std::size_t>(idx[a]);
  }
  return flat;
}

void Mesh::for_each_node(
    Region region, const std::function<void(std::size_t, std::span<const double>)>& fn) const {
  check_region(region);
  std::array<int, kMaxDim> idx{};
  std::array<int, kMaxDim> ext{};
  std::array<double, kMaxDim> x{};
  for (int a = 0; a < n_; ++a) {
    ext[a] = extent(region, a);
    x[a] = coordinate(region, a, 0);
  }
  const std::size_t total = count(region);
  for (std::size_t flat = 0; flat < total; ++flat) {
    fn(flat, std::span<const double>(x.data(), static_cast<std::size_t>(n_)));
    for (int a = n_ - 1; a >= 0; --a) {
      if (++idx[a] < ext[a]) {
        x[a] = coordinate(region, a, idx[a]);
        break;
      }
      idx[a] = 0;
      x[a] = coordinate(region, a, 0);
    }
  }
}

double Mesh::cell_measure(Region region) const {
  return std::pow(h_, region.kind == RegionKind::boundary ? n_ - 1 : n_);
}

// ---------------------------------------------------------------------------

MeshFn::MeshFn(const Mesh& mesh, Region region)
    : mesh_(mesh), region_(region), values_(mesh.count(region), 0.0) {}

MeshFn::MeshFn(const Mesh& mesh, Region region, std::vector<double> values)
    : mesh_(mesh), region_(region), values_(std::move(values)) {
  if (values_.size() != mesh_.count(region_)) {
    throw InvalidArgument("MeshFn on " + region_.name() + " needs " +
                          std::to_string(mesh_.count(region_)) + " values, got " +
                          std::to_string(values_.size()));
  }
}

MeshFn MeshFn::sample(const Mesh& mesh, Region region,
                      const std::function<double(std::span<const double>)>& f) {
  MeshFn out(mesh, region);
  mesh.for_each_node(region, [&](std::size_t k, std::span<const double> x) { out[k] = f(x); });
  return out;
}

MeshFn MeshFn::constant(const Mesh& mesh, Region region, double c) {
  MeshFn out(mesh, region);
  std::fill(out.values_.begin(), out.values_.end(), c);
  return out;
}

void MeshFn::require_same_region(const MeshFn& o) const {
  if (!(mesh_ == o.mesh_) || !(region_ == o.region_)) {
    throw InvalidArgument("mesh function region mismatch: " + region_.name() + " vs " +
                          o.region_.name());
  }
}

MeshFn& MeshFn::operator+=(const MeshFn& o) {
  require_same_region(o);
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
  return *this;
}

MeshFn& MeshFn::operator-=(const MeshFn& o) {
  require_same_region(o);
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
  return *this;
}

MeshFn& MeshFn::operator*=(const MeshFn& o) {
  require_same_region(o);
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] *= o.values_[k];
  return *this;
}

MeshFn& MeshFn::operator*=(double c) {
  for (double& v : values_) v *= c;
  return *this;
}

MeshFn operator+(MeshFn a, const MeshFn& b) { return a += b; }
MeshFn operator-(MeshFn a, const MeshFn& b) { return a -= b; }
MeshFn operator*(MeshFn a, const MeshFn& b) { return a *= b; }
MeshFn operator*(double c, MeshFn a) { return a *= c; }

// ---------------------------------------------------------------------------

Box Box::cube(int n, double lo, double hi) {
  return Box{std::vector<double>(static_cast<std::size_t>(n), lo),
             std::vector<double>(static_cast<std::size_t>(n), hi)};
}

bool Box::contains(std::span<const double> x) const {
  for (std::size_t a = 0; a < lo.size(); ++a) {
    if (!(x[a] > lo[a] && x[a] < hi[a])) return false;
  }
  return true;
}

void Box::validate(int n) const {
  if (static_cast<int>(lo.size()) != n || static_cast<int>(hi.size()) != n) {
    throw InvalidArgument("box has dimension " + std::to_string(lo.size()) + ", mesh has " +
                          std::to_string(n));
  }
  for (int a = 0; a < n; ++a) {
    if (!(lo[a] < hi[a])) throw InvalidArgument("box needs lo < hi on axis " + std::to_string(a));
    if (!(lo[a] >= 0.0 && hi[a] <= 1.0)) {
      throw InvalidArgument("box must lie inside the unit cube on axis " + std::to_string(a));
    }
  }
}

bool Box::strictly_inside(const Box& outer) const {
  if (outer.lo.size() != lo.size()) return false;
  for (std::size_t a = 0; a < lo.size(); ++a) {
    if (!(lo[a] > outer.lo[a] && hi[a] < outer.hi[a])) return false;
  }
  return true;
}

std::vector<double> Box::center() const {
  std::vector<double> c(lo.size());
  for (std::size_t a = 0; a < lo.size(); ++a) c[a] = 0.5 * (lo[a] + hi[a]);
  return c;
}

MeshFn indicator(const Mesh& mesh, Region region, const Box& box) {
  box.validate(mesh.dim());
  return MeshFn::sample(mesh, region,
                        [&](std::span<const double> x) { return box.contains(x) ? 1.0 : 0.0; });
}

double integral(const MeshFn& f) {
  double s = 0.0;
  for (double v : f.values()) s += v;
  return f.mesh().cell_measure(f.region()) * s;
}

double integral(const MeshFn& f, const Box& box) {
  box.validate(f.mesh().dim());
  double s = 0.0;
  f.mesh().for_each_node(f.region(), [&](std::size_t k, std::span<const double> x) {
    if (box.contains(x)) s += f[k];
  });
  return f.mesh().cell_measure(f.region()) * s;
}

double inner(const MeshFn& f, const MeshFn& g) {
  f.require_same_region(g);
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) s += f[k] * g[k];
  return f.mesh().cell_measure(f.region()) * s;
}

namespace {

void check_p(double p) {
  if (!(p >= 1.0)) throw InvalidArgument("norm exponent must satisfy p >= 1 or p = inf");
}

double sum_abs_pow(std::span<const double> v, double p) {
  double s = 0.0;
  if (p == 1.0) {
    for (double x : v) s += std::abs(x);
  } else if (p == 2.0) {
    for (double x : v) s += x * x;
  } else {
    for (double x : v) s += std::pow(std::abs(x), p);
  }
  return s;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// D_i of a zero-extended primal function, on dual(i). Duplicated from the
// calculus module so that norms stay independent of the operator code.
std::vector<double> dual_difference(const MeshFn& f, int axis) {
  const Mesh& mesh = f.mesh();
  const Region dual = Region::dual(axis);
  std::vector<double> out(mesh.count(dual));
  std::array<int, kMaxDim> idx{};
  const int N = mesh.points_per_axis();
  for (std::size_t k = 0; k < out.size(); ++k) {
    mesh.multi_index(dual, k, idx);
    const int m = idx[axis];
    double right = 0.0, left = 0.0;
    if (m < N) {
      idx[axis] = m;
      right = f[mesh.flat_index(Region::primal(), idx)];
    }
    if (m > 0) {
      idx[axis] = m - 1;
      left = f[mesh.flat_index(Region::primal(), idx)];
    }
    out[k] = (right - left) / mesh.h();
  }
  return out;
}

}  // namespace

double lp_norm(const MeshFn& f, double p) {
  check_p(p);
  if (std::isinf(p)) return max_abs(f.values());
  return std::pow(f.mesh().cell_measure(f.region()) * sum_abs_pow(f.values(), p), 1.0 / p);
}

double w1p_norm(const MeshFn& f, double p) {
  check_p(p);
  if (f.region().kind != RegionKind::primal) {
    throw InvalidArgument("W^{1,p} norm is defined for primal functions");
  }
  const Mesh& mesh = f.mesh();
  if (std::isinf(p)) {
    double dmax = 0.0;
    for (int i = 0; i < mesh.dim(); ++i) dmax = std::max(dmax, max_abs(dual_difference(f, i)));
    return max_abs(f.values()) + dmax;
  }
  const double hn = mesh.cell_measure(Region::primal());
  double total = hn * sum_abs_pow(f.values(), p);
  for (int i = 0; i < mesh.dim(); ++i) total += hn * sum_abs_pow(dual_difference(f, i), p);
  return std::pow(total, 1.0 / p);
}

double norm(const MeshFn& f, double p, NormKind kind) {
  return kind == NormKind::Lp ? lp_norm(f, p) : w1p_norm(f, p);
}

MeshFn exterior_normal(const Mesh& mesh, int axis) {
  const Region bnd = Region::boundary(axis);
  MeshFn nu(mesh, bnd);
  std::array<int, kMaxDim> idx{};
  for (std::size_t k = 0; k < nu.size(); ++k) {
    mesh.multi_index(bnd, k, idx);
    // x_i = 0: τ_{-i}x is outside M*_i and τ_{+i}x inside, so ν = -1; x_i = 1 mirrors it.
    nu[k] = idx[axis] == 0 ? -1.0 : 1.0;
  }
  return nu;
}

MeshFn trace(const MeshFn& f) {
  if (f.region().kind != RegionKind::dual) {
    throw InvalidArgument("trace is defined for dual-mesh functions, got " + f.region().name());
  }
  const Mesh& mesh = f.mesh();
  const int axis = f.region().axis;
  const Region bnd = Region::boundary(axis);
  MeshFn out(mesh, bnd);
  std::array<int, kMaxDim> idx{};
  for (std::size_t k = 0; k < out.size(); ++k) {
    mesh.multi_index(bnd, k, idx);
    idx[axis] = idx[axis] == 0 ? 0 : mesh.points_per_axis();
    out[k] = f[mesh.flat_index(f.region(), idx)];
  }
  return out;
}

NormalTrace normal_and_trace(const MeshFn& f) {
  MeshFn tr = trace(f);
  return {exterior_normal(f.mesh(), f.region().axis), std::move(tr)};
}

}  // namespace sdlab
