#include "sdlab/calculus.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "sdlab/errors.hpp"

namespace sdlab {

namespace {

void check_axis(const Mesh& mesh, int axis) {
  if (axis < 0 || axis >= mesh.dim()) {
    throw InvalidArgument("axis " + std::to_string(axis) + " out of range for n=" +
                          std::to_string(mesh.dim()));
  }
}

// Shared kernel for D_i and A_i: out = (c_plus * τ_{+i}f + c_minus * τ_{-i}f).
MeshFn shift_combine(const MeshFn& f, int axis, const MeshFn* boundary, double c_plus,
                     double c_minus) {
  const Mesh& mesh = f.mesh();
  check_axis(mesh, axis);
  const int N = mesh.points_per_axis();
  std::array<int, kMaxDim> idx{};

  if (f.region().kind == RegionKind::primal) {
    if (boundary != nullptr && !(boundary->mesh() == mesh &&
                                 boundary->region() == Region::boundary(axis))) {
      throw InvalidArgument("boundary data must live on " + Region::boundary(axis).name());
    }
    const Region dual = Region::dual(axis);
    MeshFn out(mesh, dual);
    for (std::size_t k = 0; k < out.size(); ++k) {
      mesh.multi_index(dual, k, idx);
      const int m = idx[axis];
      double right = 0.0, left = 0.0;
      if (m < N) {
        idx[axis] = m;
        right = f[mesh.flat_index(Region::primal(), idx)];
      } else if (boundary != nullptr) {
        idx[axis] = 1;
        right = (*boundary)[mesh.flat_index(Region::boundary(axis), idx)];
      }
      if (m > 0) {
        idx[axis] = m - 1;
        left = f[mesh.flat_index(Region::primal(), idx)];
      } else if (boundary != nullptr) {
        idx[axis] = 0;
        left = (*boundary)[mesh.flat_index(Region::boundary(axis), idx)];
      }
      out[k] = c_plus * right + c_minus * left;
    }
    return out;
  }

  if (f.region() == Region::dual(axis)) {
    if (boundary != nullptr) throw InvalidArgument("boundary data only applies to primal input");
    MeshFn out(mesh, Region::primal());
    for (std::size_t k = 0; k < out.size(); ++k) {
      mesh.multi_index(Region::primal(), k, idx);
      const int j = idx[axis];
      idx[axis] = j + 1;
      const double right = f[mesh.flat_index(f.region(), idx)];
      idx[axis] = j;
      const double left = f[mesh.flat_index(f.region(), idx)];
      out[k] = c_plus * right + c_minus * left;
    }
    return out;
  }

  throw InvalidArgument("operator along axis " + std::to_string(axis) +
                        " cannot act on a function on " + f.region().name());
}

}  // namespace

MeshFn diff(const MeshFn& f, int axis) {
  const double inv_h = 1.0 / f.mesh().h();
  return shift_combine(f, axis, nullptr, inv_h, -inv_h);
}

MeshFn diff(const MeshFn& f, int axis, const MeshFn& boundary_data) {
  const double inv_h = 1.0 / f.mesh().h();
  return shift_combine(f, axis, &boundary_data, inv_h, -inv_h);
}

MeshFn average(const MeshFn& f, int axis) { return shift_combine(f, axis, nullptr, 0.5, 0.5); }

MeshFn average(const MeshFn& f, int axis, const MeshFn& boundary_data) {
  return shift_combine(f, axis, &boundary_data, 0.5, 0.5);
}

MeshFn laplacian_gamma(const MeshFn& f, std::span<const MeshFn> gamma) {
  const Mesh& mesh = f.mesh();
  if (f.region().kind != RegionKind::primal) {
    throw InvalidArgument("laplacian_gamma acts on primal functions");
  }
  if (static_cast<int>(gamma.size()) != mesh.dim()) {
    throw InvalidArgument("need one diffusion coefficient per axis");
  }
  MeshFn out(mesh, Region::primal());
  for (int i = 0; i < mesh.dim(); ++i) {
    if (!(gamma[i].region() == Region::dual(i))) {
      throw InvalidArgument("gamma[" + std::to_string(i) + "] must live on dual(" +
                            std::to_string(i) + ")");
    }
    for (double g : gamma[i].values()) {
      if (!(g > 0.0)) throw InvalidArgument("diffusion coefficient must be positive");
    }
    out += diff(gamma[i] * diff(f, i), i);
  }
  return out;
}

// ---------------------------------------------------------------------------

MeshFn OperatorStencil::apply(const MeshFn& f) const {
  if (!(f.region() == source)) {
    throw InvalidArgument("stencil expects " + source.name() + " input, got " + f.region().name());
  }
  MeshFn out(f.mesh(), target);
  Eigen::Map<const Eigen::VectorXd> x(f.values().data(), static_cast<Eigen::Index>(f.size()));
  Eigen::Map<Eigen::VectorXd> y(out.values().data(), static_cast<Eigen::Index>(out.size()));
  y.noalias() = matrix * x;
  return out;
}

namespace {

OperatorStencil shift_stencil(const Mesh& mesh, Region source, int axis, double c_plus,
                              double c_minus) {
  check_axis(mesh, axis);
  const int N = mesh.points_per_axis();
  std::array<int, kMaxDim> idx{};
  std::vector<Eigen::Triplet<double>> trip;
  OperatorStencil st;
  st.source = source;

  if (source.kind == RegionKind::primal) {
    st.target = Region::dual(axis);
    const std::size_t rows = mesh.count(st.target);
    trip.reserve(2 * rows);
    for (std::size_t r = 0; r < rows; ++r) {
      mesh.multi_index(st.target, r, idx);
      const int m = idx[axis];
      if (m < N) {
        idx[axis] = m;
        trip.emplace_back(r, mesh.flat_index(source, idx), c_plus);
      }
      if (m > 0) {
        idx[axis] = m - 1;
        trip.emplace_back(r, mesh.flat_index(source, idx), c_minus);
      }
    }
  } else if (source == Region::dual(axis)) {
    st.target = Region::primal();
    const std::size_t rows = mesh.count(st.target);
    trip.reserve(2 * rows);
    for (std::size_t r = 0; r < rows; ++r) {
      mesh.multi_index(st.target, r, idx);
      const int j = idx[axis];
      idx[axis] = j + 1;
      trip.emplace_back(r, mesh.flat_index(source, idx), c_plus);
      idx[axis] = j;
      trip.emplace_back(r, mesh.flat_index(source, idx), c_minus);
    }
  } else {
    throw InvalidArgument("no stencil along axis " + std::to_string(axis) + " from " +
                          source.name());
  }
  st.matrix.resize(static_cast<Eigen::Index>(mesh.count(st.target)),
                   static_cast<Eigen::Index>(mesh.count(source)));
  st.matrix.setFromTriplets(trip.begin(), trip.end());
  return st;
}

SparseOp diagonal(const MeshFn& f) {
  SparseOp d(static_cast<Eigen::Index>(f.size()), static_cast<Eigen::Index>(f.size()));
  d.reserve(Eigen::VectorXi::Constant(static_cast<Eigen::Index>(f.size()), 1));
  for (std::size_t k = 0; k < f.size(); ++k) d.insert(k, k) = f[k];
  d.makeCompressed();
  return d;
}

}  // namespace

OperatorStencil difference_stencil(const Mesh& mesh, Region source, int axis) {
  const double inv_h = 1.0 / mesh.h();
  return shift_stencil(mesh, source, axis, inv_h, -inv_h);
}

OperatorStencil average_stencil(const Mesh& mesh, Region source, int axis) {
  return shift_stencil(mesh, source, axis, 0.5, 0.5);
}

DriftCoefficients DriftCoefficients::heat(const Mesh& mesh) {
  DriftCoefficients c{{}, {}, MeshFn(mesh, Region::primal())};
  for (int i = 0; i < mesh.dim(); ++i) {
    c.gamma.push_back(MeshFn::constant(mesh, Region::dual(i), 1.0));
    c.a1.emplace_back(mesh, Region::primal());
  }
  return c;
}

void DriftCoefficients::validate(const Mesh& mesh) const {
  if (static_cast<int>(gamma.size()) != mesh.dim() || static_cast<int>(a1.size()) != mesh.dim()) {
    throw InvalidArgument("drift coefficients need one gamma and one a1 per axis");
  }
  for (int i = 0; i < mesh.dim(); ++i) {
    if (!(gamma[i].mesh() == mesh) || !(gamma[i].region() == Region::dual(i))) {
      throw InvalidArgument("gamma[" + std::to_string(i) + "] must live on dual(" +
                            std::to_string(i) + ")");
    }
    for (double g : gamma[i].values()) {
      if (!(g > 0.0)) throw InvalidArgument("diffusion coefficient must be positive");
    }
    if (!(a1[i].mesh() == mesh) || !(a1[i].region() == Region::primal())) {
      throw InvalidArgument("a1[" + std::to_string(i) + "] must live on the primal mesh");
    }
  }
  if (!(a2.mesh() == mesh) || !(a2.region() == Region::primal())) {
    throw InvalidArgument("a2 must live on the primal mesh");
  }
}

OperatorStencil drift_operator(const Mesh& mesh, const DriftCoefficients& coeffs) {
  coeffs.validate(mesh);
  SparseOp A = diagonal(coeffs.a2);
  for (int i = 0; i < mesh.dim(); ++i) {
    const SparseOp d_to_dual = difference_stencil(mesh, Region::primal(), i).matrix;
    const SparseOp d_to_primal = difference_stencil(mesh, Region::dual(i), i).matrix;
    const SparseOp a_to_primal = average_stencil(mesh, Region::dual(i), i).matrix;
    SparseOp diffusion = d_to_primal * diagonal(coeffs.gamma[i]) * d_to_dual;
    SparseOp advection = a_to_primal * d_to_dual * diagonal(coeffs.a1[i]);
    A += diffusion;
    A += advection;
  }
  A.prune(0.0);
  A.makeCompressed();
  return {Region::primal(), Region::primal(), std::move(A)};
}

double reg_gamma(const Mesh& mesh, std::span<const ScalarField> gamma) {
  if (static_cast<int>(gamma.size()) != mesh.dim()) {
    throw InvalidArgument("need one diffusion coefficient per axis");
  }
  std::vector<MeshFn> on_primal;
  MeshFn grad_sq(mesh, Region::primal());
  for (int i = 0; i < mesh.dim(); ++i) {
    MeshFn dual = MeshFn::sample(mesh, Region::dual(i), gamma[i]);
    MeshFn prim = MeshFn::sample(mesh, Region::primal(), gamma[i]);
    for (double g : dual.values()) {
      if (!(g > 0.0)) throw InvalidArgument("diffusion coefficient must be positive");
    }
    for (double g : prim.values()) {
      if (!(g > 0.0)) throw InvalidArgument("diffusion coefficient must be positive");
    }
    const MeshFn dg = diff(dual, i);
    grad_sq += dg * dg;
    on_primal.push_back(std::move(prim));
  }
  double reg = 0.0;
  for (std::size_t k = 0; k < grad_sq.size(); ++k) {
    for (const MeshFn& g : on_primal) reg = std::max(reg, g[k] + 1.0 / g[k] + grad_sq[k]);
  }
  return reg;
}

}  // namespace sdlab
