#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "sdlab/mesh.hpp"

namespace sdlab {

using SparseOp = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using ScalarField = std::function<double(std::span<const double>)>;

// Pointwise difference and average operators.
//
// On a primal function (extended by zero on ∂M, or by `boundary_data` on
// ∂_iM when given) they produce a dual(i) function; on a dual(i) function
// they produce a primal function.

MeshFn diff(const MeshFn& f, int axis);
MeshFn diff(const MeshFn& f, int axis, const MeshFn& boundary_data);
MeshFn average(const MeshFn& f, int axis);
MeshFn average(const MeshFn& f, int axis, const MeshFn& boundary_data);

/// Σ_i D_i(γ_i D_i f) for primal f with homogeneous Dirichlet data.
MeshFn laplacian_gamma(const MeshFn& f, std::span<const MeshFn> gamma);

/// Sparse matrix between two regions, with region tags checked on apply.
struct OperatorStencil {
  Region source;
  Region target;
  SparseOp matrix;

  MeshFn apply(const MeshFn& f) const;
};

OperatorStencil difference_stencil(const Mesh& mesh, Region source, int axis);
OperatorStencil average_stencil(const Mesh& mesh, Region source, int axis);

/// Coefficient samples of the drift A y = Σ D_i(γ_i D_i y) + Σ A_i D_i(a_{1i} y) + a_2 y.
struct DriftCoefficients {
  std::vector<MeshFn> gamma;  // gamma[i] on dual(i), positive
  std::vector<MeshFn> a1;     // a1[i] on primal
  MeshFn a2;                  // primal

  static DriftCoefficients heat(const Mesh& mesh);
  void validate(const Mesh& mesh) const;
};

OperatorStencil drift_operator(const Mesh& mesh, const DriftCoefficients& coeffs);

/// max over primal x and axes i of γ_i(x) + 1/γ_i(x) + Σ_j |D_j γ_j(x)|², with
/// γ sampled at primal nodes for the first two terms and D_j γ_j computed from
/// the dual(j) samples.
double reg_gamma(const Mesh& mesh, std::span<const ScalarField> gamma);

}  // namespace sdlab
