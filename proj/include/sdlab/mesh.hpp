#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace sdlab {

inline constexpr int kMaxDim = 6;

enum class RegionKind { primal, dual, boundary };

/// Identifies one of the node sets of the uniform mesh of (0,1)^n:
/// the primal mesh M, the dual mesh M*_i (half-step shifted along axis i),
/// or the boundary ∂_iM (the two faces orthogonal to axis i).
struct Region {
  RegionKind kind = RegionKind::primal;
  int axis = -1;  // unused for primal

  static constexpr Region primal() { return {RegionKind::primal, -1}; }
  static constexpr Region dual(int i) { return {RegionKind::dual, i}; }
  static constexpr Region boundary(int i) { return {RegionKind::boundary, i}; }

  bool operator==(const Region&) const = default;
  std::string name() const;
};

/// Uniform mesh of the unit cube with N interior points per axis, h = 1/(N+1).
///
/// Nodes of every region are ordered lexicographically by their per-axis
/// integer index (axis 0 slowest, axis n-1 fastest). Per-axis indices map to
/// coordinates as follows:
///   primal         j in [0, N)   -> (j+1) h
///   dual, axis i   m in [0, N]   -> (m+1/2) h
///   boundary, i    b in {0, 1}   -> 0 or 1
/// Coordinates are always recomputed from indices.
class Mesh {
 public:
  Mesh(int n, int N);

  int dim() const noexcept { return n_; }
  int points_per_axis() const noexcept { return N_; }
  double h() const noexcept { return h_; }

  /// Number of per-axis indices of `region` along `axis`.
  int extent(Region region, int axis) const;
  std::size_t count(Region region) const;

  /// Coordinate along `axis` of per-axis index `index` in `region`.
  double coordinate(Region region, int axis, int index) const;

  void multi_index(Region region, std::size_t flat, std::span<int> out) const;
  std::size_t flat_index(Region region, std::span<const int> idx) const;

  /// Calls fn(flat, x) for every node of `region` in storage order.
  void for_each_node(Region region,
                     const std::function<void(std::size_t, std::span<const double>)>& fn) const;

  /// Measure factor of the discrete integral: h^n on interior regions,
  /// h^(n-1) on boundary faces.
  double cell_measure(Region region) const;

  bool operator==(const Mesh& o) const { return n_ == o.n_ && N_ == o.N_; }

 private:
  void check_region(Region region) const;

  int n_;
  int N_;
  double h_;
};

inline Mesh build_mesh(int n, int N) { return Mesh(n, N); }

/// Real-valued function on one region of a mesh.
class MeshFn {
 public:
  MeshFn(const Mesh& mesh, Region region);
  MeshFn(const Mesh& mesh, Region region, std::vector<double> values);

  /// Samples f at every node of the region.
  static MeshFn sample(const Mesh& mesh, Region region,
                       const std::function<double(std::span<const double>)>& f);
  static MeshFn constant(const Mesh& mesh, Region region, double c);

  const Mesh& mesh() const noexcept { return mesh_; }
  Region region() const noexcept { return region_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }

  MeshFn& operator+=(const MeshFn& o);
  MeshFn& operator-=(const MeshFn& o);
  MeshFn& operator*=(const MeshFn& o);  // pointwise
  MeshFn& operator*=(double c);

  /// Throws InvalidArgument unless `o` lives on the same mesh and region.
  void require_same_region(const MeshFn& o) const;

 private:
  Mesh mesh_;
  Region region_;
  std::vector<double> values_;
};

MeshFn operator+(MeshFn a, const MeshFn& b);
MeshFn operator-(MeshFn a, const MeshFn& b);
MeshFn operator*(MeshFn a, const MeshFn& b);
MeshFn operator*(double c, MeshFn a);

/// Axis-aligned open box lo < x < hi, used for the control set G_0 and the
/// weight set G_1.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  static Box cube(int n, double lo, double hi);

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(std::span<const double> x) const;
  /// lo < hi per axis and the box lies strictly inside (0,1)^n.
  void validate(int n) const;
  /// True when the closure of this box lies in the open box `outer`.
  bool strictly_inside(const Box& outer) const;
  std::vector<double> center() const;
};

/// Indicator of box ∩ region as a mesh function.
MeshFn indicator(const Mesh& mesh, Region region, const Box& box);

/// ∫ f over the whole region: h^n Σ (interior) or h^(n-1) Σ (boundary).
double integral(const MeshFn& f);
/// ∫ f over region ∩ box.
double integral(const MeshFn& f, const Box& box);

/// Inner product ⟨f, g⟩ on the common region.
double inner(const MeshFn& f, const MeshFn& g);

/// Discrete L^p_h norm; p = +infinity gives the max norm.
double lp_norm(const MeshFn& f, double p);
/// Discrete W^{1,p}_h(M) norm of a primal function extended by zero on ∂M.
double w1p_norm(const MeshFn& f, double p);

enum class NormKind { Lp, W1p };
double norm(const MeshFn& f, double p, NormKind kind);

/// Exterior normal ν_i on ∂_iM (values in {-1, 0, +1}).
MeshFn exterior_normal(const Mesh& mesh, int axis);

/// Trace t_r^i of a dual(i) function: value at the adjacent dual node.
MeshFn trace(const MeshFn& f);

struct NormalTrace {
  MeshFn normal;
  MeshFn trace;
};
NormalTrace normal_and_trace(const MeshFn& f);

}  // namespace sdlab
