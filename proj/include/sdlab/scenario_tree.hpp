#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sdlab/mesh.hpp"

namespace sdlab {

inline constexpr std::size_t kDefaultMemoryBudget = std::size_t{2} << 30;  // 2 GiB

/// Binary discretization of a Brownian filtration on [0, T].
///
/// Level k holds 2^k nodes, each of probability 2^-k. Node j of level k has
/// children 2j (increment +√Δt) and 2j+1 (increment −√Δt), so the binary
/// digits of j, most significant first, are the increment signs along the path.
class ScenarioTree {
 public:
  ScenarioTree(int K, double T);

  int steps() const noexcept { return K_; }
  double horizon() const noexcept { return T_; }
  double dt() const noexcept { return dt_; }
  double sqrt_dt() const noexcept { return sqrt_dt_; }
  double time(int level) const noexcept { return level * dt_; }

  std::size_t nodes_at(int level) const { return std::size_t{1} << level; }
  double weight(int level) const { return std::ldexp(1.0, -level); }
  std::size_t total_nodes() const { return (std::size_t{1} << (K_ + 1)) - 1; }

  /// Increment ΔB on the edge into node j of level k ≥ 1.
  double increment_into(std::size_t j) const { return (j & 1U) ? -sqrt_dt_ : sqrt_dt_; }
  /// Brownian path value B(t_k) at node j of level k.
  double brownian(int level, std::size_t j) const;

 private:
  int K_;
  double T_;
  double dt_;
  double sqrt_dt_;
};

/// A mesh function at every node of levels 0..last_level of a scenario tree.
/// Storage is one contiguous block, node-major in (level, node) order.
class AdaptedProcess {
 public:
  AdaptedProcess(const Mesh& mesh, Region region, int last_level,
                 std::size_t memory_budget = kDefaultMemoryBudget);

  const Mesh& mesh() const noexcept { return mesh_; }
  Region region() const noexcept { return region_; }
  int last_level() const noexcept { return last_level_; }
  std::size_t node_size() const noexcept { return stride_; }

  std::span<double> at(int level, std::size_t j);
  std::span<const double> at(int level, std::size_t j) const;
  /// All nodes of one level, node after node.
  std::span<double> level(int level);
  std::span<const double> level(int level) const;

  MeshFn value(int level, std::size_t j) const;
  void set(int level, std::size_t j, const MeshFn& f);

 private:
  std::size_t offset(int level) const { return ((std::size_t{1} << level) - 1) * stride_; }

  Mesh mesh_;
  Region region_;
  int last_level_;
  std::size_t stride_;
  std::vector<double> data_;
};

/// Σ over level-k nodes of 2^-k · functional(value).
double expectation(const AdaptedProcess& p, int level,
                   const std::function<double(std::span<const double>)>& functional);
double expectation(const AdaptedProcess& p, int level,
                   const std::function<double(const MeshFn&)>& functional);

/// E ∫_M |p_k|² at one level.
double expected_energy(const AdaptedProcess& p, int level);

/// Exact one-step martingale decomposition of the two children of a node:
/// m = (z⁺ + z⁻)/2, Z = (z⁺ − z⁻)/(2√Δt), so that z^± = m ± Z√Δt.
void martingale_parts(std::span<const double> z_plus, std::span<const double> z_minus,
                      double sqrt_dt, std::span<double> m, std::span<double> Z);

}  // namespace sdlab
