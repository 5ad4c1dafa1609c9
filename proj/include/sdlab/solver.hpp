#pragma once

#include <memory>
#include <span>

#include <Eigen/Core>

#include "sdlab/calculus.hpp"
#include "sdlab/mesh.hpp"
#include "sdlab/scenario_tree.hpp"

namespace sdlab {

/// Deterministic, time-constant coefficients of the controlled system
///   dy − Σ D_i(γ_i D_i y) dt = (Σ A_iD_i(a_{1i} y) + a_2 y + χ_{G_0} u) dt + (a_3 y + v) dB.
struct Coefficients {
  DriftCoefficients drift;
  MeshFn a3;

  static Coefficients heat(const Mesh& mesh);
  void validate(const Mesh& mesh) const;
};

/// Integrability exponent check for a_2: n* > 2 when n = 2, n* ≥ n when n > 2.
void validate_n_star(int n, double n_star);

enum class TimeScheme { explicit_euler, implicit_drift };

struct SolverOptions {
  TimeScheme scheme = TimeScheme::explicit_euler;
  int threads = 1;
  std::size_t memory_budget = kDefaultMemoryBudget;
};

/// Drift control u (supported in G_0 ∩ M) and diffusion control v, levels 0..K−1.
struct ControlPair {
  AdaptedProcess u;
  AdaptedProcess v;

  static ControlPair zero(const Mesh& mesh, const ScenarioTree& tree);
};

/// Solution of the backward system: z on levels 0..K, and on levels 0..K−1
/// the conditional mean m_k = E_k[z_{k+1}] and the martingale density Z_k.
struct BackwardPair {
  AdaptedProcess z;
  AdaptedProcess Z;
  AdaptedProcess m;
};

/// Leaf-level family (one primal mesh function per level-K node), stored
/// node-major. Inner products use the weight 2^-K h^n.
using LeafVector = Eigen::VectorXd;

struct DualityReport {
  double terminal = 0.0;  // E⟨y_K, z_T⟩
  double initial = 0.0;   // E⟨y_0, z_0⟩
  double control = 0.0;   // Σ Δt E[⟨u, m⟩_{G_0} + ⟨v, Z⟩]
  double gap() const { return terminal - initial - control; }
  double scale() const;
  double relative_gap() const { return std::abs(gap()) / scale(); }
};

/// Forward Euler–Maruyama solver and its exact discrete adjoint on a
/// scenario tree.
///
/// Forward step on node (k, j), children ±:
///   y_{k+1}^± = P y_k + Δt χ u_k ± √Δt (a_3 y_k + v_k)
/// with P = I + ΔtA (explicit) or P = (I − ΔtA)^{-1} (implicit drift).
/// Backward step:
///   (m_k, Z_k) = martingale_parts(z_{k+1}^+, z_{k+1}^-),  z_k = Pᵀ m_k + Δt a_3 Z_k,
/// which makes E⟨y_K, z_T⟩ − ⟨y_0, z_0⟩ = Σ Δt E[⟨u, m⟩ + ⟨v, Z⟩] hold exactly.
class StochasticSolver {
 public:
  StochasticSolver(const Mesh& mesh, Coefficients coeffs, const ScenarioTree& tree,
                   const Box& control_box, SolverOptions options = {});
  ~StochasticSolver();
  StochasticSolver(StochasticSolver&&) noexcept;

  const Mesh& mesh() const { return mesh_; }
  const ScenarioTree& tree() const { return tree_; }
  const Coefficients& coefficients() const { return coeffs_; }
  const SolverOptions& options() const { return options_; }
  const OperatorStencil& drift() const { return drift_; }
  /// χ_{G_0 ∩ M} on the primal mesh.
  const MeshFn& control_mask() const { return mask_; }

  /// Δt · (2 Σ_i max γ_i / h² + Σ_i max |a_{1i}| / h + max |a_2|); explicit
  /// Euler requires this to be ≤ 1.
  double cfl_number() const;
  double admissible_dt() const;

  AdaptedProcess solve_forward(const MeshFn& y0, const ControlPair& ctl) const;
  AdaptedProcess solve_forward(const MeshFn& y0) const;
  /// Forward solve with the HUM feedback u = −m χ_{G_0}, v = −Z read from `adj`.
  AdaptedProcess solve_forward_feedback(const MeshFn& y0, const BackwardPair& adj) const;

  BackwardPair solve_backward(const AdaptedProcess& z_terminal_levels) const;
  BackwardPair solve_backward(const LeafVector& z_T) const;

  DualityReport duality(const MeshFn& y0, const AdaptedProcess& y, const ControlPair& ctl,
                        const BackwardPair& adj) const;

  /// Throws InvalidArgument if u is nonzero outside G_0 ∩ M.
  void check_control(const ControlPair& ctl) const;

  // Leaf-vector helpers.
  std::size_t leaf_size() const;
  LeafVector leaves(const AdaptedProcess& p) const;
  double leaf_inner(const LeafVector& a, const LeafVector& b) const;

 private:
  struct Factorizations;

  enum class ControlSource { none, explicit_pair, feedback };
  AdaptedProcess forward_impl(const MeshFn& y0, ControlSource src, const ControlPair* ctl,
                              const BackwardPair* adj) const;
  void apply_propagator(std::span<const double> in, std::span<double> out) const;
  void apply_propagator_transpose(std::span<const double> in, std::span<double> out) const;

  Mesh mesh_;
  Coefficients coeffs_;
  ScenarioTree tree_;
  SolverOptions options_;
  OperatorStencil drift_;
  SparseOp drift_transpose_;
  MeshFn mask_;
  std::unique_ptr<Factorizations> lu_;
};

}  // namespace sdlab
