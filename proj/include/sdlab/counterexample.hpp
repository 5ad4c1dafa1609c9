#pragma once

#include <vector>

#include "sdlab/solver.hpp"

namespace sdlab {

/// The diagonal checkerboard on an n = 2 mesh: ψ(i, j) = (−1)^i when i = j
/// (1-based node indices), zero elsewhere and on the boundary. It satisfies
/// Σ D_i² ψ = −(4/h²) ψ.
struct CheckerboardMode {
  Mesh mesh;
  MeshFn psi;
  double eigenvalue;  // −4/h²
};

CheckerboardMode build_checkerboard(const Mesh& mesh);

/// max |Σ D_i² ψ + (4/h²) ψ|.
double verify_eigen(const CheckerboardMode& mode);

/// Throws InvalidArgument if a primal node of G_0 lies on the diagonal.
void require_off_diagonal(const Mesh& mesh, const Box& g0);

struct ModeExperiment {
  double measured = 0.0;   // E⟨ψ, y_K⟩
  double predicted = 0.0;  // factor^K ⟨ψ, y_0⟩
  double deviation = 0.0;  // |measured − predicted| / max(|predicted|, tiny)
};

/// One-step factor of the ψ component: 1 − 4Δt/h² (explicit) or
/// 1/(1 + 4Δt/h²) (implicit drift).
double mode_step_factor(const StochasticSolver& solver);

/// Runs the controlled heat equation (γ ≡ 1, a_* = 0) and compares the
/// expected ψ component at T with its control-free prediction.
ModeExperiment uncontrollable_mode_experiment(const StochasticSolver& solver,
                                              const CheckerboardMode& mode, const MeshFn& y0,
                                              const ControlPair& ctl, const Box& g0);

struct FactorRow {
  long K = 0;
  double discrete = 0.0;    // (1 − 4Δt/h²)^K
  double continuous = 0.0;  // e^{−4T/h²}
  double relative_error = 0.0;
  double observed_order = 0.0;  // NaN on the first row
};

/// K-doubling study of (1 − 4Δt/h²)^K → e^{−4T/h²} starting from K0.
std::vector<FactorRow> factor_convergence(double h, double T, long K0, int levels);

}  // namespace sdlab
