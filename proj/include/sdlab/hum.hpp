#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdlab/krylov.hpp"
#include "sdlab/solver.hpp"

namespace sdlab {

/// Admissible penalization rates φ(h): non-decreasing, positive, and
/// vanishing no faster than e^{−κ/h}.
struct PhiRate {
  enum class Kind { h_squared, exp_sqrt };
  Kind kind = Kind::h_squared;
  double c = 1.0;  // e^{−c/√h}

  double operator()(double h) const;
  std::string name() const;
  /// "h2" or "exp_sqrt" (with c taken from the argument).
  static PhiRate parse(const std::string& name, double c = 1.0);
};

struct HumConfig {
  PhiRate phi;
  double cg_tol = 1e-10;
  int cg_max_iter = 500;
};

/// ΣΔt E‖Z_k‖² and ΣΔt E‖m_k χ_{G_0}‖² of a backward solution.
struct GramTerms {
  double martingale = 0.0;
  double observation = 0.0;
  double total() const { return martingale + observation; }
};
GramTerms gram_terms(const StochasticSolver& solver, const BackwardPair& adj);

/// The HUM feedback u = −m χ_{G_0}, v = −Z as an explicit control pair.
ControlPair feedback_controls(const StochasticSolver& solver, const BackwardPair& adj);

/// J(z_T) = ½ Gram(z_T) + (φ/2) E‖z_T‖² − ⟨y_0, z_0⟩.
double hum_functional(const StochasticSolver& solver, const LeafVector& z_T, const MeshFn& y0,
                      double phi);

/// φ z_T − y_K with y driven from y0 by the feedback of z_T. Throws
/// PropertyFailure if the forward/backward pair fails the duality identity.
LeafVector hum_gradient(const StochasticSolver& solver, const LeafVector& z_T, const MeshFn& y0,
                        double phi);

/// Λ d = φ d − y_K(y_0 = 0, feedback of d).
LeafVector hum_operator(const StochasticSolver& solver, const LeafVector& d, double phi);

struct HumSolution {
  LeafVector z_T;
  BackwardPair adj;
  AdaptedProcess y;
  double phi = 0.0;
  int iterations = 0;
  std::vector<double> residuals;
  bool converged = false;
  double gradient_norm = 0.0;
  /// ‖y_K − φ z_T‖ / ‖φ z_T‖ in the leaf norm.
  double optimality_residual = 0.0;
  double cost = 0.0;
  double control_cost = 0.0;
  double terminal_energy = 0.0;
};

/// Minimizes J by conjugate residuals on Λ z = y_K^{free}. Throws
/// PropertyFailure (carrying the residual history) if the iteration stalls.
HumSolution solve_hum(const StochasticSolver& solver, const MeshFn& y0, const HumConfig& cfg);

struct ControllabilityReport {
  double initial_energy = 0.0;   // ‖y_0‖²
  double control_cost = 0.0;     // E∫|v|² + E∫∫_{G_0}|u|²
  double terminal_energy = 0.0;  // E‖y_K‖²
  double cost_ratio = 0.0;       // control_cost / initial_energy
  double terminal_ratio = 0.0;   // terminal_energy / (φ initial_energy)
};
ControllabilityReport verify_controllability(const StochasticSolver& solver,
                                             const HumSolution& sol, const MeshFn& y0);

/// E‖u_k‖² and E‖v_k‖² per level of the HUM controls.
struct LevelEnergy {
  double t = 0.0;
  double u = 0.0;
  double v = 0.0;
};
std::vector<LevelEnergy> control_energy_per_level(const StochasticSolver& solver,
                                                  const HumSolution& sol);

/// Random probes of Λ: worst relative symmetry defect, smallest
/// (⟨Λd, d⟩ − φ‖d‖²) / (φ‖d‖²), and worst relative error of the identity
/// ⟨φd − Λd, d⟩ = Gram(d).
struct OperatorProbe {
  double symmetry = 0.0;
  double coercivity_margin = 0.0;
  double gram_identity = 0.0;
};
OperatorProbe probe_hum_operator(const StochasticSolver& solver, double phi, std::uint64_t seed,
                                 int probes);

/// Relative gap between the central difference of J along d and ⟨∇J, d⟩.
double gradient_check(const StochasticSolver& solver, const LeafVector& z_T, const MeshFn& y0,
                      double phi, const LeafVector& d, double eps);

}  // namespace sdlab
