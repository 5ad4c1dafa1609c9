#pragma once

#include <cstdint>
#include <vector>

#include "sdlab/hum.hpp"
#include "sdlab/solver.hpp"

namespace sdlab {

/// The two quadratic forms of the relaxed observability inequality at z_T:
/// numerator E‖z_0‖², denominator ΣΔtE‖Z‖² + ΣΔtE‖mχ_{G_0}‖² + φE‖z_T‖².
struct ObservabilityForms {
  double numerator = 0.0;
  double martingale = 0.0;
  double observation = 0.0;
  double terminal = 0.0;  // φ E‖z_T‖²
  double denominator() const { return martingale + observation + terminal; }
  double ratio() const { return numerator / denominator(); }
};

ObservabilityForms observability_forms(const StochasticSolver& solver, const LeafVector& z_T,
                                       double phi);

/// numerator / denominator; throws InvalidArgument for z_T ≡ 0.
double observability_ratio(const StochasticSolver& solver, const LeafVector& z_T, double phi);

/// Bilinear denominator form evaluated on a pair.
double denominator_form(const StochasticSolver& solver, const LeafVector& a, const LeafVector& b,
                        double phi);

/// Worst relative defect of the polarization identity
/// 4 d(a, b) = d(a + b) − d(a − b) and of the symmetry d(a, b) = d(b, a).
double polarization_defect(const StochasticSolver& solver, double phi, std::uint64_t seed,
                           int pairs);

struct ObservabilityEstimate {
  double h = 0.0;
  double phi = 0.0;
  double c_est = 0.0;  // largest ratio seen; a lower bound of the supremum
  int probes = 0;
  int ascent_steps = 0;
  int best_probe = -1;
  std::vector<double> probe_ratios;  // final ratio of each probe
};

/// Randomized probes, each refined by generalized power iteration
/// z ← Den^{-1} Num z with conjugate-residual inner solves. Num z is the free
/// forward propagation of z_0 (the leaf adjoint of z_T ↦ z_0); Den is the
/// HUM operator. Every reported ratio is evaluated directly from the forms.
ObservabilityEstimate estimate_constant(const StochasticSolver& solver, double phi, int probes,
                                        int ascent_steps, std::uint64_t seed,
                                        double inner_tol = 1e-8);

}  // namespace sdlab
