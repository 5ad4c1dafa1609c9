#pragma once

#include <cstdint>
#include <vector>

#include "sdlab/mesh.hpp"

namespace sdlab {

/// Accepts 1 ≤ p < n with 1/p* = 1/p − 1/n, or p = n with p* ∈ [p, ∞); n ≥ 2.
void validate_sobolev_exponents(int n, double p, double p_star);

/// ‖u‖_{L^{p*}} / ‖u‖_{W^{1,p}} for a primal u (zero on the boundary).
double sobolev_ratio(const MeshFn& u, double p, double p_star);

struct SobolevRow {
  double h = 0.0;
  int N = 0;
  double p = 0.0;
  double p_star = 0.0;
  double max_ratio = 0.0;
  int probes = 0;
  int ascent_steps = 0;
  /// Worst slack (rhs − lhs) of the product bound over all probed u; ≥ 0 when it holds.
  double product_bound_slack = 0.0;
};

/// Maximizes the ratio from random smooth and rough probes by preconditioned
/// gradient ascent on log ratio (preconditioner I − Δ_h) with backtracking.
/// Also checks the product bound on every iterate.
SobolevRow maximize_sobolev_ratio(const Mesh& mesh, double p, double p_star, int probes,
                                  int ascent_steps, std::uint64_t seed);

std::vector<SobolevRow> sobolev_constant_sweep(int n, double p, double p_star,
                                               const std::vector<int>& N, int probes,
                                               int ascent_steps, std::uint64_t seed);

/// (∫_M |u|^{n/(n−1)})^{(n−1)/n} and Π_i (∫_{M*_i} |D_i u|)^{1/n}.
struct ProductBound {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds(double rel_tol = 1e-12) const { return lhs <= rhs * (1.0 + rel_tol); }
};
ProductBound product_bound(const MeshFn& u);

/// f(x) = Π f_i(x̃_i) with f_i on the primal mesh of the hyperplane without
/// axis i, stored row-major over the remaining axes. Returns ‖f‖_{L¹(M)} and
/// Π ‖f_i‖_{L^{n−1}(N_i)}.
struct LoomisWhitney {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds(double rel_tol = 1e-12) const { return lhs <= rhs * (1.0 + rel_tol); }
};
LoomisWhitney loomis_whitney(const Mesh& mesh, const std::vector<std::vector<double>>& f);

/// Random nonnegative families; worst relative slack (rhs − lhs)/rhs over trials.
struct LoomisWhitneyTrials {
  int trials = 0;
  int failures = 0;
  double min_slack = 0.0;
};
LoomisWhitneyTrials loomis_whitney_trials(const Mesh& mesh, int trials, std::uint64_t seed);

}  // namespace sdlab
