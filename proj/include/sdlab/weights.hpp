#pragma once

#include <string>
#include <vector>

#include "sdlab/mesh.hpp"

namespace sdlab {

/// Parameters of the Carleman weight r = exp(s(t) φ(x)), s = τ θ(t).
struct CarlemanParams {
  double lambda = 1.0;  // ≥ 1
  double tau = 1.0;     // ≥ 1
  double delta = 0.25;  // in (0, 1/2)
  double K_psi = 0.0;   // must exceed max ψ
  double T = 1.0;       // > 0

  void validate(double max_psi) const;
};

/// θ(t) = 1 / ((t + δT)(T + δT − t)) on [0, T].
double theta(double t, double delta, double T);
/// dθ/dt = 2 (t − T/2) θ².
double theta_derivative(double t, double delta, double T);
double theta_max(double delta, double T);
double theta_min(double delta, double T);
inline double carleman_s(double t, const CarlemanParams& p) { return p.tau * theta(t, p.delta, p.T); }

/// The quadratic bump ψ(x) = C_0 − |x − x_0|² centered in G_1, together with
/// the derived weights. All evaluators accept arbitrary points of R^n, so
/// they can be sampled on any mesh region or off-mesh.
class WeightField {
 public:
  WeightField(std::vector<double> center, double peak);

  int dim() const { return static_cast<int>(x0_.size()); }
  const std::vector<double>& center() const { return x0_; }
  double peak() const { return c0_; }

  double psi(std::span<const double> x) const;
  /// ∂_i ψ and ∂_i ∂_j ψ.
  double dpsi(std::span<const double> x, int i) const;
  double d2psi(int i, int j) const { return i == j ? -2.0 : 0.0; }
  double grad_norm(std::span<const double> x) const;

  /// φ(x) = e^{λψ(x)} − e^{λK}.
  double phi(std::span<const double> x, const CarlemanParams& p) const;
  /// Positive polynomial factor e^{λψ(x)} used in place of φ where the
  /// inequality needs a nonnegative weight.
  double xi(std::span<const double> x, const CarlemanParams& p) const;

  /// ρ = e^{−sφ} and r = e^{sφ} at parameter value s.
  double rho(std::span<const double> x, double s, const CarlemanParams& p) const;
  double r(std::span<const double> x, double s, const CarlemanParams& p) const;
  /// Analytic derivatives ∂_i ρ and ∂_i ∂_j ρ, and ∂_i(r ∂_j ρ).
  double drho(std::span<const double> x, int i, double s, const CarlemanParams& p) const;
  double d2rho(std::span<const double> x, int i, int j, double s, const CarlemanParams& p) const;
  double d_r_drho(std::span<const double> x, int i, int j, double s,
                  const CarlemanParams& p) const;

  /// Largest value of ψ over the closed unit cube.
  double max_over_cube() const { return c0_; }

 private:
  std::vector<double> x0_;
  double c0_;
};

struct PsiReport {
  WeightField field;
  /// min over primal samples outside G_1 of |∇ψ|.
  double grad_margin = 0.0;
  /// min over the one-cell layers next to each face of −∂_ν ψ.
  double normal_margin = 0.0;
};

/// Default ψ for the given G_1: x_0 = center of G_1, C_0 = 1 + n.
PsiReport build_psi(const Mesh& mesh, const Box& g1);

/// One row of the h-halving study.
struct RateRow {
  std::string identity;
  double h = 0.0;
  double error = 0.0;
  double observed_order = 0.0;  // NaN on the coarsest mesh
};

struct RateReport {
  std::vector<RateRow> rows;
  /// Smallest observed order over all identities (NaN if none).
  double min_order() const;
  double max_order() const;
};

/// Measures max-norm errors between discrete composites of A_i, D_i applied to
/// the weights and their continuous principal terms on meshes with spacing
/// h0, h0/2, ..., normalized by the predicted power of s, and the log2 ratios
/// of successive errors. Evaluated at t = 0 where s is largest. Throws
/// InvalidArgument if τ h0 max θ > smallness.
RateReport verify_weight_rates(int n, int N0, int levels, const WeightField& field,
                               const CarlemanParams& params, double smallness = 1.0);

}  // namespace sdlab
