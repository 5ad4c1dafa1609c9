#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sdlab/scenario_tree.hpp"
#include "sdlab/weights.hpp"

namespace sdlab {

/// Right-hand sides of dw + Σ D_i(γ_i D_i w) dt = f dt + g dB manufactured
/// from an adapted w: on levels 0..K−1,
///   g_k = Z part of w_{k+1},  f_k = (E_k[w_{k+1}] − w_k)/Δt + Σ D_i(γ_i D_i w_k).
struct ManufacturedRhs {
  AdaptedProcess f;
  AdaptedProcess g;
};

ManufacturedRhs manufacture_rhs(const AdaptedProcess& w, std::span<const MeshFn> gamma,
                                const ScenarioTree& tree);

/// Both sides of the weighted inequality, all multiplied by e^{−log_scale}.
/// Polynomial factors use ξ = e^{λψ} > 0; the exponential factor is e^{2s(t)φ(x)}.
struct CarlemanTerms {
  // left side
  double gradient = 0.0;  // Σ_i E∫ s ξ e^{2sφ} |D_i w|² over the dual meshes
  double average = 0.0;   // Σ_i E∫ s ξ e^{2sφ} |A_i D_i w|²
  double zeroth = 0.0;    // E∫ s³ ξ³ e^{2sφ} |w|²
  // right side
  double observation = 0.0;  // E∫∫_{G_0} s³ ξ³ e^{2sφ} |w|²
  double source = 0.0;       // E∫ e^{2sφ} |f|²
  double noise = 0.0;        // E∫ s² e^{2sφ} |g|²
  double initial = 0.0;      // h^{-2} E∫ e^{2sφ} |w|² at t = 0
  double terminal = 0.0;     // h^{-2} E∫ e^{2sφ} |w|² at t = T
  double log_scale = 0.0;

  double lhs() const { return gradient + average + zeroth; }
  double rhs() const { return observation + source + noise + initial + terminal; }
  double ratio() const { return lhs() / rhs(); }
};

/// Evaluates both sides with the left rectangle rule over levels 0..K−1 and
/// the temporal boundary terms at levels 0 and K. Throws InvalidArgument when
/// τ h max θ exceeds `smallness`.
CarlemanTerms carleman_sides(const AdaptedProcess& w, const ManufacturedRhs& rhs,
                             const ScenarioTree& tree, const WeightField& field,
                             const CarlemanParams& params, const Box& g0, double smallness = 1.0);

/// Parameters of one smooth random sample: a sum of Gaussian bumps times the
/// cutoff Π sin(π x_i), each bump carrying the path scalar
/// a + b t + c B_t + d (B_t² − t).
struct SampleBump {
  std::vector<double> center;
  double width = 0.2;
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
};
using SampleSpec = std::vector<SampleBump>;

SampleSpec random_sample_spec(int n, std::uint64_t seed, std::uint64_t index);
AdaptedProcess manufacture_sample(const Mesh& mesh, const ScenarioTree& tree,
                                  const SampleSpec& spec);

struct CarlemanSweepConfig {
  int n = 2;
  std::vector<int> N{7, 11, 15};
  std::vector<double> tau_multiples{1.0, 2.0};  // τ = multiple × (T + T²)
  double T = 1.0;
  int K = 6;
  double delta = 0.25;
  double lambda = 1.0;
  double K_psi_margin = 0.1;  // K_ψ = max ψ + margin
  Box g0 = Box::cube(2, 0.2, 0.8);
  Box g1 = Box::cube(2, 0.3, 0.7);
  double epsilon = 1.0;  // cells need τ h max θ ≤ ε
  int samples = 50;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct CarlemanCell {
  double h = 0.0;
  int N = 0;
  double tau = 0.0;
  double smallness = 0.0;  // τ h max θ
  bool eligible = false;
  int samples = 0;
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
  int argmax = -1;
  CarlemanTerms worst;  // terms of the argmax sample
};

struct CarlemanReport {
  std::vector<CarlemanCell> cells;
  /// max / min of max_ratio over eligible cells (NaN if fewer than one).
  double variation() const;
};

CarlemanReport carleman_sweep(const CarlemanSweepConfig& cfg);

}  // namespace sdlab
