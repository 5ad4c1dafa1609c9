#include "sdlab/carleman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "sdlab/calculus.hpp"
#include "sdlab/errors.hpp"
#include "sdlab/parallel.hpp"
#include "sdlab/rng.hpp"

namespace sdlab {

ManufacturedRhs manufacture_rhs(const AdaptedProcess& w, std::span<const MeshFn> gamma,
                                const ScenarioTree& tree) {
  const int K = tree.steps();
  if (w.last_level() != K || w.region() != Region::primal()) {
    throw InvalidArgument("manufactured w must be a primal process on levels 0..K");
  }
  const Mesh& mesh = w.mesh();
  ManufacturedRhs out{AdaptedProcess(mesh, Region::primal(), K - 1),
                      AdaptedProcess(mesh, Region::primal(), K - 1)};
  const std::size_t n = mesh.count(Region::primal());
  std::vector<double> m(n);
  for (int k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < tree.nodes_at(k); ++j) {
      auto g = out.g.at(k, j);
      martingale_parts(w.at(k + 1, 2 * j), w.at(k + 1, 2 * j + 1), tree.sqrt_dt(), m, g);
      const MeshFn wk = w.value(k, j);
      const MeshFn lap = laplacian_gamma(wk, gamma);
      auto f = out.f.at(k, j);
      for (std::size_t q = 0; q < n; ++q) f[q] = (m[q] - wk[q]) / tree.dt() + lap[q];
    }
  }
  return out;
}

namespace {

// e^{2s_kφ − shift} and ξ sampled on one region for every level 0..K.
struct RegionWeights {
  std::vector<double> xi;
  std::vector<std::vector<double>> expo;
};

RegionWeights sample_weights(const Mesh& mesh, Region region, const ScenarioTree& tree,
                             const WeightField& field, const CarlemanParams& p,
                             std::span<const double> s, double shift) {
  RegionWeights rw;
  std::vector<double> phi;
  mesh.for_each_node(region, [&](std::size_t, std::span<const double> x) {
    rw.xi.push_back(field.xi(x, p));
    phi.push_back(field.phi(x, p));
  });
  for (int k = 0; k <= tree.steps(); ++k) {
    std::vector<double> e(phi.size());
    for (std::size_t q = 0; q < phi.size(); ++q) e[q] = std::exp(2.0 * s[k] * phi[q] - shift);
    rw.expo.push_back(std::move(e));
  }
  return rw;
}

}  // namespace

CarlemanTerms carleman_sides(const AdaptedProcess& w, const ManufacturedRhs& rhs,
                             const ScenarioTree& tree, const WeightField& field,
                             const CarlemanParams& params, const Box& g0, double smallness) {
  const Mesh& mesh = w.mesh();
  const int n = mesh.dim();
  const int K = tree.steps();
  const double h = mesh.h();
  if (std::abs(tree.horizon() - params.T) > 1e-12 * params.T) {
    throw InvalidArgument("Carleman horizon T differs from the tree horizon");
  }
  params.validate(field.max_over_cube());
  const double small = params.tau * h * theta_max(params.delta, params.T);
  if (small > smallness) {
    throw InvalidArgument("smallness condition violated: tau*h*max(theta) = " +
                          std::to_string(small) + " > " + std::to_string(smallness) +
                          "; need h <= " +
                          std::to_string(smallness / (params.tau * theta_max(params.delta, params.T))));
  }

  std::vector<double> s(static_cast<std::size_t>(K) + 1);
  for (int k = 0; k <= K; ++k) s[k] = carleman_s(tree.time(k), params);
  // largest exponent over the cube: φ ≤ e^{λC_0} − e^{λK_ψ} < 0 and s ≥ τ min θ
  const double phi_max = std::exp(params.lambda * field.max_over_cube()) -
                         std::exp(params.lambda * params.K_psi);
  const double shift = 2.0 * params.tau * theta_min(params.delta, params.T) * phi_max;

  const RegionWeights wp = sample_weights(mesh, Region::primal(), tree, field, params, s, shift);
  std::vector<RegionWeights> wd;
  for (int i = 0; i < n; ++i) {
    wd.push_back(sample_weights(mesh, Region::dual(i), tree, field, params, s, shift));
  }
  const MeshFn mask = indicator(mesh, Region::primal(), g0);
  const double hn = mesh.cell_measure(Region::primal());
  const double dt = tree.dt();

  CarlemanTerms t;
  t.log_scale = shift;
  for (int k = 0; k < K; ++k) {
    const double wk = std::ldexp(1.0, -k) * dt * hn;
    const double sk = s[k];
    const auto& ep = wp.expo[k];
    for (std::size_t j = 0; j < tree.nodes_at(k); ++j) {
      const MeshFn u = w.value(k, j);
      for (int i = 0; i < n; ++i) {
        const MeshFn du = diff(u, i);
        const MeshFn adu = average(du, i);
        const auto& ed = wd[i].expo[k];
        double sg = 0.0, sa = 0.0;
        for (std::size_t q = 0; q < du.size(); ++q) sg += wd[i].xi[q] * ed[q] * du[q] * du[q];
        for (std::size_t q = 0; q < adu.size(); ++q) sa += wp.xi[q] * ep[q] * adu[q] * adu[q];
        t.gradient += wk * sk * sg;
        t.average += wk * sk * sa;
      }
      auto f = rhs.f.at(k, j);
      auto g = rhs.g.at(k, j);
      double sz = 0.0, so = 0.0, sf = 0.0, sn = 0.0;
      for (std::size_t q = 0; q < u.size(); ++q) {
        const double x3 = wp.xi[q] * wp.xi[q] * wp.xi[q];
        const double z = x3 * ep[q] * u[q] * u[q];
        sz += z;
        so += mask[q] * z;
        sf += ep[q] * f[q] * f[q];
        sn += ep[q] * g[q] * g[q];
      }
      t.zeroth += wk * sk * sk * sk * sz;
      t.observation += wk * sk * sk * sk * so;
      t.source += wk * sf;
      t.noise += wk * sk * sk * sn;
    }
  }
  auto boundary = [&](int level) {
    double acc = 0.0;
    const auto& e = wp.expo[level];
    for (std::size_t j = 0; j < tree.nodes_at(level); ++j) {
      auto u = w.at(level, j);
      double sj = 0.0;
      for (std::size_t q = 0; q < u.size(); ++q) sj += e[q] * u[q] * u[q];
      acc += std::ldexp(sj, -level);
    }
    return acc * hn / (h * h);
  };
  t.initial = boundary(0);
  t.terminal = boundary(K);
  return t;
}

SampleSpec random_sample_spec(int n, std::uint64_t seed, std::uint64_t index) {
  std::mt19937_64 rng = stream_rng(seed, Stream::carleman_samples, index);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::uniform_int_distribution<int> count(1, 3);
  std::normal_distribution<double> N01;
  SampleSpec spec(static_cast<std::size_t>(count(rng)));
  for (SampleBump& b : spec) {
    b.center.resize(static_cast<std::size_t>(n));
    for (double& c : b.center) c = 0.15 + 0.7 * U(rng);
    b.width = 0.1 + 0.2 * U(rng);
    b.a = N01(rng);
    b.b = N01(rng);
    b.c = N01(rng);
    b.d = 0.5 * N01(rng);
  }
  return spec;
}

AdaptedProcess manufacture_sample(const Mesh& mesh, const ScenarioTree& tree,
                                  const SampleSpec& spec) {
  const int K = tree.steps();
  AdaptedProcess w(mesh, Region::primal(), K);
  std::vector<std::vector<double>> shapes;
  for (const SampleBump& b : spec) {
    if (static_cast<int>(b.center.size()) != mesh.dim()) {
      throw InvalidArgument("sample bump dimension does not match the mesh");
    }
    std::vector<double> v;
    mesh.for_each_node(Region::primal(), [&](std::size_t, std::span<const double> x) {
      double r2 = 0.0, cut = 1.0;
      for (std::size_t a = 0; a < x.size(); ++a) {
        r2 += (x[a] - b.center[a]) * (x[a] - b.center[a]);
        cut *= std::sin(std::numbers::pi * x[a]);
      }
      v.push_back(cut * std::exp(-r2 / (2.0 * b.width * b.width)));
    });
    shapes.push_back(std::move(v));
  }
  for (int k = 0; k <= K; ++k) {
    const double t = tree.time(k);
    for (std::size_t j = 0; j < tree.nodes_at(k); ++j) {
      const double B = tree.brownian(k, j);
      auto out = w.at(k, j);
      for (std::size_t b = 0; b < spec.size(); ++b) {
        const SampleBump& sb = spec[b];
        const double c = sb.a + sb.b * t + sb.c * B + sb.d * (B * B - t);
        for (std::size_t q = 0; q < out.size(); ++q) out[q] += c * shapes[b][q];
      }
    }
  }
  return w;
}

double CarlemanReport::variation() const {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  bool any = false;
  for (const CarlemanCell& c : cells) {
    if (!c.eligible || c.samples == 0) continue;
    any = true;
    lo = std::min(lo, c.max_ratio);
    hi = std::max(hi, c.max_ratio);
  }
  return any ? hi / lo : std::numeric_limits<double>::quiet_NaN();
}

CarlemanReport carleman_sweep(const CarlemanSweepConfig& cfg) {
  if (cfg.samples < 0) throw InvalidArgument("sample count must be nonnegative");
  if (!(cfg.epsilon > 0.0)) throw InvalidArgument("smallness epsilon must be positive");
  cfg.g0.validate(cfg.n);
  cfg.g1.validate(cfg.n);
  if (!cfg.g1.strictly_inside(cfg.g0)) throw InvalidArgument("G_1 must lie strictly inside G_0");
  const ScenarioTree tree(cfg.K, cfg.T);
  const double tau_ref = cfg.T + cfg.T * cfg.T;

  std::vector<SampleSpec> specs;
  for (int i = 0; i < cfg.samples; ++i) {
    specs.push_back(random_sample_spec(cfg.n, cfg.seed, static_cast<std::uint64_t>(i)));
  }

  CarlemanReport rep;
  for (int N : cfg.N) {
    const Mesh mesh(cfg.n, N);
    const PsiReport psi = build_psi(mesh, cfg.g1);
    const std::vector<MeshFn> gamma = DriftCoefficients::heat(mesh).gamma;
    for (double mult : cfg.tau_multiples) {
      CarlemanParams p;
      p.lambda = cfg.lambda;
      p.tau = mult * tau_ref;
      p.delta = cfg.delta;
      p.T = cfg.T;
      p.K_psi = psi.field.max_over_cube() + cfg.K_psi_margin;
      p.validate(psi.field.max_over_cube());

      CarlemanCell cell;
      cell.h = mesh.h();
      cell.N = N;
      cell.tau = p.tau;
      cell.smallness = p.tau * mesh.h() * theta_max(p.delta, p.T);
      cell.eligible = cell.smallness <= cfg.epsilon;
      if (cell.eligible && !specs.empty()) {
        std::vector<CarlemanTerms> terms(specs.size());
        parallel_for(specs.size(), cfg.threads, [&](std::size_t b, std::size_t e) {
          for (std::size_t i = b; i < e; ++i) {
            const AdaptedProcess w = manufacture_sample(mesh, tree, specs[i]);
            const ManufacturedRhs r = manufacture_rhs(w, gamma, tree);
            terms[i] = carleman_sides(w, r, tree, psi.field, p, cfg.g0, cfg.epsilon);
          }
        });
        cell.samples = static_cast<int>(terms.size());
        double sum = 0.0;
        for (std::size_t i = 0; i < terms.size(); ++i) {
          const double r = terms[i].ratio();
          sum += r;
          if (r > cell.max_ratio) {
            cell.max_ratio = r;
            cell.argmax = static_cast<int>(i);
            cell.worst = terms[i];
          }
        }
        cell.mean_ratio = sum / static_cast<double>(terms.size());
      }
      rep.cells.push_back(cell);
    }
  }
  return rep;
}

}  // namespace sdlab
