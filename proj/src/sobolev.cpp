#include "sdlab/sobolev.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/SparseCholesky>

#include "sdlab/calculus.hpp"
#include "sdlab/errors.hpp"
#include "sdlab/rng.hpp"

namespace sdlab {

void validate_sobolev_exponents(int n, double p, double p_star) {
  if (n < 2) throw InvalidArgument("the discrete Sobolev inequality needs n >= 2");
  if (!(p >= 1.0)) throw InvalidArgument("Sobolev exponent p must be >= 1");
  if (p < n) {
    const double expect = 1.0 / (1.0 / p - 1.0 / n);
    if (std::abs(p_star - expect) > 1e-12 * expect) {
      throw InvalidArgument("for p < n the exponent p* must equal np/(n-p) = " +
                            std::to_string(expect));
    }
  } else if (p == n) {
    if (!(p_star >= p) || std::isinf(p_star)) {
      throw InvalidArgument("for p = n the exponent p* must lie in [p, infinity)");
    }
  } else {
    throw InvalidArgument("Sobolev exponent p must satisfy p <= n");
  }
}

double sobolev_ratio(const MeshFn& u, double p, double p_star) {
  validate_sobolev_exponents(u.mesh().dim(), p, p_star);
  if (u.region() != Region::primal()) throw InvalidArgument("Sobolev ratio needs a primal function");
  double m = 0.0;
  for (double v : u.values()) m = std::max(m, std::abs(v));
  if (m == 0.0) throw InvalidArgument("Sobolev ratio of the zero function");
  return lp_norm(u, p_star) / w1p_norm(u, p);
}

ProductBound product_bound(const MeshFn& u) {
  const Mesh& mesh = u.mesh();
  const int n = mesh.dim();
  if (n < 2) throw InvalidArgument("the product bound needs n >= 2");
  const double q = static_cast<double>(n) / (n - 1);
  ProductBound b;
  b.lhs = lp_norm(u, q);
  b.rhs = 1.0;
  for (int i = 0; i < n; ++i) b.rhs *= std::pow(lp_norm(diff(u, i), 1.0), 1.0 / n);
  return b;
}

LoomisWhitney loomis_whitney(const Mesh& mesh, const std::vector<std::vector<double>>& f) {
  const int n = mesh.dim();
  if (n < 2) throw InvalidArgument("the Loomis-Whitney bound needs n >= 2");
  if (static_cast<int>(f.size()) != n) throw InvalidArgument("need one factor per axis");
  const std::size_t N = static_cast<std::size_t>(mesh.points_per_axis());
  std::size_t face = 1;
  for (int a = 0; a < n - 1; ++a) face *= N;
  for (const auto& fi : f) {
    if (fi.size() != face) throw InvalidArgument("factor size does not match the hyperplane mesh");
  }
  const double h = mesh.h();
  LoomisWhitney lw;
  std::array<int, kMaxDim> idx{};
  double sum = 0.0;
  for (std::size_t k = 0; k < mesh.count(Region::primal()); ++k) {
    mesh.multi_index(Region::primal(), k, idx);
    double prod = 1.0;
    for (int i = 0; i < n; ++i) {
      std::size_t off = 0;
      for (int a = 0; a < n; ++a) {
        if (a != i) off = off * N + static_cast<std::size_t>(idx[a]);
      }
      prod *= f[i][off];
    }
    sum += std::abs(prod);
  }
  lw.lhs = std::pow(h, n) * sum;
  lw.rhs = 1.0;
  const double r = n - 1.0;
  for (const auto& fi : f) {
    double s = 0.0;
    for (double v : fi) s += std::pow(std::abs(v), r);
    lw.rhs *= std::pow(std::pow(h, n - 1) * s, 1.0 / r);
  }
  return lw;
}

LoomisWhitneyTrials loomis_whitney_trials(const Mesh& mesh, int trials, std::uint64_t seed) {
  const int n = mesh.dim();
  std::size_t face = 1;
  for (int a = 0; a < n - 1; ++a) face *= static_cast<std::size_t>(mesh.points_per_axis());
  LoomisWhitneyTrials out;
  out.min_slack = std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng = stream_rng(seed, Stream::loomis_whitney, static_cast<std::uint64_t>(t));
    std::exponential_distribution<double> E(1.0);
    std::bernoulli_distribution sparse(0.3);
    std::vector<std::vector<double>> f(static_cast<std::size_t>(n), std::vector<double>(face));
    for (auto& fi : f) {
      for (double& v : fi) v = sparse(rng) ? 0.0 : E(rng);
    }
    const LoomisWhitney lw = loomis_whitney(mesh, f);
    ++out.trials;
    if (!lw.holds()) ++out.failures;
    if (lw.rhs > 0.0) out.min_slack = std::min(out.min_slack, (lw.rhs - lw.lhs) / lw.rhs);
  }
  return out;
}

namespace {

struct LogRatio {
  double value;
  MeshFn grad;
};

double signed_pow(double v, double e) {
  if (v == 0.0) return 0.0;
  return std::copysign(std::pow(std::abs(v), e), v);
}

// log ‖u‖_{p*} − log ‖u‖_{W^{1,p}} and its (sub)gradient in u.
LogRatio log_ratio(const MeshFn& u, double p, double ps) {
  const Mesh& mesh = u.mesh();
  double top = 0.0, bot = 0.0;
  for (double v : u.values()) {
    top += std::pow(std::abs(v), ps);
    bot += std::pow(std::abs(v), p);
  }
  std::vector<MeshFn> du;
  for (int i = 0; i < mesh.dim(); ++i) {
    du.push_back(diff(u, i));
    for (double v : du.back().values()) bot += std::pow(std::abs(v), p);
  }
  const double hn = mesh.cell_measure(Region::primal());
  LogRatio r{std::log(hn * top) / ps - std::log(hn * bot) / p, MeshFn(mesh, Region::primal())};
  for (std::size_t q = 0; q < u.size(); ++q) {
    r.grad[q] = signed_pow(u[q], ps - 1.0) / top - signed_pow(u[q], p - 1.0) / bot;
  }
  for (int i = 0; i < mesh.dim(); ++i) {
    MeshFn flux(mesh, Region::dual(i));
    for (std::size_t q = 0; q < flux.size(); ++q) flux[q] = signed_pow(du[i][q], p - 1.0);
    // the transpose of primal→dual D_i is −(dual→primal D_i)
    const MeshFn back = diff(flux, i);
    for (std::size_t q = 0; q < u.size(); ++q) r.grad[q] += back[q] / bot;
  }
  return r;
}

MeshFn random_probe(const Mesh& mesh, std::mt19937_64& rng, bool smooth) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  if (!smooth) {
    MeshFn u(mesh, Region::primal());
    for (double& v : u.values()) v = 2.0 * U(rng) - 1.0;
    return u;
  }
  const int bumps = 1 + static_cast<int>(3 * U(rng));
  std::vector<std::vector<double>> centers;
  std::vector<double> widths, amps;
  for (int b = 0; b < bumps; ++b) {
    std::vector<double> c(static_cast<std::size_t>(mesh.dim()));
    for (double& x : c) x = 0.2 + 0.6 * U(rng);
    centers.push_back(c);
    widths.push_back(0.05 + 0.25 * U(rng));
    amps.push_back(2.0 * U(rng) - 1.0);
  }
  return MeshFn::sample(mesh, Region::primal(), [&](std::span<const double> x) {
    double v = 0.0;
    for (int b = 0; b < bumps; ++b) {
      double r2 = 0.0;
      for (std::size_t a = 0; a < x.size(); ++a) r2 += (x[a] - centers[b][a]) * (x[a] - centers[b][a]);
      v += amps[b] * std::exp(-r2 / (2 * widths[b] * widths[b]));
    }
    double cut = 1.0;
    for (double c : x) cut *= std::sin(std::numbers::pi * c);
    return v * cut;
  });
}

void normalize(MeshFn& u) {
  double m = 0.0;
  for (double v : u.values()) m = std::max(m, std::abs(v));
  if (m > 0.0) u *= 1.0 / m;
}

}  // namespace

SobolevRow maximize_sobolev_ratio(const Mesh& mesh, double p, double p_star, int probes,
                                  int ascent_steps, std::uint64_t seed) {
  validate_sobolev_exponents(mesh.dim(), p, p_star);
  if (probes < 1) throw InvalidArgument("Sobolev sweep needs at least one probe");
  if (ascent_steps < 0) throw InvalidArgument("ascent steps must be nonnegative");

  const auto n = static_cast<Eigen::Index>(mesh.count(Region::primal()));
  using ColMat = Eigen::SparseMatrix<double>;
  ColMat I(n, n);
  I.setIdentity();
  const ColMat W = I - ColMat(drift_operator(mesh, DriftCoefficients::heat(mesh)).matrix);
  Eigen::SimplicialLDLT<ColMat> pre(W);
  if (pre.info() != Eigen::Success) throw InvalidArgument("Sobolev preconditioner factorization failed");

  SobolevRow row;
  row.h = mesh.h();
  row.N = mesh.points_per_axis();
  row.p = p;
  row.p_star = p_star;
  row.probes = probes;
  row.ascent_steps = ascent_steps;
  row.product_bound_slack = std::numeric_limits<double>::infinity();
  auto track_product = [&](const MeshFn& u) {
    const ProductBound b = product_bound(u);
    row.product_bound_slack = std::min(row.product_bound_slack, (b.rhs - b.lhs) / b.rhs);
  };

  for (int pr = 0; pr < probes; ++pr) {
    std::mt19937_64 rng = stream_rng(seed, Stream::sobolev_probes, static_cast<std::uint64_t>(pr));
    MeshFn u = random_probe(mesh, rng, pr % 2 == 0);
    normalize(u);
    LogRatio cur = log_ratio(u, p, p_star);
    track_product(u);
    double step = 1.0;
    for (int it = 0; it < ascent_steps; ++it) {
      Eigen::Map<const Eigen::VectorXd> g(cur.grad.values().data(), n);
      const Eigen::VectorXd d = pre.solve(g);
      double slope = g.dot(d);
      if (!(slope > 0.0)) break;
      // scale the direction to the size of u so that step ~ 1 is meaningful
      const double scale = 1.0 / d.cwiseAbs().maxCoeff();
      bool improved = false;
      for (int bt = 0; bt < 40; ++bt) {
        MeshFn trial = u;
        for (Eigen::Index q = 0; q < n; ++q) trial[static_cast<std::size_t>(q)] += step * scale * d[q];
        LogRatio next = log_ratio(trial, p, p_star);
        if (std::isfinite(next.value) && next.value > cur.value) {
          u = std::move(trial);
          normalize(u);
          cur = log_ratio(u, p, p_star);
          improved = true;
          step = std::min(step * 2.0, 4.0);
          break;
        }
        step *= 0.5;
      }
      if (!improved) break;
      track_product(u);
    }
    row.max_ratio = std::max(row.max_ratio, sobolev_ratio(u, p, p_star));
  }
  return row;
}

std::vector<SobolevRow> sobolev_constant_sweep(int n, double p, double p_star,
                                               const std::vector<int>& N, int probes,
                                               int ascent_steps, std::uint64_t seed) {
  validate_sobolev_exponents(n, p, p_star);
  std::vector<SobolevRow> rows;
  for (int Ni : N) rows.push_back(maximize_sobolev_ratio(Mesh(n, Ni), p, p_star, probes, ascent_steps, seed));
  return rows;
}

}  // namespace sdlab
