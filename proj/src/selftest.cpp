#include "sdlab/selftest.hpp"

#include <cmath>
#include <map>
#include <random>

#include "sdlab/calculus.hpp"
#include "sdlab/errors.hpp"
#include "sdlab/rng.hpp"

namespace sdlab {

namespace {

MeshFn uniform(const Mesh& mesh, Region region, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  MeshFn f(mesh, region);
  for (double& v : f.values()) v = U(rng);
  return f;
}

double max_gap(const MeshFn& a, const MeshFn& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

double min_value(const MeshFn& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::min(m, v);
  return m;
}

}  // namespace

std::vector<IdentityRow> calculus_selftest(const std::vector<int>& dims,
                                           const std::vector<int>& sizes, int samples,
                                           std::uint64_t seed) {
  if (samples < 1) throw InvalidArgument("self-test needs at least one sample");
  std::vector<IdentityRow> rows;
  std::uint64_t counter = 0;
  for (int n : dims) {
    for (int N : sizes) {
      const Mesh mesh(n, N);
      const double h = mesh.h();
      const double q = h * h / 4;
      std::map<std::string, double> worst;
      const char* names[] = {"difference_product", "average_product", "average_square_inverse",
                             "difference_square", "average_square",
                             "average_square_lower_bounds", "sbp_difference", "sbp_average"};
      for (const char* nm : names) worst[nm] = 0.0;
      for (int s = 0; s < samples; ++s) {
        std::mt19937_64 rng = stream_rng(seed, Stream::calculus_probes, counter++);
        const MeshFn u = uniform(mesh, Region::primal(), rng);
        const MeshFn v = uniform(mesh, Region::primal(), rng);
        for (int i = 0; i < n; ++i) {
          const MeshFn ub = uniform(mesh, Region::boundary(i), rng);
          const MeshFn vb = uniform(mesh, Region::boundary(i), rng);
          const MeshFn Du = diff(u, i, ub), Au = average(u, i, ub);
          const MeshFn Dv = diff(v, i, vb), Av = average(v, i, vb);
          const MeshFn uv = u * v, uvb = ub * vb, uu = u * u, uub = ub * ub;

          auto bump = [&](const char* k, double r) { worst[k] = std::max(worst[k], r); };
          bump("difference_product", max_gap(diff(uv, i, uvb), Du * Av + Au * Dv));
          bump("average_product", max_gap(average(uv, i, uvb), Au * Av + q * (Du * Dv)));
          bump("average_square_inverse", max_gap(average(Au, i) - q * diff(Du, i), u));
          bump("difference_square", max_gap(diff(uu, i, uub), 2.0 * (Du * Au)));
          const MeshFn a_sq = average(uu, i, uub);
          bump("average_square", max_gap(a_sq, Au * Au + q * (Du * Du)));
          bump("average_square_lower_bounds",
               std::max(-min_value(a_sq - Au * Au), -min_value(a_sq - q * (Du * Du))));

          const MeshFn w = uniform(mesh, Region::dual(i), rng);
          const NormalTrace nt = normal_and_trace(w);
          bump("sbp_difference", std::abs(integral(u * diff(w, i)) + integral(w * Du) -
                                          integral(ub * nt.trace * nt.normal)));
          bump("sbp_average", std::abs(integral(u * average(w, i)) - integral(w * Au) +
                                       0.5 * h * integral(ub * nt.trace)));
        }
      }
      for (const char* nm : names) rows.push_back({nm, n, N, samples, worst[nm]});
    }
  }
  return rows;
}

}  // namespace sdlab
