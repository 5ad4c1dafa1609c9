#include <cmath>
#include <random>

#include "doctest.h"
#include "sdlab/errors.hpp"
#include "sdlab/sobolev.hpp"
#include "test_support.hpp"

using namespace sdlab;
using sdlab::testing::random_fn;

TEST_CASE("exponent validation") {
  CHECK_NOTHROW(validate_sobolev_exponents(2, 1.0, 2.0));
  CHECK_NOTHROW(validate_sobolev_exponents(3, 2.0, 6.0));
  CHECK_NOTHROW(validate_sobolev_exponents(2, 2.0, 4.0));
  CHECK_NOTHROW(validate_sobolev_exponents(2, 2.0, 2.0));
  CHECK_THROWS_AS(validate_sobolev_exponents(1, 1.0, 2.0), InvalidArgument);
  CHECK_THROWS_AS(validate_sobolev_exponents(3, 2.0, 5.0), InvalidArgument);
  CHECK_THROWS_AS(validate_sobolev_exponents(2, 3.0, 4.0), InvalidArgument);
  CHECK_THROWS_AS(validate_sobolev_exponents(2, 2.0, 1.5), InvalidArgument);
  CHECK_THROWS_AS(validate_sobolev_exponents(2, 2.0, INFINITY), InvalidArgument);
  CHECK_THROWS_AS(validate_sobolev_exponents(2, 0.5, 2.0 / 3.0), InvalidArgument);
}

TEST_CASE("single spike on N = 1") {
  // h = 1/2: ‖u‖_4 = (1/4)^{1/4}; ‖u‖²_{W^{1,2}} = 1/4 + 2 axes · 2 faces · (1/4)(2²) = 17/4
  const Mesh m(2, 1);
  const MeshFn u = MeshFn::constant(m, Region::primal(), 1.0);
  CHECK(sobolev_ratio(u, 2.0, 4.0) == doctest::Approx(std::pow(0.25, 0.25) / std::sqrt(4.25)));
  const ProductBound b = product_bound(u);
  CHECK(b.lhs == doctest::Approx(0.5));
  CHECK(b.rhs == doctest::Approx(1.0));
  CHECK_THROWS_AS(sobolev_ratio(MeshFn(m, Region::primal()), 2.0, 4.0), InvalidArgument);
}

TEST_CASE("ratio is homogeneous of degree zero; product bound holds") {
  std::mt19937_64 rng(6);
  for (int N : {3, 8, 15}) {
    const Mesh m(2, N);
    for (int t = 0; t < 10; ++t) {
      const MeshFn u = random_fn(m, Region::primal(), rng);
      CHECK(sobolev_ratio(-7.0 * u, 2.0, 4.0) == doctest::Approx(sobolev_ratio(u, 2.0, 4.0)).epsilon(1e-12));
      CHECK(product_bound(u).holds());
    }
  }
  const Mesh m3(3, 5);
  for (int t = 0; t < 5; ++t) CHECK(product_bound(random_fn(m3, Region::primal(), rng)).holds());
}

TEST_CASE("Loomis-Whitney: all ones is tight, a zero factor gives zero") {
  const Mesh m(3, 4);
  std::vector<std::vector<double>> f(3, std::vector<double>(16, 1.0));
  const LoomisWhitney lw = loomis_whitney(m, f);
  CHECK(lw.lhs == doctest::Approx(lw.rhs).epsilon(1e-13));
  CHECK(lw.holds());
  std::fill(f[1].begin(), f[1].end(), 0.0);
  CHECK(loomis_whitney(m, f).lhs == 0.0);
  f.pop_back();
  CHECK_THROWS_AS(loomis_whitney(m, f), InvalidArgument);
}

TEST_CASE("Loomis-Whitney random trials") {
  for (int n : {2, 3, 4}) {
    const LoomisWhitneyTrials t = loomis_whitney_trials(Mesh(n, 4), 40, 2);
    CHECK(t.trials == 40);
    CHECK(t.failures == 0);
    CHECK(t.min_slack >= -1e-12);
  }
}

TEST_CASE("maximized ratio: ascent never loses, runs are reproducible") {
  const Mesh m(2, 15);
  const SobolevRow none = maximize_sobolev_ratio(m, 2.0, 4.0, 4, 0, 3);
  const SobolevRow asc = maximize_sobolev_ratio(m, 2.0, 4.0, 4, 30, 3);
  CHECK(asc.max_ratio >= none.max_ratio);
  CHECK(asc.product_bound_slack >= 0.0);
  const SobolevRow again = maximize_sobolev_ratio(m, 2.0, 4.0, 4, 30, 3);
  CHECK(again.max_ratio == asc.max_ratio);
  CHECK_THROWS_AS(maximize_sobolev_ratio(m, 2.0, 4.0, 0, 3, 3), InvalidArgument);
}
