#include <cmath>
#include <vector>

#include "doctest.h"
#include "sdlab/errors.hpp"
#include "sdlab/weights.hpp"

using namespace sdlab;

TEST_CASE("theta values") {
  CHECK(theta(0.0, 0.25, 1.0) == doctest::Approx(3.2));
  CHECK(theta(0.5, 0.25, 1.0) == doctest::Approx(16.0 / 9.0));
  CHECK(theta(1.0, 0.25, 1.0) == doctest::Approx(3.2));
  CHECK(theta_max(0.25, 1.0) == doctest::Approx(3.2));
  CHECK(theta_min(0.25, 1.0) == doctest::Approx(16.0 / 9.0));
  CHECK_THROWS_AS(theta(1.5, 0.25, 1.0), InvalidArgument);
}

TEST_CASE("theta derivative against central differences") {
  for (double T : {0.5, 1.0, 2.0}) {
    for (double delta : {0.1, 0.25, 0.4}) {
      for (double f : {0.05, 0.3, 0.5, 0.8, 0.95}) {
        const double t = f * T;
        const double e = 1e-6 * T;
        const double fd = (theta(t + e, delta, T) - theta(t - e, delta, T)) / (2 * e);
        CHECK(theta_derivative(t, delta, T) == doctest::Approx(fd).epsilon(1e-7));
      }
    }
  }
}

TEST_CASE("weight field: psi and derived weights") {
  const Mesh m(2, 7);
  const PsiReport rep = build_psi(m, Box::cube(2, 0.3, 0.7));
  const WeightField& w = rep.field;
  const std::vector<double> c{0.5, 0.5};
  CHECK(w.psi(c) == doctest::Approx(3.0));
  CHECK(w.max_over_cube() == 3.0);
  CHECK(rep.grad_margin > 0.0);
  CHECK(rep.normal_margin > 0.0);

  CarlemanParams p;
  p.K_psi = w.max_over_cube() + 0.1;
  p.validate(w.max_over_cube());
  const double s = 2.7;
  for (double a : {0.05, 0.4, 0.9}) {
    for (double b : {0.1, 0.5, 0.77}) {
      const std::vector<double> x{a, b};
      CHECK(w.phi(x, p) < 0.0);
      CHECK(w.xi(x, p) > 0.0);
      CHECK(w.r(x, s, p) * w.rho(x, s, p) == doctest::Approx(1.0).epsilon(1e-14));

      const double e = 1e-5;
      for (int i = 0; i < 2; ++i) {
        std::vector<double> xp = x, xm = x;
        xp[i] += e;
        xm[i] -= e;
        const double fd = (w.rho(xp, s, p) - w.rho(xm, s, p)) / (2 * e);
        CHECK(w.drho(x, i, s, p) == doctest::Approx(fd).epsilon(1e-6));
        for (int j = 0; j < 2; ++j) {
          const double fd2 = (w.drho(xp, j, s, p) - w.drho(xm, j, s, p)) / (2 * e);
          CHECK(w.d2rho(x, i, j, s, p) == doctest::Approx(fd2).epsilon(1e-6).scale(1e-8));
          const double fd3 = (w.r(xp, s, p) * w.drho(xp, j, s, p) -
                              w.r(xm, s, p) * w.drho(xm, j, s, p)) /
                             (2 * e);
          CHECK(w.d_r_drho(x, i, j, s, p) == doctest::Approx(fd3).epsilon(1e-6).scale(1e-8));
        }
      }
    }
  }
}

TEST_CASE("build_psi: rejects G1 outside the cube") {
  const Mesh m(2, 7);
  CHECK_THROWS_AS(build_psi(m, Box{{0.5, 0.2}, {1.4, 0.6}}), InvalidArgument);
}

TEST_CASE("carleman params validation") {
  CarlemanParams p;
  p.K_psi = 3.0;
  CHECK_THROWS_AS(p.validate(3.0), InvalidArgument);
  p.K_psi = 3.1;
  CHECK_NOTHROW(p.validate(3.0));
  p.delta = 0.5;
  CHECK_THROWS_AS(p.validate(3.0), InvalidArgument);
  p.delta = 0.25;
  p.tau = 0.5;
  CHECK_THROWS_AS(p.validate(3.0), InvalidArgument);
}

TEST_CASE("weight rates are second order") {
  for (int n : {1, 2}) {
    const WeightField w(std::vector<double>(n, 0.5), 1.0 + n);
    CarlemanParams p;
    p.K_psi = w.max_over_cube() + 0.1;
    const RateReport rep = verify_weight_rates(n, 31, 3, w, p);
    CHECK(rep.min_order() >= 1.7);
    CHECK(rep.max_order() <= 2.3);
  }
}

TEST_CASE("weight rates with lambda = 2") {
  const WeightField w({0.5, 0.5}, 3.0);
  CarlemanParams p;
  p.lambda = 2.0;
  p.K_psi = 3.1;
  const RateReport rep = verify_weight_rates(2, 63, 3, w, p);
  for (const RateRow& r : rep.rows) {
    if (r.identity == "r*A_iD_i rho" && !std::isnan(r.observed_order)) {
      CHECK(r.observed_order == doctest::Approx(2.0).epsilon(0.15));
    }
  }
}

TEST_CASE("weight rates: smallness guard") {
  const WeightField w({0.5, 0.5}, 3.0);
  CarlemanParams p;
  p.K_psi = 3.1;
  p.tau = 10.0;
  CHECK_THROWS_AS(verify_weight_rates(2, 3, 3, w, p), InvalidArgument);
}
