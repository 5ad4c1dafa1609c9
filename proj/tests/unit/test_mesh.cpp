#include <cmath>
#include <random>

#include "doctest.h"
#include "sdlab/errors.hpp"
#include "sdlab/mesh.hpp"
#include "test_support.hpp"

using namespace sdlab;

TEST_CASE("build_mesh: smallest mesh") {
  const Mesh m = build_mesh(1, 1);
  CHECK(m.h() == 0.5);
  CHECK(m.count(Region::primal()) == 1);
  m.for_each_node(Region::primal(), [](std::size_t, std::span<const double> x) {
    CHECK(x[0] == 0.5);
  });
}

TEST_CASE("build_mesh: region cardinalities") {
  const Mesh m = build_mesh(2, 3);
  CHECK(m.count(Region::primal()) == 9);
  CHECK(m.count(Region::dual(0)) == 12);
  CHECK(m.count(Region::boundary(0)) == 6);

  const Mesh m3 = build_mesh(3, 2);
  CHECK(m3.count(Region::primal()) == 8);
  CHECK(m3.h() == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  for (int n = 1; n <= 3; ++n) {
    for (int N = 1; N <= 15; ++N) {
      const Mesh mm(n, N);
      CHECK(std::abs(mm.h() * (N + 1) - 1.0) < 1e-15);
      const auto pw = [](int b, int e) {
        std::size_t r = 1;
        for (int k = 0; k < e; ++k) r *= static_cast<std::size_t>(b);
        return r;
      };
      CHECK(mm.count(Region::primal()) == pw(N, n));
      for (int i = 0; i < n; ++i) {
        CHECK(mm.count(Region::dual(i)) == static_cast<std::size_t>(N + 1) * pw(N, n - 1));
        CHECK(mm.count(Region::boundary(i)) == 2 * pw(N, n - 1));
      }
    }
  }
}

TEST_CASE("build_mesh: coordinates of dual and boundary nodes") {
  const Mesh m = build_mesh(2, 3);
  const double h = m.h();
  m.for_each_node(Region::dual(1), [&](std::size_t k, std::span<const double> x) {
    // axis 1 half-integer multiples, axis 0 integer multiples
    const double r1 = x[1] / h - 0.5;
    CHECK(std::abs(r1 - std::round(r1)) < 1e-12);
    CHECK(x[1] >= 0.5 * h - 1e-15);
    CHECK(x[1] <= 3.5 * h + 1e-15);
    const double r0 = x[0] / h;
    CHECK(std::abs(r0 - std::round(r0)) < 1e-12);
    std::array<int, kMaxDim> idx{};
    m.multi_index(Region::dual(1), k, idx);
    CHECK(m.flat_index(Region::dual(1), idx) == k);
  });
  m.for_each_node(Region::boundary(0), [&](std::size_t, std::span<const double> x) {
    CHECK((x[0] == 0.0 || x[0] == 1.0));
  });
}

TEST_CASE("build_mesh: rejects degenerate sizes") {
  CHECK_THROWS_AS(build_mesh(0, 3), InvalidArgument);
  CHECK_THROWS_AS(build_mesh(2, 0), InvalidArgument);
}

TEST_CASE("integral") {
  {
    const Mesh m(1, 1);
    MeshFn f(m, Region::primal(), {2.0});
    CHECK(integral(f) == doctest::Approx(1.0));
  }
  const Mesh m(2, 3);
  CHECK(integral(MeshFn::constant(m, Region::primal(), 1.0)) == doctest::Approx(9.0 / 16.0));
  CHECK(integral(MeshFn::constant(m, Region::boundary(0), 1.0)) == doctest::Approx(6.0 / 4.0));
  // sub-box selecting the single center node (0.5, 0.5)
  const Box center{{0.4, 0.4}, {0.6, 0.6}};
  CHECK(integral(MeshFn::constant(m, Region::primal(), 1.0), center) ==
        doctest::Approx(1.0 / 16.0));
}

TEST_CASE("norms") {
  const Mesh m(2, 4);
  CHECK(lp_norm(MeshFn::constant(m, Region::primal(), -3.0), INFINITY) == 3.0);

  const Mesh m1(1, 1);
  MeshFn f(m1, Region::primal(), {1.0});
  CHECK(norm(f, 2.0, NormKind::Lp) == doctest::Approx(std::sqrt(0.5)));
  // D-values ±2 on the two dual nodes: 0.5 + 0.5 * (4 + 4)
  CHECK(norm(f, 2.0, NormKind::W1p) == doctest::Approx(std::sqrt(4.5)));
  // p = inf: max|u| + max|D u| = 1 + 2
  CHECK(w1p_norm(f, INFINITY) == doctest::Approx(3.0));
  CHECK_THROWS_AS(lp_norm(f, 0.5), InvalidArgument);
  CHECK_THROWS_AS(w1p_norm(MeshFn(m1, Region::dual(0)), 2.0), InvalidArgument);
}

TEST_CASE("normal and trace") {
  const Mesh m(1, 1);
  const double a = 0.7, b = -1.3;
  MeshFn dual(m, Region::dual(0), {a, b});  // nodes 0.25, 0.75
  const NormalTrace nt = normal_and_trace(dual);
  // boundary(0) nodes in order x = 0, x = 1
  CHECK(nt.normal[0] == -1.0);
  CHECK(nt.normal[1] == 1.0);
  CHECK(nt.trace[0] == a);
  CHECK(nt.trace[1] == b);

  const Mesh m2(2, 4);
  const MeshFn c = MeshFn::constant(m2, Region::dual(1), 2.5);
  const MeshFn tc = trace(c);
  for (double v : tc.values()) CHECK(v == 2.5);
  CHECK_THROWS_AS(trace(MeshFn(m2, Region::primal())), InvalidArgument);
}

TEST_CASE("mixed-region arithmetic is rejected") {
  const Mesh m(2, 3);
  MeshFn a(m, Region::primal());
  MeshFn b(m, Region::dual(0));
  CHECK_THROWS_AS(a += b, InvalidArgument);
  CHECK_THROWS_AS(inner(a, b), InvalidArgument);
  CHECK_THROWS_AS(MeshFn(m, Region::primal(), std::vector<double>(3)), InvalidArgument);
  MeshFn c(Mesh(2, 4), Region::primal());
  CHECK_THROWS_AS(a += c, InvalidArgument);
}

TEST_CASE("box validation") {
  CHECK_THROWS_AS(Box({{0.5}, {0.4}}).validate(1), InvalidArgument);
  CHECK_THROWS_AS(Box({{0.1, 0.1}, {0.4, 1.2}}).validate(2), InvalidArgument);
  CHECK_THROWS_AS(Box::cube(2, 0.1, 0.3).validate(3), InvalidArgument);
  CHECK(Box::cube(2, 0.3, 0.4).strictly_inside(Box::cube(2, 0.2, 0.5)));
  CHECK_FALSE(Box::cube(2, 0.2, 0.4).strictly_inside(Box::cube(2, 0.2, 0.5)));
}
