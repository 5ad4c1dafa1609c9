#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "sdlab/errors.hpp"
#include "sdlab/krylov.hpp"

using namespace sdlab;

TEST_CASE("conjugate residual on a weighted SPD system") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> G;
  const int n = 12;
  Eigen::MatrixXd B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = G(rng);
  const Eigen::MatrixXd S = B.transpose() * B + 0.5 * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 + (i % 3);
  // A = W^{-1} S is self-adjoint in <a, b> = aᵀ W b
  const Eigen::MatrixXd A = w.cwiseInverse().asDiagonal() * S;
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) b[i] = G(rng);

  const KrylovResult r = conjugate_residual(
      [&](const KrylovVector& x) { KrylovVector y = A * x; return y; }, b,
      [&](const KrylovVector& x, const KrylovVector& y) { return x.dot(w.asDiagonal() * y); },
      1e-12, 200);
  CHECK(r.converged);
  const Eigen::VectorXd x = S.ldlt().solve(w.asDiagonal() * b);
  CHECK((r.x - x).norm() <= 1e-9 * x.norm());
  REQUIRE(r.residuals.size() >= 2);
  for (std::size_t i = 1; i < r.residuals.size(); ++i) {
    CHECK(r.residuals[i] <= r.residuals[i - 1] * (1 + 1e-12));
  }
  CHECK(r.true_residual <= 1e-12 * std::sqrt(b.dot(w.asDiagonal() * b)) * 1.0001);
}

TEST_CASE("conjugate residual: zero right-hand side and bad arguments") {
  const LinearMap id = [](const KrylovVector& x) { return x; };
  const InnerProduct dot = [](const KrylovVector& a, const KrylovVector& b) { return a.dot(b); };
  const KrylovResult r = conjugate_residual(id, KrylovVector::Zero(4), dot, 1e-10, 10);
  CHECK(r.converged);
  CHECK(r.x.norm() == 0.0);
  CHECK_THROWS_AS(conjugate_residual(id, KrylovVector::Ones(4), dot, 0.0, 10), InvalidArgument);
  CHECK_THROWS_AS(conjugate_residual(id, KrylovVector::Ones(4), dot, 1e-10, 0), InvalidArgument);
}
