#include "sdlab/krylov.hpp"

#include <cmath>

#include "sdlab/errors.hpp"

namespace sdlab {

KrylovResult conjugate_residual(const LinearMap& A, const KrylovVector& b, const InnerProduct& dot,
                                double tol, int max_iter,
                                const std::function<double(const KrylovVector&)>& threshold) {
  if (!(tol > 0.0)) throw InvalidArgument("Krylov tolerance must be positive");
  if (max_iter < 1) throw InvalidArgument("Krylov iteration limit must be at least 1");
  auto norm = [&](const KrylovVector& v) { return std::sqrt(std::max(dot(v, v), 0.0)); };
  const double bnorm = norm(b);
  auto target = [&](const KrylovVector& x) {
    return tol * (threshold ? threshold(x) : bnorm);
  };

  KrylovResult res;
  res.x = KrylovVector::Zero(b.size());
  res.residuals.push_back(bnorm);
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }

  constexpr int kMaxRestarts = 3;
  KrylovVector r = b;
  for (int restart = 0; restart <= kMaxRestarts && res.iterations < max_iter; ++restart) {
    KrylovVector Ar = A(r);
    ++res.operator_applications;
    KrylovVector p = r;
    KrylovVector Ap = Ar;
    double rAr = dot(r, Ar);
    double rnorm = norm(r);
    while (res.iterations < max_iter && rnorm > target(res.x)) {
      const double ApAp = dot(Ap, Ap);
      if (!(ApAp > 0.0) || !(rAr > 0.0)) break;
      const double alpha = rAr / ApAp;
      res.x += alpha * p;
      r -= alpha * Ap;
      ++res.iterations;
      rnorm = norm(r);
      res.residuals.push_back(rnorm);
      if (rnorm <= target(res.x)) break;
      Ar = A(r);
      ++res.operator_applications;
      const double rAr_new = dot(r, Ar);
      const double beta = rAr_new / rAr;
      rAr = rAr_new;
      p = r + beta * p;
      Ap = Ar + beta * Ap;
    }
    // true residual
    r = b - A(res.x);
    ++res.operator_applications;
    rnorm = norm(r);
    res.true_residual = rnorm;
    if (rnorm <= target(res.x)) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

}  // namespace sdlab
