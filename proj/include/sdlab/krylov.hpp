#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

namespace sdlab {

using KrylovVector = Eigen::VectorXd;
using LinearMap = std::function<KrylovVector(const KrylovVector&)>;
using InnerProduct = std::function<double(const KrylovVector&, const KrylovVector&)>;

struct KrylovResult {
  KrylovVector x;
  int iterations = 0;
  int operator_applications = 0;
  /// Residual norm before the first and after every iteration.
  std::vector<double> residuals;
  /// ‖b − Ax‖ recomputed at exit.
  double true_residual = 0.0;
  bool converged = false;
};

/// Conjugate residual iteration for A self-adjoint and positive definite in
/// `dot`. Residual norms are non-increasing. Stops once
/// ‖r‖ ≤ tol · threshold(x), where threshold defaults to ‖b‖; the final
/// residual is recomputed from b − Ax and the iteration restarts if drift
/// pushed it back above the threshold.
KrylovResult conjugate_residual(const LinearMap& A, const KrylovVector& b, const InnerProduct& dot,
                                double tol, int max_iter,
                                const std::function<double(const KrylovVector&)>& threshold = {});

}  // namespace sdlab
