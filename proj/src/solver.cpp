#include "sdlab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/SparseLU>

#include "sdlab/errors.hpp"
#include "sdlab/parallel.hpp"

namespace sdlab {

Coefficients Coefficients::heat(const Mesh& mesh) {
  return {DriftCoefficients::heat(mesh), MeshFn(mesh, Region::primal())};
}

void Coefficients::validate(const Mesh& mesh) const {
  drift.validate(mesh);
  if (!(a3.mesh() == mesh) || !(a3.region() == Region::primal())) {
    throw InvalidArgument("a3 must live on the primal mesh");
  }
}

void validate_n_star(int n, double n_star) {
  if (n == 2 && !(n_star > 2.0)) throw InvalidArgument("n_star must exceed 2 when n = 2");
  if (n > 2 && !(n_star >= n)) throw InvalidArgument("n_star must be at least n when n > 2");
}

ControlPair ControlPair::zero(const Mesh& mesh, const ScenarioTree& tree) {
  return {AdaptedProcess(mesh, Region::primal(), tree.steps() - 1),
          AdaptedProcess(mesh, Region::primal(), tree.steps() - 1)};
}

double DualityReport::scale() const {
  const double s = std::abs(terminal) + std::abs(initial) + std::abs(control);
  return s > 0.0 ? s : 1.0;
}

// ---------------------------------------------------------------------------

struct StochasticSolver::Factorizations {
  using ColMat = Eigen::SparseMatrix<double, Eigen::ColMajor>;
  Eigen::SparseLU<ColMat> forward;    // I − Δt A
  Eigen::SparseLU<ColMat> backward;   // I − Δt Aᵀ
};

StochasticSolver::StochasticSolver(const Mesh& mesh, Coefficients coeffs, const ScenarioTree& tree,
                                   const Box& control_box, SolverOptions options)
    : mesh_(mesh),
      coeffs_(std::move(coeffs)),
      tree_(tree),
      options_(options),
      drift_(),
      mask_(indicator(mesh, Region::primal(), control_box)) {
  coeffs_.validate(mesh_);
  drift_ = drift_operator(mesh_, coeffs_.drift);
  drift_transpose_ = SparseOp(drift_.matrix.transpose());

  if (options_.scheme == TimeScheme::explicit_euler) {
    const double cfl = cfl_number();
    if (cfl > 1.0) {
      throw CflViolation("explicit scheme unstable: CFL number " + std::to_string(cfl) +
                             " > 1; admissible dt <= " + std::to_string(admissible_dt()) +
                             " (K >= " +
                             std::to_string(static_cast<long>(
                                 std::ceil(tree_.horizon() / admissible_dt()))) +
                             ")",
                         admissible_dt());
    }
  } else {
    lu_ = std::make_unique<Factorizations>();
    const auto n = static_cast<Eigen::Index>(mesh_.count(Region::primal()));
    Factorizations::ColMat I(n, n);
    I.setIdentity();
    Factorizations::ColMat fwd = I - tree_.dt() * Factorizations::ColMat(drift_.matrix);
    Factorizations::ColMat bwd = I - tree_.dt() * Factorizations::ColMat(drift_transpose_);
    lu_->forward.compute(fwd);
    lu_->backward.compute(bwd);
    if (lu_->forward.info() != Eigen::Success || lu_->backward.info() != Eigen::Success) {
      throw InvalidArgument("implicit drift matrix I - dt*A is singular");
    }
  }
}

StochasticSolver::~StochasticSolver() = default;
StochasticSolver::StochasticSolver(StochasticSolver&&) noexcept = default;

double StochasticSolver::cfl_number() const {
  return tree_.dt() / admissible_dt();
}

double StochasticSolver::admissible_dt() const {
  const double h = mesh_.h();
  double rate = 0.0;
  for (int i = 0; i < mesh_.dim(); ++i) {
    double gmax = 0.0, amax = 0.0;
    for (double g : coeffs_.drift.gamma[i].values()) gmax = std::max(gmax, g);
    for (double a : coeffs_.drift.a1[i].values()) amax = std::max(amax, std::abs(a));
    rate += 2.0 * gmax / (h * h) + amax / h;
  }
  double a2max = 0.0;
  for (double a : coeffs_.drift.a2.values()) a2max = std::max(a2max, std::abs(a));
  rate += a2max;
  return 1.0 / rate;
}

void StochasticSolver::apply_propagator(std::span<const double> in, std::span<double> out) const {
  const auto n = static_cast<Eigen::Index>(in.size());
  Eigen::Map<const Eigen::VectorXd> x(in.data(), n);
  Eigen::Map<Eigen::VectorXd> y(out.data(), n);
  if (options_.scheme == TimeScheme::explicit_euler) {
    y.noalias() = drift_.matrix * x;
    y = x + tree_.dt() * y;
  } else {
    y = lu_->forward.solve(x);
  }
}

void StochasticSolver::apply_propagator_transpose(std::span<const double> in,
                                                  std::span<double> out) const {
  const auto n = static_cast<Eigen::Index>(in.size());
  Eigen::Map<const Eigen::VectorXd> x(in.data(), n);
  Eigen::Map<Eigen::VectorXd> y(out.data(), n);
  if (options_.scheme == TimeScheme::explicit_euler) {
    y.noalias() = drift_transpose_ * x;
    y = x + tree_.dt() * y;
  } else {
    y = lu_->backward.solve(x);
  }
}

void StochasticSolver::check_control(const ControlPair& ctl) const {
  const int last = tree_.steps() - 1;
  for (const AdaptedProcess* p : {&ctl.u, &ctl.v}) {
    if (!(p->mesh() == mesh_) || !(p->region() == Region::primal()) || p->last_level() != last) {
      throw InvalidArgument("controls must be primal processes on levels 0..K-1");
    }
  }
  const std::size_t n = mesh_.count(Region::primal());
  for (int k = 0; k <= last; ++k) {
    auto lvl = ctl.u.level(k);
    for (std::size_t q = 0; q < lvl.size(); ++q) {
      if (lvl[q] != 0.0 && mask_[q % n] == 0.0) {
        throw InvalidArgument("drift control u is nonzero outside G_0 at level " +
                              std::to_string(k));
      }
    }
  }
}

AdaptedProcess StochasticSolver::solve_forward(const MeshFn& y0, const ControlPair& ctl) const {
  check_control(ctl);
  return forward_impl(y0, ControlSource::explicit_pair, &ctl, nullptr);
}

AdaptedProcess StochasticSolver::solve_forward(const MeshFn& y0) const {
  return forward_impl(y0, ControlSource::none, nullptr, nullptr);
}

AdaptedProcess StochasticSolver::solve_forward_feedback(const MeshFn& y0,
                                                        const BackwardPair& adj) const {
  return forward_impl(y0, ControlSource::feedback, nullptr, &adj);
}

AdaptedProcess StochasticSolver::forward_impl(const MeshFn& y0, ControlSource src,
                                              const ControlPair* ctl,
                                              const BackwardPair* adj) const {
  if (!(y0.mesh() == mesh_) || !(y0.region() == Region::primal())) {
    throw InvalidArgument("initial state must be a primal function on the solver mesh");
  }
  const int K = tree_.steps();
  const double dt = tree_.dt();
  const double sq = tree_.sqrt_dt();
  const std::size_t n = mesh_.count(Region::primal());
  AdaptedProcess y(mesh_, Region::primal(), K, options_.memory_budget);
  std::copy(y0.values().begin(), y0.values().end(), y.at(0, 0).begin());
  const auto a3 = coeffs_.a3.values();
  const auto mask = mask_.values();

  for (int k = 0; k < K; ++k) {
    parallel_for(tree_.nodes_at(k), options_.threads, [&](std::size_t begin, std::size_t end) {
      std::vector<double> drift(n), noise(n);
      for (std::size_t j = begin; j < end; ++j) {
        auto yk = y.at(k, j);
        apply_propagator(yk, drift);
        for (std::size_t q = 0; q < n; ++q) noise[q] = a3[q] * yk[q];
        if (src == ControlSource::explicit_pair) {
          auto u = ctl->u.at(k, j);
          auto v = ctl->v.at(k, j);
          for (std::size_t q = 0; q < n; ++q) {
            drift[q] += dt * mask[q] * u[q];
            noise[q] += v[q];
          }
        } else if (src == ControlSource::feedback) {
          auto m = adj->m.at(k, j);
          auto Z = adj->Z.at(k, j);
          for (std::size_t q = 0; q < n; ++q) {
            drift[q] -= dt * mask[q] * m[q];
            noise[q] -= Z[q];
          }
        }
        auto plus = y.at(k + 1, 2 * j);
        auto minus = y.at(k + 1, 2 * j + 1);
        for (std::size_t q = 0; q < n; ++q) {
          plus[q] = drift[q] + sq * noise[q];
          minus[q] = drift[q] - sq * noise[q];
        }
      }
    });
  }
  return y;
}

BackwardPair StochasticSolver::solve_backward(const AdaptedProcess& z_terminal_levels) const {
  const int K = tree_.steps();
  if (!(z_terminal_levels.mesh() == mesh_) || z_terminal_levels.last_level() != K) {
    throw InvalidArgument("terminal datum must be given on level K of the solver tree");
  }
  auto leaves = z_terminal_levels.level(K);
  return solve_backward(LeafVector(
      Eigen::Map<const Eigen::VectorXd>(leaves.data(), static_cast<Eigen::Index>(leaves.size()))));
}

BackwardPair StochasticSolver::solve_backward(const LeafVector& z_T) const {
  const int K = tree_.steps();
  const double dt = tree_.dt();
  const double sq = tree_.sqrt_dt();
  const std::size_t n = mesh_.count(Region::primal());
  if (static_cast<std::size_t>(z_T.size()) != leaf_size()) {
    throw InvalidArgument("terminal datum has the wrong size");
  }
  BackwardPair out{AdaptedProcess(mesh_, Region::primal(), K, options_.memory_budget),
                   AdaptedProcess(mesh_, Region::primal(), K - 1, options_.memory_budget),
                   AdaptedProcess(mesh_, Region::primal(), K - 1, options_.memory_budget)};
  std::copy(z_T.data(), z_T.data() + z_T.size(), out.z.level(K).begin());
  const auto a3 = coeffs_.a3.values();

  for (int k = K - 1; k >= 0; --k) {
    parallel_for(tree_.nodes_at(k), options_.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t j = begin; j < end; ++j) {
        auto m = out.m.at(k, j);
        auto Z = out.Z.at(k, j);
        martingale_parts(out.z.at(k + 1, 2 * j), out.z.at(k + 1, 2 * j + 1), sq, m, Z);
        auto zk = out.z.at(k, j);
        apply_propagator_transpose(m, zk);
        for (std::size_t q = 0; q < n; ++q) zk[q] += dt * a3[q] * Z[q];
      }
    });
  }
  return out;
}

DualityReport StochasticSolver::duality(const MeshFn& y0, const AdaptedProcess& y,
                                        const ControlPair& ctl, const BackwardPair& adj) const {
  const int K = tree_.steps();
  const double hn = mesh_.cell_measure(Region::primal());
  DualityReport rep;
  {
    auto yl = y.level(K);
    auto zl = adj.z.level(K);
    double s = 0.0;
    for (std::size_t q = 0; q < yl.size(); ++q) s += yl[q] * zl[q];
    rep.terminal = std::ldexp(s, -K) * hn;
  }
  {
    auto z0 = adj.z.at(0, 0);
    double s = 0.0;
    for (std::size_t q = 0; q < z0.size(); ++q) s += y0[q] * z0[q];
    rep.initial = s * hn;
  }
  const std::size_t n = mesh_.count(Region::primal());
  double ctl_sum = 0.0;
  for (int k = 0; k < K; ++k) {
    auto u = ctl.u.level(k);
    auto v = ctl.v.level(k);
    auto m = adj.m.level(k);
    auto Z = adj.Z.level(k);
    double s = 0.0;
    for (std::size_t q = 0; q < u.size(); ++q) s += mask_[q % n] * u[q] * m[q] + v[q] * Z[q];
    ctl_sum += std::ldexp(s, -k);
  }
  rep.control = tree_.dt() * hn * ctl_sum;
  return rep;
}

std::size_t StochasticSolver::leaf_size() const {
  return tree_.nodes_at(tree_.steps()) * mesh_.count(Region::primal());
}

LeafVector StochasticSolver::leaves(const AdaptedProcess& p) const {
  auto l = p.level(tree_.steps());
  return Eigen::Map<const Eigen::VectorXd>(l.data(), static_cast<Eigen::Index>(l.size()));
}

double StochasticSolver::leaf_inner(const LeafVector& a, const LeafVector& b) const {
  return std::ldexp(a.dot(b), -tree_.steps()) * mesh_.cell_measure(Region::primal());
}

}  // namespace sdlab
