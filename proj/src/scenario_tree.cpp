#include "sdlab/scenario_tree.hpp"

#include <algorithm>
#include <string>

#include "sdlab/errors.hpp"

namespace sdlab {

ScenarioTree::ScenarioTree(int K, double T) : K_(K), T_(T), dt_(0.0), sqrt_dt_(0.0) {
  if (K < 1 || K > 40) throw InvalidArgument("scenario tree needs 1 <= K <= 40 steps");
  if (!(T > 0.0)) throw InvalidArgument("time horizon T must be positive");
  dt_ = T / K;
  sqrt_dt_ = std::sqrt(dt_);
}

double ScenarioTree::brownian(int level, std::size_t j) const {
  double b = 0.0;
  for (int bit = 0; bit < level; ++bit) b += ((j >> bit) & 1U) ? -sqrt_dt_ : sqrt_dt_;
  return b;
}

AdaptedProcess::AdaptedProcess(const Mesh& mesh, Region region, int last_level,
                               std::size_t memory_budget)
    : mesh_(mesh), region_(region), last_level_(last_level), stride_(mesh.count(region)) {
  if (last_level < 0 || last_level > 40) throw InvalidArgument("adapted process level out of range");
  const std::size_t nodes = (std::size_t{1} << (last_level + 1)) - 1;
  const double bytes = static_cast<double>(nodes) * static_cast<double>(stride_) * sizeof(double);
  if (bytes > static_cast<double>(memory_budget)) {
    throw BudgetExceeded("adapted process needs " + std::to_string(bytes / (1 << 20)) +
                         " MiB, budget is " + std::to_string(memory_budget >> 20) + " MiB");
  }
  data_.assign(nodes * stride_, 0.0);
}

std::span<double> AdaptedProcess::at(int level, std::size_t j) {
  return {data_.data() + offset(level) + j * stride_, stride_};
}

std::span<const double> AdaptedProcess::at(int level, std::size_t j) const {
  return {data_.data() + offset(level) + j * stride_, stride_};
}

std::span<double> AdaptedProcess::level(int level) {
  return {data_.data() + offset(level), (std::size_t{1} << level) * stride_};
}

std::span<const double> AdaptedProcess::level(int level) const {
  return {data_.data() + offset(level), (std::size_t{1} << level) * stride_};
}

MeshFn AdaptedProcess::value(int level, std::size_t j) const {
  auto s = at(level, j);
  return MeshFn(mesh_, region_, std::vector<double>(s.begin(), s.end()));
}

void AdaptedProcess::set(int level, std::size_t j, const MeshFn& f) {
  if (!(f.mesh() == mesh_) || !(f.region() == region_)) {
    throw InvalidArgument("adapted process value on the wrong region");
  }
  std::copy(f.values().begin(), f.values().end(), at(level, j).begin());
}

namespace {
void check_level(const AdaptedProcess& p, int level) {
  if (level < 0 || level > p.last_level()) {
    throw InvalidArgument("level " + std::to_string(level) + " outside 0.." +
                          std::to_string(p.last_level()));
  }
}
}  // namespace

double expectation(const AdaptedProcess& p, int level,
                   const std::function<double(std::span<const double>)>& functional) {
  check_level(p, level);
  double s = 0.0;
  const std::size_t count = std::size_t{1} << level;
  for (std::size_t j = 0; j < count; ++j) s += functional(p.at(level, j));
  return std::ldexp(s, -level);
}

double expectation(const AdaptedProcess& p, int level,
                   const std::function<double(const MeshFn&)>& functional) {
  check_level(p, level);
  double s = 0.0;
  const std::size_t count = std::size_t{1} << level;
  for (std::size_t j = 0; j < count; ++j) s += functional(p.value(level, j));
  return std::ldexp(s, -level);
}

double expected_energy(const AdaptedProcess& p, int level) {
  check_level(p, level);
  double s = 0.0;
  for (double v : p.level(level)) s += v * v;
  return std::ldexp(s, -level) * p.mesh().cell_measure(p.region());
}

void martingale_parts(std::span<const double> z_plus, std::span<const double> z_minus,
                      double sqrt_dt, std::span<double> m, std::span<double> Z) {
  const double scale = 0.5 / sqrt_dt;
  for (std::size_t k = 0; k < z_plus.size(); ++k) {
    m[k] = 0.5 * (z_plus[k] + z_minus[k]);
    Z[k] = scale * (z_plus[k] - z_minus[k]);
  }
}

}  // namespace sdlab
