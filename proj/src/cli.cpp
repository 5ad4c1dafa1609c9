#include "sdlab/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "sdlab/carleman.hpp"
#include "sdlab/counterexample.hpp"
#include "sdlab/errors.hpp"
#include "sdlab/hum.hpp"
#include "sdlab/observability.hpp"
#include "sdlab/rng.hpp"
#include "sdlab/selftest.hpp"
#include "sdlab/sobolev.hpp"
#include "sdlab/weights.hpp"

namespace sdlab::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kDefaultSeed = 1;

// Defaults per subcommand. Every accepted key appears here.
const std::map<std::string, json>& defaults() {
  static const std::map<std::string, json> table = [] {
    const json system = {
        {"n", 2},           {"N", json::array({7, 11, 15})},
        {"K", 8},           {"T", 1.0},
        {"gamma", 0.1},     {"a1", 0.0},
        {"a2", 0.0},        {"a3", 0.5},
        {"scheme", "implicit"},
        {"g0", {{"lo", 0.2}, {"hi", 0.8}}},
        {"phi", "h2"},      {"phi_c", 1.0},
        {"memory_budget_mib", 2048},
    };
    std::map<std::string, json> t;
    t["counterexample"] = {
        {"N", 7},          {"K", 10},          {"T", 0.01},
        {"scheme", "explicit"},
        {"g0", {{"lo", {0.55, 0.05}}, {"hi", {0.95, 0.45}}}},
        {"trials", 20},    {"noise", 0.5},     {"control_scale", 1.0},
        {"factor_h", 0.25}, {"factor_T", 1.0}, {"factor_K0", 16384}, {"factor_levels", 4},
        {"memory_budget_mib", 2048},
    };
    t["carleman-sweep"] = {
        {"n", 2},        {"N", json::array({7, 11, 15})},
        {"tau_multiples", json::array({1.0, 2.0})},
        {"T", 1.0},      {"K", 6},      {"delta", 0.25},   {"lambda", 1.0},
        {"K_psi_margin", 0.1},
        {"g0", {{"lo", 0.1}, {"hi", 0.4}}},
        {"g1", {{"lo", 0.15}, {"hi", 0.35}}},
        {"epsilon", 1.0}, {"samples", 50},
    };
    json obs = system;
    obs.update({{"probes", 4}, {"ascent_steps", 8}, {"inner_tol", 1e-8}, {"polarization_pairs", 3}});
    t["observability"] = obs;
    json hum = system;
    hum.update({{"cg_tol", 1e-10}, {"cg_max_iter", 500}, {"y0", "smooth"}, {"probes", 2},
                {"gradient_eps", 1e-3}});
    t["hum"] = hum;
    t["sobolev"] = {
        {"n", 2}, {"p", 2.0}, {"p_star", 4.0}, {"N", json::array({7, 15, 31})},
        {"probes", 8}, {"ascent_steps", 60}, {"lw_N", 7}, {"lw_trials", 100},
    };
    t["weights-rates"] = {
        {"n", 2},  {"N0", 31},  {"levels", 3}, {"lambda", 1.0}, {"tau", 1.0},
        {"delta", 0.25}, {"T", 1.0}, {"K_psi_margin", 0.1},
        {"g1", {{"lo", 0.3}, {"hi", 0.7}}},
        {"smallness", 1.0}, {"order_lo", 1.7}, {"order_hi", 2.3},
    };
    t["calculus-selftest"] = {
        {"dims", json::array({1, 2, 3})},
        {"sizes", json::array({1, 2, 5, 9, 15})},
        {"samples", 8},
        {"tolerance", 1e-12},
    };
    return t;
  }();
  return table;
}

int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

// Resolved configuration: defaults, then the file, then the overrides.
class Config {
 public:
  Config(const std::string& sub, const std::optional<fs::path>& file, const json& overrides) {
    data_ = defaults().at(sub);
    if (file) {
      std::ifstream in(*file);
      if (!in) throw InvalidArgument("cannot read config file " + file->string());
      std::stringstream ss;
      ss << in.rdbuf();
      text_ = ss.str();
      source_ = file->string();
      json parsed;
      try {
        parsed = json::parse(text_);
      } catch (const json::parse_error& e) {
        const int line = line_of_offset(text_, e.byte > 0 ? e.byte - 1 : 0);
        std::size_t start = text_.rfind('\n', e.byte > 1 ? e.byte - 2 : 0);
        start = start == std::string::npos ? 0 : start + 1;
        const int column = static_cast<int>(e.byte - start);
        throw InvalidArgument(source_ + ":" + std::to_string(line) + ":" + std::to_string(column) +
                              ": malformed JSON (" + e.what() + ")");
      }
      if (!parsed.is_object()) throw InvalidArgument(source_ + ": config must be a JSON object");
      for (auto it = parsed.begin(); it != parsed.end(); ++it) {
        if (it.key() == "seed") {
          file_seed_ = it.value();
          continue;
        }
        check_known(sub, it.key(), false);
        data_[it.key()] = it.value();
      }
    }
    for (auto it = overrides.begin(); it != overrides.end(); ++it) {
      check_known(sub, it.key(), true);
      data_[it.key()] = it.value();
      from_flag_.push_back(it.key());
    }
  }

  const json& data() const { return data_; }
  std::optional<json> file_seed() const { return file_seed_; }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw InvalidArgument("field '" + key + "' (" + where(key) + "): " + msg);
  }

  template <class T>
  T get(const std::string& key) const {
    const json& v = data_.at(key);
    try {
      if constexpr (std::is_same_v<T, int> || std::is_same_v<T, long>) {
        if (!v.is_number_integer()) fail(key, "expected an integer, got " + v.dump());
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) fail(key, "expected a number, got " + v.dump());
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) fail(key, "expected a string, got " + v.dump());
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      fail(key, std::string("wrong type: ") + e.what());
    }
  }

  int positive_int(const std::string& key, int min = 1) const {
    const int v = get<int>(key);
    if (v < min) fail(key, "must be >= " + std::to_string(min));
    return v;
  }

  double positive(const std::string& key) const {
    const double v = get<double>(key);
    if (!(v > 0.0) || !std::isfinite(v)) fail(key, "must be a positive finite number");
    return v;
  }

  /// A single integer or a list of integers.
  std::vector<int> int_list(const std::string& key, int min = 1) const {
    const json& v = data_.at(key);
    std::vector<int> out;
    if (v.is_number_integer()) {
      out.push_back(v.get<int>());
    } else if (v.is_array() && !v.empty()) {
      for (const json& e : v) {
        if (!e.is_number_integer()) fail(key, "expected integers, got " + e.dump());
        out.push_back(e.get<int>());
      }
    } else {
      fail(key, "expected an integer or a nonempty list of integers");
    }
    for (int x : out) {
      if (x < min) fail(key, "entries must be >= " + std::to_string(min));
    }
    return out;
  }

  std::vector<double> number_list(const std::string& key) const {
    const json& v = data_.at(key);
    std::vector<double> out;
    if (v.is_number()) {
      out.push_back(v.get<double>());
    } else if (v.is_array() && !v.empty()) {
      for (const json& e : v) {
        if (!e.is_number()) fail(key, "expected numbers, got " + e.dump());
        out.push_back(e.get<double>());
      }
    } else {
      fail(key, "expected a number or a nonempty list of numbers");
    }
    return out;
  }

  /// {"lo": a, "hi": b} with a, b numbers (a cube) or length-n lists.
  Box box(const std::string& key, int n) const {
    const json& v = data_.at(key);
    if (!v.is_object() || !v.contains("lo") || !v.contains("hi") || v.size() != 2) {
      fail(key, "expected an object {\"lo\": ..., \"hi\": ...}");
    }
    auto side = [&](const char* s) {
      const json& e = v.at(s);
      if (e.is_number()) return std::vector<double>(static_cast<std::size_t>(n), e.get<double>());
      if (e.is_array() && static_cast<int>(e.size()) == n &&
          std::all_of(e.begin(), e.end(), [](const json& x) { return x.is_number(); })) {
        return e.get<std::vector<double>>();
      }
      fail(key, std::string("'") + s + "' must be a number or a list of " + std::to_string(n) +
                    " numbers");
    };
    Box b{side("lo"), side("hi")};
    try {
      b.validate(n);
    } catch (const InvalidArgument& e) {
      fail(key, e.what());
    }
    return b;
  }

  TimeScheme scheme(const std::string& key) const {
    const std::string s = get<std::string>(key);
    if (s == "explicit") return TimeScheme::explicit_euler;
    if (s == "implicit") return TimeScheme::implicit_drift;
    fail(key, "expected \"explicit\" or \"implicit\", got \"" + s + "\"");
  }

  std::size_t memory_budget() const {
    return static_cast<std::size_t>(positive_int("memory_budget_mib")) << 20;
  }

 private:
  void check_known(const std::string& sub, const std::string& key, bool flag) const {
    if (defaults().at(sub).contains(key)) return;
    std::string allowed;
    for (auto it = defaults().at(sub).begin(); it != defaults().at(sub).end(); ++it) {
      allowed += (allowed.empty() ? "" : ", ") + it.key();
    }
    const std::string at = flag ? "--" + key : where_in_file(key);
    throw InvalidArgument("unknown field '" + key + "' (" + at + ") for " + sub +
                          "; accepted: " + allowed + ", seed");
  }

  std::string where_in_file(const std::string& key) const {
    const std::size_t pos = text_.find("\"" + key + "\"");
    if (pos == std::string::npos) return source_;
    return source_ + ":" + std::to_string(line_of_offset(text_, pos));
  }

  std::string where(const std::string& key) const {
    if (std::find(from_flag_.begin(), from_flag_.end(), key) != from_flag_.end()) return "--" + key;
    if (!text_.empty() && text_.find("\"" + key + "\"") != std::string::npos) return where_in_file(key);
    return "default";
  }

  json data_;
  std::string text_;
  std::string source_;
  std::optional<json> file_seed_;
  std::vector<std::string> from_flag_;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// A table written as CSV and, optionally, as whitespace-separated plot data.
class Table {
 public:
  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  template <class... Ts>
  void row(const Ts&... cells) {
    std::vector<std::string> r;
    (r.push_back(cell(cells)), ...);
    if (r.size() != columns_.size()) throw std::logic_error("table row width mismatch");
    rows_.push_back(std::move(r));
  }

  void write_csv(const fs::path& path) const { write(path, ",", ""); }
  void write_dat(const fs::path& path) const { write(path, " ", "# "); }

 private:
  static std::string cell(double v) { return num(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }

  void write(const fs::path& path, const char* sep, const char* comment) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out << comment;
    for (std::size_t c = 0; c < columns_.size(); ++c) out << (c ? sep : "") << columns_[c];
    out << '\n';
    for (const auto& r : rows_) {
      for (std::size_t c = 0; c < r.size(); ++c) out << (c ? sep : "") << r[c];
      out << '\n';
    }
  }

  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

struct Context {
  const Config& cfg;
  std::uint64_t seed;
  int threads;
  fs::path out;
  std::ostream& log;
  json result = json::object();
  std::vector<std::string> failures;

  void check(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

double variation(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi / *lo;
}

// ---------------------------------------------------------------- system setup

struct System {
  Mesh mesh;
  StochasticSolver solver;
  double phi;
};

System build_system(const Context& ctx, int N) {
  const Config& c = ctx.cfg;
  const int n = c.positive_int("n");
  const Mesh mesh(n, N);
  const Box g0 = c.box("g0", n);
  Coefficients co = Coefficients::heat(mesh);
  const double gamma = c.positive("gamma");
  for (auto& g : co.drift.gamma) g = MeshFn::constant(mesh, g.region(), gamma);
  for (auto& a : co.drift.a1) a = MeshFn::constant(mesh, Region::primal(), c.get<double>("a1"));
  co.drift.a2 = MeshFn::constant(mesh, Region::primal(), c.get<double>("a2"));
  co.a3 = MeshFn::constant(mesh, Region::primal(), c.get<double>("a3"));
  const ScenarioTree tree(c.positive_int("K"), c.positive("T"));
  SolverOptions opt;
  opt.scheme = c.scheme("scheme");
  opt.threads = ctx.threads;
  opt.memory_budget = c.memory_budget();
  PhiRate rate;
  try {
    rate = PhiRate::parse(c.get<std::string>("phi"), c.positive("phi_c"));
  } catch (const InvalidArgument& e) {
    c.fail("phi", e.what());
  }
  StochasticSolver solver(mesh, std::move(co), tree, g0, opt);
  return {mesh, std::move(solver), rate(mesh.h())};
}

MeshFn initial_state(const Context& ctx, const Mesh& mesh) {
  const std::string kind = ctx.cfg.get<std::string>("y0");
  if (kind == "smooth") {
    return MeshFn::sample(mesh, Region::primal(), [](std::span<const double> x) {
      double s = 1.0, b = 1.0;
      for (double c : x) {
        s *= std::sin(std::numbers::pi * c);
        b *= 4.0 * c * (1.0 - c);
      }
      return s + 0.5 * b;
    });
  }
  if (kind == "checkerboard") {
    if (mesh.dim() != 2) ctx.cfg.fail("y0", "the checkerboard initial state needs n = 2");
    return build_checkerboard(mesh).psi;
  }
  if (kind == "random") {
    std::mt19937_64 rng = stream_rng(ctx.seed, Stream::initial_state, 0);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    MeshFn y(mesh, Region::primal());
    for (double& v : y.values()) v = U(rng);
    return y;
  }
  ctx.cfg.fail("y0", "expected \"smooth\", \"checkerboard\" or \"random\"");
}

LeafVector random_leaf(const StochasticSolver& s, std::mt19937_64& rng) {
  std::normal_distribution<double> G;
  LeafVector d(static_cast<Eigen::Index>(s.leaf_size()));
  for (Eigen::Index k = 0; k < d.size(); ++k) d[k] = G(rng);
  return d / std::sqrt(s.leaf_inner(d, d));
}

// ---------------------------------------------------------------- subcommands

void run_counterexample(Context& ctx) {
  const Config& c = ctx.cfg;
  const Mesh mesh(2, c.positive_int("N"));
  const Box g0 = c.box("g0", 2);
  try {
    require_off_diagonal(mesh, g0);
  } catch (const InvalidArgument& e) {
    c.fail("g0", e.what());
  }
  const ScenarioTree tree(c.positive_int("K"), c.positive("T"));
  SolverOptions opt;
  opt.scheme = c.scheme("scheme");
  opt.threads = ctx.threads;
  opt.memory_budget = c.memory_budget();
  const StochasticSolver solver(mesh, Coefficients::heat(mesh), tree, g0, opt);

  const CheckerboardMode mode = build_checkerboard(mesh);
  const double eigen_residual = verify_eigen(mode);

  MeshFn y0 = mode.psi;
  {
    std::mt19937_64 rng = stream_rng(ctx.seed, Stream::initial_state, 0);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const double noise = c.get<double>("noise");
    for (double& v : y0.values()) v += noise * U(rng);
  }

  const int trials = c.positive_int("trials", 0);
  const double scale = c.get<double>("control_scale");
  Table table({"trial", "measured", "predicted", "deviation"});
  double max_dev = 0.0, spread = 0.0, base = 0.0;
  for (int t = 0; t <= trials; ++t) {
    ControlPair ctl = ControlPair::zero(mesh, tree);
    if (t > 0) {
      std::mt19937_64 rng = stream_rng(ctx.seed, Stream::controls, static_cast<std::uint64_t>(t));
      std::uniform_real_distribution<double> U(-scale, scale);
      const MeshFn& mask = solver.control_mask();
      for (int k = 0; k < tree.steps(); ++k) {
        for (std::size_t j = 0; j < tree.nodes_at(k); ++j) {
          auto u = ctl.u.at(k, j);
          auto v = ctl.v.at(k, j);
          for (std::size_t q = 0; q < u.size(); ++q) {
            u[q] = mask[q] * U(rng);
            v[q] = U(rng);
          }
        }
      }
    }
    const ModeExperiment e = uncontrollable_mode_experiment(solver, mode, y0, ctl, g0);
    table.row(t, e.measured, e.predicted, e.deviation);
    max_dev = std::max(max_dev, e.deviation);
    if (t == 0) base = e.measured;
    spread = std::max(spread, std::abs(e.measured - base) / std::max(std::abs(base), 1e-300));
  }
  table.write_csv(ctx.out / "counterexample.csv");

  const std::vector<FactorRow> rows =
      factor_convergence(c.positive("factor_h"), c.positive("factor_T"),
                         c.get<long>("factor_K0"), c.positive_int("factor_levels", 2));
  Table ft({"K", "discrete", "continuous", "relative_error", "observed_order"});
  json orders = json::array();
  for (const FactorRow& r : rows) {
    ft.row(r.K, r.discrete, r.continuous, r.relative_error, r.observed_order);
    if (std::isfinite(r.observed_order)) orders.push_back(r.observed_order);
  }
  ft.write_csv(ctx.out / "factor.csv");
  ft.write_dat(ctx.out / "plotdata" / "factor.dat");

  const double eigen_tol = 1e-12 * std::max(1.0, std::abs(mode.eigenvalue));
  ctx.result["eigenvalue"] = mode.eigenvalue;
  ctx.result["eigen_residual"] = eigen_residual;
  ctx.result["step_factor"] = mode_step_factor(solver);
  ctx.result["control_trials"] = trials;
  ctx.result["max_deviation"] = max_dev;
  ctx.result["control_spread"] = spread;
  ctx.result["factor_orders"] = orders;
  ctx.check(eigen_residual <= eigen_tol, "eigen residual " + num(eigen_residual));
  ctx.check(max_dev <= 1e-10, "mode deviation " + num(max_dev));
  ctx.check(spread <= 1e-10, "control dependence " + num(spread));
}

void run_carleman(Context& ctx) {
  const Config& c = ctx.cfg;
  CarlemanSweepConfig s;
  s.n = c.positive_int("n");
  s.N = c.int_list("N");
  s.tau_multiples = c.number_list("tau_multiples");
  s.T = c.positive("T");
  s.K = c.positive_int("K");
  s.delta = c.positive("delta");
  s.lambda = c.positive("lambda");
  s.K_psi_margin = c.positive("K_psi_margin");
  s.g0 = c.box("g0", s.n);
  s.g1 = c.box("g1", s.n);
  if (!s.g1.strictly_inside(s.g0)) c.fail("g1", "must lie strictly inside g0");
  s.epsilon = c.positive("epsilon");
  s.samples = c.positive_int("samples", 0);
  s.seed = ctx.seed;
  s.threads = ctx.threads;
  const CarlemanReport rep = carleman_sweep(s);

  Table t({"h", "N", "tau", "smallness", "eligible", "samples", "max_ratio", "mean_ratio",
           "argmax", "gradient", "average", "zeroth", "observation", "source", "noise",
           "initial", "terminal", "log_scale"});
  bool finite = true;
  for (const CarlemanCell& cell : rep.cells) {
    const CarlemanTerms& w = cell.worst;
    t.row(cell.h, cell.N, cell.tau, cell.smallness, cell.eligible, cell.samples, cell.max_ratio,
          cell.mean_ratio, cell.argmax, w.gradient, w.average, w.zeroth, w.observation, w.source,
          w.noise, w.initial, w.terminal, w.log_scale);
    if (cell.eligible && !std::isfinite(cell.max_ratio)) finite = false;
  }
  t.write_csv(ctx.out / "carleman.csv");
  t.write_dat(ctx.out / "plotdata" / "carleman.dat");
  const int eligible = static_cast<int>(
      std::count_if(rep.cells.begin(), rep.cells.end(), [](const CarlemanCell& x) { return x.eligible; }));
  ctx.result["eligible_cells"] = eligible;
  ctx.result["variation"] = rep.variation();
  ctx.check(s.samples > 0, "empty sample set");
  ctx.check(eligible > 0, "no cell satisfies the smallness condition");
  ctx.check(finite, "non-finite ratio in an eligible cell");
}

void run_observability(Context& ctx) {
  const Config& c = ctx.cfg;
  const std::vector<int> Ns = c.int_list("N");
  const int probes = c.positive_int("probes");
  const int ascent = c.positive_int("ascent_steps", 0);
  const double inner_tol = c.positive("inner_tol");
  const int pairs = c.positive_int("polarization_pairs");
  Table t({"h", "phi", "C_est", "probes", "ascent_steps", "best_probe", "polarization_defect"});
  std::vector<double> cs;
  double worst_pol = 0.0;
  for (int N : Ns) {
    const System sys = build_system(ctx, N);
    const ObservabilityEstimate e =
        estimate_constant(sys.solver, sys.phi, probes, ascent, ctx.seed, inner_tol);
    const double pol = polarization_defect(sys.solver, sys.phi, ctx.seed, pairs);
    worst_pol = std::max(worst_pol, pol);
    t.row(e.h, e.phi, e.c_est, e.probes, e.ascent_steps, e.best_probe, pol);
    cs.push_back(e.c_est);
    ctx.log << "observability N=" << N << " C_est=" << num(e.c_est) << '\n';
  }
  t.write_csv(ctx.out / "observability.csv");
  t.write_dat(ctx.out / "plotdata" / "observability.dat");
  ctx.result["c_obs"] = cs;
  ctx.result["variation"] = variation(cs);
  ctx.result["polarization_defect"] = worst_pol;
  ctx.check(worst_pol <= 1e-10, "polarization defect " + num(worst_pol));
}

void run_hum(Context& ctx) {
  const Config& c = ctx.cfg;
  const std::vector<int> Ns = c.int_list("N");
  HumConfig hc;
  hc.cg_tol = c.positive("cg_tol");
  hc.cg_max_iter = c.positive_int("cg_max_iter");
  hc.phi = PhiRate::parse(c.get<std::string>("phi"), c.positive("phi_c"));
  const int probes = c.positive_int("probes", 0);
  const double eps = c.positive("gradient_eps");

  Table summary({"N", "h", "phi", "iterations", "optimality_residual", "cost_ratio",
                 "terminal_ratio", "control_cost", "terminal_energy", "initial_energy"});
  Table history({"N", "iteration", "residual"});
  Table energy({"N", "t", "u_energy", "v_energy"});
  json runs = json::array();
  std::vector<double> costs, terminals;
  for (int N : Ns) {
    const System sys = build_system(ctx, N);
    hc.phi = PhiRate::parse(c.get<std::string>("phi"), c.positive("phi_c"));
    const MeshFn y0 = initial_state(ctx, sys.mesh);
    const HumSolution sol = solve_hum(sys.solver, y0, hc);
    const ControllabilityReport rep = verify_controllability(sys.solver, sol, y0);
    summary.row(N, sys.mesh.h(), sol.phi, sol.iterations, sol.optimality_residual, rep.cost_ratio,
                rep.terminal_ratio, rep.control_cost, rep.terminal_energy, rep.initial_energy);
    for (std::size_t i = 0; i < sol.residuals.size(); ++i) history.row(N, i, sol.residuals[i]);
    Table level({"t", "u_energy", "v_energy"});
    for (const LevelEnergy& le : control_energy_per_level(sys.solver, sol)) {
      energy.row(N, le.t, le.u, le.v);
      level.row(le.t, le.u, le.v);
    }
    level.write_dat(ctx.out / "plotdata" / ("control_energy_N" + std::to_string(N) + ".dat"));

    json r = {{"N", N},
              {"h", sys.mesh.h()},
              {"phi", sol.phi},
              {"iterations", sol.iterations},
              {"optimality_residual", sol.optimality_residual},
              {"cost_ratio", rep.cost_ratio},
              {"terminal_ratio", rep.terminal_ratio},
              {"cost", sol.cost}};
    ctx.check(sol.optimality_residual <= 1e-8,
              "optimality residual " + num(sol.optimality_residual) + " at N=" + std::to_string(N));
    if (probes > 0) {
      const OperatorProbe op = probe_hum_operator(sys.solver, sol.phi, ctx.seed, probes);
      double grad = 0.0;
      for (int k = 0; k < probes; ++k) {
        std::mt19937_64 rng = stream_rng(ctx.seed, Stream::hum_probes, 1000 + static_cast<std::uint64_t>(k));
        // away from the optimum, where the gradient is not just rounding noise
        const double zn = std::max(std::sqrt(sys.solver.leaf_inner(sol.z_T, sol.z_T)), 1.0);
        const LeafVector z = sol.z_T + zn * random_leaf(sys.solver, rng);
        const LeafVector d = random_leaf(sys.solver, rng);
        grad = std::max(grad, gradient_check(sys.solver, z, y0, sol.phi, d, eps * zn));
      }
      r["symmetry_defect"] = op.symmetry;
      r["coercivity_margin"] = op.coercivity_margin;
      r["gram_identity_defect"] = op.gram_identity;
      r["gradient_fd_defect"] = grad;
      ctx.check(op.symmetry <= 1e-10, "operator symmetry " + num(op.symmetry));
      ctx.check(op.coercivity_margin >= -1e-10, "operator coercivity " + num(op.coercivity_margin));
      ctx.check(grad <= 1e-6, "gradient check " + num(grad));
    }
    runs.push_back(r);
    costs.push_back(rep.cost_ratio);
    terminals.push_back(rep.terminal_ratio);
    ctx.log << "hum N=" << N << " iterations=" << sol.iterations
            << " cost_ratio=" << num(rep.cost_ratio) << " terminal_ratio=" << num(rep.terminal_ratio)
            << '\n';
  }
  summary.write_csv(ctx.out / "hum.csv");
  history.write_csv(ctx.out / "residuals.csv");
  energy.write_csv(ctx.out / "control_energy.csv");
  summary.write_dat(ctx.out / "plotdata" / "hum.dat");
  ctx.result["runs"] = runs;
  ctx.result["cost_ratio"] = costs.size() == 1 ? json(costs[0]) : json(costs);
  ctx.result["terminal_ratio"] = terminals.size() == 1 ? json(terminals[0]) : json(terminals);
  if (costs.size() > 1) {
    ctx.result["cost_ratio_variation"] = variation(costs);
    ctx.result["terminal_ratio_variation"] = variation(terminals);
  }
}

void run_sobolev(Context& ctx) {
  const Config& c = ctx.cfg;
  const int n = c.positive_int("n");
  const double p = c.positive("p"), ps = c.positive("p_star");
  try {
    validate_sobolev_exponents(n, p, ps);
  } catch (const InvalidArgument& e) {
    c.fail("p_star", e.what());
  }
  const std::vector<SobolevRow> rows = sobolev_constant_sweep(
      n, p, ps, c.int_list("N"), c.positive_int("probes"), c.positive_int("ascent_steps", 0), ctx.seed);
  Table t({"h", "p", "p_star", "max_ratio", "N", "product_bound_slack"});
  std::vector<double> ratios;
  double slack = std::numeric_limits<double>::infinity();
  for (const SobolevRow& r : rows) {
    t.row(r.h, r.p, r.p_star, r.max_ratio, r.N, r.product_bound_slack);
    ratios.push_back(r.max_ratio);
    slack = std::min(slack, r.product_bound_slack);
  }
  t.write_csv(ctx.out / "sobolev.csv");
  t.write_dat(ctx.out / "plotdata" / "sobolev.dat");
  const LoomisWhitneyTrials lw =
      loomis_whitney_trials(Mesh(n, c.positive_int("lw_N")), c.positive_int("lw_trials", 0), ctx.seed);
  ctx.result["max_ratio"] = ratios;
  ctx.result["variation"] = variation(ratios);
  ctx.result["product_bound_min_slack"] = slack;
  ctx.result["loomis_whitney"] = {{"trials", lw.trials}, {"failures", lw.failures}, {"min_slack", lw.min_slack}};
  ctx.check(slack >= -1e-12, "product bound violated, slack " + num(slack));
  ctx.check(lw.failures == 0, std::to_string(lw.failures) + " Loomis-Whitney failures");
}

void run_rates(Context& ctx) {
  const Config& c = ctx.cfg;
  const int n = c.positive_int("n");
  const int N0 = c.positive_int("N0");
  const PsiReport psi = build_psi(Mesh(n, N0), c.box("g1", n));
  CarlemanParams p;
  p.lambda = c.positive("lambda");
  p.tau = c.positive("tau");
  p.delta = c.positive("delta");
  p.T = c.positive("T");
  p.K_psi = psi.field.max_over_cube() + c.positive("K_psi_margin");
  const RateReport rep =
      verify_weight_rates(n, N0, c.positive_int("levels", 2), psi.field, p, c.positive("smallness"));
  Table t({"identity", "h", "error", "observed_order"});
  for (const RateRow& r : rep.rows) t.row(r.identity, r.h, r.error, r.observed_order);
  t.write_csv(ctx.out / "rates.csv");
  t.write_dat(ctx.out / "plotdata" / "rates.dat");
  const double lo = c.get<double>("order_lo"), hi = c.get<double>("order_hi");
  ctx.result["min_order"] = rep.min_order();
  ctx.result["max_order"] = rep.max_order();
  ctx.check(rep.min_order() >= lo && rep.max_order() <= hi,
            "observed orders [" + num(rep.min_order()) + ", " + num(rep.max_order()) + "]");
}

void run_selftest(Context& ctx) {
  const Config& c = ctx.cfg;
  const std::vector<int> dims = c.int_list("dims");
  for (int n : dims) {
    if (n > kMaxDim) c.fail("dims", "dimension exceeds " + std::to_string(kMaxDim));
  }
  const std::vector<IdentityRow> rows =
      calculus_selftest(dims, c.int_list("sizes"), c.positive_int("samples"), ctx.seed);
  Table t({"identity", "n", "N", "samples", "max_residual"});
  double worst = 0.0;
  json ids = json::object();
  for (const IdentityRow& r : rows) {
    t.row(r.identity, r.n, r.N, r.samples, r.max_residual);
    worst = std::max(worst, r.max_residual);
    ids[r.identity] = std::max(ids.value(r.identity, 0.0), r.max_residual);
  }
  t.write_csv(ctx.out / "calculus.csv");
  const double tol = c.positive("tolerance");
  ctx.result["identities"] = ids;
  ctx.result["max_residual"] = worst;
  ctx.result["random_functions"] =
      2 * static_cast<int>(dims.size() * c.int_list("sizes").size()) * c.positive_int("samples");
  ctx.check(worst <= tol, "max residual " + num(worst));
}

using Runner = void (*)(Context&);
const std::map<std::string, Runner>& runners() {
  static const std::map<std::string, Runner> m = {
      {"counterexample", run_counterexample}, {"carleman-sweep", run_carleman},
      {"observability", run_observability},   {"hum", run_hum},
      {"sobolev", run_sobolev},               {"weights-rates", run_rates},
      {"calculus-selftest", run_selftest}};
  return m;
}

std::uint64_t resolve_seed(const Config& cfg, const RunOptions& opt) {
  if (opt.seed) return *opt.seed;
  if (const auto s = cfg.file_seed()) {
    if (!s->is_number_unsigned()) throw InvalidArgument("field 'seed': expected a nonnegative integer");
    return s->get<std::uint64_t>();
  }
  return kDefaultSeed;
}

void write_result(const fs::path& out, const std::string& sub, const Config& cfg, std::uint64_t seed,
                  const json& result, const std::vector<std::string>& failures, int code) {
  json doc = {{"subcommand", sub},
              {"seed", seed},
              {"config", cfg.data()},
              {"result", result},
              {"failures", failures},
              {"exit_code", code}};
  std::ofstream f(out / "result.json", std::ios::binary);
  f << doc.dump(2) << '\n';
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"counterexample", "carleman-sweep", "observability",
                                                 "hum", "sobolev", "weights-rates",
                                                 "calculus-selftest"};
  return names;
}

std::vector<std::string> config_keys(const std::string& subcommand) {
  std::vector<std::string> keys;
  const auto it = defaults().find(subcommand);
  if (it == defaults().end()) return keys;
  for (auto k = it->second.begin(); k != it->second.end(); ++k) keys.push_back(k.key());
  return keys;
}

int run(const std::string& subcommand, const std::optional<fs::path>& config, const json& overrides,
        const RunOptions& options, std::ostream& log) {
  if (!runners().count(subcommand)) {
    log << "error: unknown subcommand '" << subcommand << "'\n";
    return kInvalidConfig;
  }
  std::optional<Config> cfg;
  try {
    if (options.threads < 1) throw InvalidArgument("--threads must be >= 1");
    cfg.emplace(subcommand, config, overrides);
  } catch (const InvalidArgument& e) {
    log << "config error: " << e.what() << '\n';
    return kInvalidConfig;
  }
  std::uint64_t seed = kDefaultSeed;
  try {
    seed = resolve_seed(*cfg, options);
  } catch (const InvalidArgument& e) {
    log << "config error: " << e.what() << '\n';
    return kInvalidConfig;
  }

  Context ctx{*cfg, seed, options.threads, options.out, log, json::object(), {}};
  int code = kOk;
  const auto start = std::chrono::steady_clock::now();
  try {
    fs::create_directories(options.out / "plotdata");
    runners().at(subcommand)(ctx);
    if (!ctx.failures.empty()) code = kPropertyFailure;
  } catch (const CflViolation& e) {
    log << "config error: " << e.what() << " (admissible dt = " << num(e.admissible_dt()) << ")\n";
    code = kInvalidConfig;
  } catch (const InvalidArgument& e) {
    log << "config error: " << e.what() << '\n';
    code = kInvalidConfig;
  } catch (const BudgetExceeded& e) {
    log << "budget exceeded: " << e.what() << '\n';
    code = kBudgetExceeded;
  } catch (const PropertyFailure& e) {
    ctx.failures.push_back(e.what());
    code = kPropertyFailure;
  } catch (const fs::filesystem_error& e) {
    log << "output error: " << e.what() << '\n';
    return kInvalidConfig;
  }
  for (const std::string& f : ctx.failures) log << "property failure: " << f << '\n';
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  log << subcommand << ": exit " << code << " after " << num(secs) << " s\n";
  if (code == kOk || code == kPropertyFailure) {
    write_result(options.out, subcommand, *cfg, seed, ctx.result, ctx.failures, code);
  }
  return code;
}

int main(int argc, char** argv) {
  CLI::App app{"Stochastic discrete-calculus laboratory"};
  app.require_subcommand(1);

  struct Flags {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::map<std::string, std::string> overrides;
  };
  std::map<std::string, Flags> flags;
  for (const std::string& sub : subcommands()) {
    Flags& f = flags[sub];
    CLI::App* s = app.add_subcommand(sub);
    s->add_option("--config", f.config, "JSON config file");
    s->add_option("--out", f.out, "output directory")->capture_default_str();
    s->add_option("--seed", f.seed, "64-bit seed");
    s->add_option("--threads", f.threads, "worker threads")->capture_default_str();
    for (const std::string& key : config_keys(sub)) {
      s->add_option_function<std::string>(
          "--" + key, [&f, key](const std::string& v) { f.overrides[key] = v; },
          "override (JSON value)");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalidConfig;
  }
  for (const std::string& sub : subcommands()) {
    if (!app.got_subcommand(sub)) continue;
    const Flags& f = flags.at(sub);
    json overrides = json::object();
    for (const auto& [k, v] : f.overrides) {
      json parsed = json::parse(v, nullptr, false);
      overrides[k] = parsed.is_discarded() ? json(v) : parsed;
    }
    RunOptions opt;
    opt.out = f.out;
    opt.seed = f.seed;
    opt.threads = f.threads;
    std::optional<fs::path> cfg;
    if (!f.config.empty()) cfg = f.config;
    return run(sub, cfg, overrides, opt, std::cerr);
  }
  return kInvalidConfig;
}

}  // namespace sdlab::cli
