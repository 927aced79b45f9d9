// sispersist: batch front-end for persistence-time computations.
//
// Exit status: 0 success, 1 numeric failure (partial CSVs still written),
// 2 invalid configuration or command line.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "sispersist/asymptotics.hpp"
#include "sispersist/config.hpp"
#include "sispersist/error.hpp"
#include "sispersist/exact.hpp"
#include "sispersist/experiments.hpp"
#include "sispersist/hamiltonian.hpp"
#include "sispersist/montecarlo.hpp"
#include "sispersist/ordering.hpp"

namespace fs = std::filesystem;
using namespace sispersist;

namespace {

struct Common {
  std::string config;
  std::string out = ".";
  std::uint64_t seed = 1;
  unsigned threads = 1;
  double tol = 0.0;  // 0 keeps the module default
  std::string n_list;
  int grid = 11;
  std::size_t replicates = 0;
};

// "100,150,200" or "100:650:50".
std::vector<int> parse_n_list(const std::string& s) {
  std::vector<int> out;
  if (s.empty()) return out;
  try {
    if (s.find(':') != std::string::npos) {
      int a = 0, b = 0, step = 0;
      char c1 = 0, c2 = 0;
      std::istringstream is(s);
      if (!(is >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || step <= 0 || b < a)
        throw ConfigError("bad range");
      for (int n = a; n <= b; n += step) out.push_back(n);
    } else {
      std::istringstream is(s);
      for (std::string tok; std::getline(is, tok, ',');) out.push_back(std::stoi(tok));
    }
  } catch (const std::exception&) {
    throw ConfigError("--n-list must be 'a,b,c' or 'start:stop:step', got '" + s + "'");
  }
  for (int n : out)
    if (n < 1) throw ConfigError("--n-list entries must be positive");
  return out;
}

std::string out_path(const Common& c, const std::string& name) {
  fs::create_directories(c.out);
  return (fs::path(c.out) / name).string();
}

ModelSpec need_model(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config is required for this subcommand");
  return load_model(c.config);
}

void add_config_meta(CsvTable& t, const Common& c) {
  if (!c.config.empty()) t.add_meta("config_file", c.config);
  t.add_meta("seed", std::to_string(c.seed));
  t.add_meta("threads", fmt(static_cast<long long>(c.threads)));
}

ExactOptions exact_options(const Common& c) {
  ExactOptions e;
  if (c.tol > 0) e.tol = c.tol;
  return e;
}

BvpOptions bvp_options(const Common& c) {
  BvpOptions b;
  if (c.tol > 0) b.h_tol = c.tol;
  return b;
}

std::vector<int> n_values_or_population(const Common& c, const ModelSpec& spec) {
  auto ns = parse_n_list(c.n_list);
  if (ns.empty()) {
    if (!spec.population) throw ConfigError("give --n-list or 'population' in the config");
    ns.push_back(*spec.population);
  }
  return ns;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + fmt(v[i]);
  return s;
}

bool all_true(const CsvTable& t, const std::string& column) {
  std::size_t col = t.columns.size();
  for (std::size_t i = 0; i < t.columns.size(); ++i)
    if (t.columns[i] == column) col = i;
  if (col == t.columns.size()) return true;
  for (const auto& r : t.rows)
    if (r[col] != "true") return false;
  return true;
}

int save(const CsvTable& t, const std::string& path, bool ok) {
  t.save(path);
  std::cout << path << "\n";
  return ok ? 0 : 1;
}

int cmd_action(const Common& c) {
  const ModelSpec spec = need_model(c);
  ActionResult a;
  if (spec.stages > 1) {
    a = action_erlang_susceptibility(spec);
  } else {
    try {
      a = action_closed_form(spec);
    } catch (const MixedHeterogeneity& e) {
      throw ConfigError(e.what());
    }
  }
  CsvTable t;
  add_provenance(t, "action");
  t.add_meta("model", to_json(spec));
  add_config_meta(t, c);
  t.columns = {"variant", "r0", "action", "action_homog", "d_value", "y_star", "theta_star"};
  t.rows.push_back({std::string(to_string(a.variant)), fmt(r0(spec)), fmt(a.action),
                    fmt(action_homogeneous(r0(spec))), fmt(a.d_value), join(a.y_star), join(a.theta_star)});
  return save(t, out_path(c, "action.csv"), true);
}

int cmd_exact(const Common& c, bool dump_qsd) {
  const ModelSpec spec = need_model(c);
  ExactOptions eo = exact_options(c);
  eo.throw_on_failure = false;
  CsvTable t;
  add_provenance(t, "exact-tau");
  t.add_meta("model", to_json(spec));
  t.add_meta("exact_tol", fmt(eo.tol));
  add_config_meta(t, c);
  t.columns = {"N", "tau", "ln_tau_over_N", "residual", "iterations", "converged"};
  bool ok = true;
  for (int n : n_values_or_population(c, spec)) {
    const auto q = quasi_stationary(with_population(spec, n), eo);
    ok = ok && q.converged;
    t.rows.push_back({fmt(n), fmt(q.tau), fmt(std::log(q.tau) / n), fmt(q.residual), fmt(q.iterations),
                      fmt(q.converged)});
    if (dump_qsd) {
      std::ofstream os(out_path(c, "qsd_N" + std::to_string(n) + ".csv"));
      write_qsd_csv(os, q);
    }
  }
  return save(t, out_path(c, "exact_tau.csv"), ok);
}

int cmd_simulate(const Common& c, const std::string& period, double t0, double tmax, bool dump) {
  const ModelSpec spec = need_model(c);
  CsvTable t;
  add_provenance(t, "simulate");
  t.add_meta("model", to_json(spec));
  t.add_meta("period", period);
  add_config_meta(t, c);
  t.columns = {"N", "period_kind", "tau_hat", "r", "m", "discarded", "stderr", "seed", "t0", "tmax"};
  CsvTable times;
  times.columns = {"N", "replicate_index", "extinction_offset"};
  bool ok = true;
  std::size_t cell = 0;
  for (int n : n_values_or_population(c, spec)) {
    SimConfig cfg;
    cfg.spec = with_population(spec, n);
    cfg.period = period_from_string(period);
    cfg.t0 = t0;
    cfg.tmax = tmax;
    cfg.replicates = c.replicates ? c.replicates : 1000;
    cfg.seed = stream_seed(c.seed, cell++);
    cfg.threads = c.threads;
    try {
      const auto e = estimate_tau(cfg);
      t.rows.push_back({fmt(n), period, fmt(e.tau_hat), fmt(e.r), fmt(e.m), fmt(e.discarded), fmt(e.stderr_),
                        std::to_string(e.seed), fmt(e.t0), fmt(e.tmax)});
      for (std::size_t i = 0; i < e.extinction_offsets.size(); ++i)
        times.rows.push_back({fmt(n), fmt(i), fmt(e.extinction_offsets[i])});
    } catch (const EstimatorUndefined& e) {
      std::cerr << "N=" << n << ": " << e.what() << "\n";
      ok = false;
      t.rows.push_back({fmt(n), period, "", "0", "", "", "", std::to_string(cfg.seed), "", ""});
    }
  }
  if (dump) {
    add_provenance(times, "simulate extinction times");
    times.save(out_path(c, "extinction_times.csv"));
  }
  return save(t, out_path(c, "simulate.csv"), ok);
}

int cmd_bvp(const Common& c) {
  const ModelSpec spec = need_model(c);
  const Trajectory tr = solve_heteroclinic(spec, bvp_options(c));
  CsvTable t;
  add_provenance(t, "bvp");
  t.add_meta("model", to_json(spec));
  t.add_meta("action", fmt(tr.action_forward));
  t.add_meta("action_backward", fmt(tr.action_backward));
  t.add_meta("h_residual_max", fmt(tr.h_residual_max));
  t.add_meta("converged", fmt(tr.converged));
  add_config_meta(t, c);
  t.columns = {"t"};
  for (std::size_t i = 0; i < spec.k(); ++i) t.columns.push_back("y" + std::to_string(i + 1));
  for (std::size_t i = 0; i < spec.k(); ++i) t.columns.push_back("theta" + std::to_string(i + 1));
  for (std::size_t n = 0; n < tr.times.size(); ++n) {
    std::vector<std::string> row{fmt(tr.times[n])};
    for (double v : tr.points[n].y) row.push_back(fmt(v));
    for (double v : tr.points[n].theta) row.push_back(fmt(v));
    t.rows.push_back(std::move(row));
  }
  std::cout << "action " << fmt(tr.action_forward) << "\n";
  return save(t, out_path(c, "bvp_trajectory.csv"), tr.converged);
}

Figure2Options figure2_options(const Common& c, double r0v) {
  Figure2Options o;
  o.r0 = r0v;
  o.resolution = c.grid;
  o.bvp = bvp_options(c);
  o.exact = exact_options(c);
  o.threads = c.threads;
  return o;
}

int cmd_contour(const Common& c, double r0v) {
  CsvTable t = figure2_bvp(figure2_options(c, r0v));
  add_config_meta(t, c);
  return save(t, out_path(c, "contour_grid.csv"), all_true(t, "converged"));
}

int cmd_figure1(const Common& c) {
  ExactSweepOptions o;
  if (!c.config.empty()) o.spec = load_model(c.config);
  o.n_values = parse_n_list(c.n_list);
  o.exact = exact_options(c);
  o.threads = c.threads;
  CsvTable t = figure1(o);
  add_config_meta(t, c);
  return save(t, out_path(c, "figure1.csv"), all_true(t, "converged"));
}

int cmd_figure2(const Common& c, double r0v, int stride) {
  Figure2Options o = figure2_options(c, r0v);
  CsvTable a = figure2_bvp(o);
  add_config_meta(a, c);
  if (stride > 1) {
    const auto axis = figure2_axis(o.resolution);
    for (std::size_t i = 0; i < axis.size(); i += stride)
      for (std::size_t j = 0; j < axis.size(); j += stride) o.finite_cells.emplace_back(axis[i], axis[j]);
  }
  CsvTable b = figure2_finite(o);
  add_config_meta(b, c);
  const int ra = save(a, out_path(c, "figure2_bvp.csv"), all_true(a, "converged"));
  const int rb = save(b, out_path(c, "figure2_finite.csv"), all_true(b, "converged"));
  return std::max(ra, rb);
}

int cmd_figure3(const Common& c, const std::string& period, int exact_n_max) {
  Figure3Options o;
  if (!c.config.empty()) o.spec = load_model(c.config);
  o.n_values = parse_n_list(c.n_list);
  o.period = period_from_string(period);
  if (c.replicates) o.replicates = c.replicates;
  o.seed = c.seed;
  o.threads = c.threads;
  o.exact_n_max = exact_n_max;
  auto res = figure3(o);
  add_config_meta(res.table, c);
  bool ok = true;
  for (const auto& r : res.rows) ok = ok && r.estimate.r > 0;
  return save(res.table, out_path(c, "figure3.csv"), ok);
}

// Config: {"f": [...], "family": [[...], ...], "varied": "lambda"|"mu",
//          "target_r0": r, "gamma": g}. Without a config, a three-member
// infectivity family spread from (1, 1).
int cmd_order(const Common& c) {
  OrderCheckOptions o;
  if (c.config.empty()) {
    o.f = {0.5, 0.5};
    const double eps[] = {0.0, 0.5, 0.9};
    o.family = spread_family({{1.0, 1.0}, o.f}, eps);
  } else {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text_file(c.config));
      o.f = j.at("f").get<std::vector<double>>();
      o.family = j.at("family").get<std::vector<std::vector<double>>>();
      const std::string varied = j.value("varied", std::string("lambda"));
      if (varied != "lambda" && varied != "mu") throw ConfigError("'varied' must be lambda or mu");
      o.susceptibility = varied == "mu";
      o.r0 = j.value("target_r0", 1.5);
      o.gamma = j.value("gamma", 1.0);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("order-check config: ") + e.what());
    }
  }
  CsvTable t = order_check(o);
  add_config_meta(t, c);
  return save(t, out_path(c, "order_check.csv"), true);
}

void add_common(CLI::App* s, Common& c) {
  s->add_option("--config", c.config, "Model or degree-law JSON file");
  s->add_option("--out", c.out, "Output directory")->capture_default_str();
  s->add_option("--seed", c.seed, "Root random seed")->capture_default_str();
  s->add_option("--threads", c.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--tol", c.tol, "Convergence tolerance (exact residual, BVP max |H|)")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean persistence times of heterogeneous SIS epidemics"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Common c;
  std::string period = "exponential", period3 = "constant";
  double t0 = -1.0, tmax = -1.0, grid_r0 = 1.2;
  bool dump = false;
  int stride = 1, exact_n_max = 600;

  auto* action = app.add_subcommand("action", "Closed-form action for single-heterogeneity models");
  add_common(action, c);
  auto* exact = app.add_subcommand("exact-tau", "Exact mean persistence time from the quasi-stationary distribution");
  add_common(exact, c);
  exact->add_option("--n-list", c.n_list, "Population sizes");
  exact->add_flag("--dump-qsd", dump, "Also write the quasi-stationary distribution per N");
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo estimate of the mean persistence time");
  add_common(sim, c);
  sim->add_option("--n-list", c.n_list, "Population sizes");
  sim->add_option("--replicates", c.replicates, "Replicates per N (default 1000)");
  sim->add_option("--period", period, "exponential, erlang or constant")
      ->check(CLI::IsMember({"exponential", "erlang", "constant"}));
  sim->add_option("--t0", t0, "Burn-in time (default from R0)");
  sim->add_option("--tmax", tmax, "Censoring time (default from the action)");
  sim->add_flag("--dump-times", dump, "Write per-run extinction offsets");
  auto* bvp = app.add_subcommand("bvp", "Heteroclinic orbit and its action");
  add_common(bvp, c);
  auto* grid = app.add_subcommand("contour-grid", "Two-group action surface over (lambda1, mu1)");
  add_common(grid, c);
  grid->add_option("--grid", c.grid, "Points per axis")->capture_default_str();
  grid->add_option("--r0", grid_r0, "Basic reproduction number")->capture_default_str();
  auto* f1 = app.add_subcommand("figure1", "ln(tau)/N against N with the asymptotic actions");
  add_common(f1, c);
  f1->add_option("--n-list", c.n_list, "Population sizes (default 100:650:50)");
  auto* f2 = app.add_subcommand("figure2", "Action contour grid and its finite-N approximation");
  add_common(f2, c);
  f2->add_option("--grid", c.grid, "Points per axis")->capture_default_str();
  f2->add_option("--r0", grid_r0, "Basic reproduction number")->capture_default_str();
  f2->add_option("--finite-stride", stride, "Use every n-th grid point for the finite-N grid")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  auto* f3 = app.add_subcommand("figure3", "Persistence under non-exponential infectious periods");
  add_common(f3, c);
  f3->add_option("--n-list", c.n_list, "Population sizes (default 200:600:100)");
  f3->add_option("--replicates", c.replicates, "Replicates per N (default 2000)");
  f3->add_option("--period", period3, "exponential, erlang or constant")
      ->capture_default_str()
      ->check(CLI::IsMember({"exponential", "erlang", "constant"}));
  f3->add_option("--exact-n-max", exact_n_max, "Largest N for the exact exponential reference, 0 to skip")
      ->capture_default_str();
  auto* order = app.add_subcommand("order-check", "Pairwise p-majorization against action ordering");
  add_common(order, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*action) return cmd_action(c);
    if (*exact) return cmd_exact(c, dump);
    if (*sim) return cmd_simulate(c, period, t0, tmax, dump);
    if (*bvp) return cmd_bvp(c);
    if (*grid) return cmd_contour(c, grid_r0);
    if (*f1) return cmd_figure1(c);
    if (*f2) return cmd_figure2(c, grid_r0, stride);
    if (*f3) return cmd_figure3(c, period3, exact_n_max);
    if (*order) return cmd_order(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidModel& e) {
    std::cerr << "invalid model: " << e.what() << "\n";
    return 2;
  } catch (const Subcritical& e) {
    std::cerr << "invalid model: " << e.what() << "\n";
    return 2;
  } catch (const StateSpaceTooLarge& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
