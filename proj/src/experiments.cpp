#include "sispersist/experiments.hpp"

#include <atomic>
#include <cmath>
#include <ctime>
#include <exception>
#include <mutex>
#include <thread>

#include "sispersist/asymptotics.hpp"
#include "sispersist/config.hpp"
#include "sispersist/error.hpp"
#include "sispersist/ordering.hpp"

namespace sispersist {

ModelSpec figure1_spec() {
  return spec_for_r0({{0.5, 0.5}, {100.0 / 51.0, 2.0 / 51.0}, {1.0, 1.0}}, 1.0, 1.5);
}

ModelSpec figure3_spec() {
  return spec_for_r0({{0.5, 0.5}, {5.0 / 3.0, 1.0 / 3.0}, {1.0, 1.0}}, 1.0, 1.2);
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned count = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

void add_provenance(CsvTable& t, const std::string& command) {
  char stamp[32];
  const std::time_t now = std::time(nullptr);
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  t.add_meta("generated", stamp);
  t.add_meta("tool", std::string("sispersist ") + kVersion);
  t.add_meta("command", command);
  t.add_meta("isa", std::string(kernels::to_string(kernels::active())));
}

namespace {

void add_exact_meta(CsvTable& t, const ExactOptions& e) {
  t.add_meta("exact_tol", fmt(e.tol));
  t.add_meta("exact_rel_tol", fmt(e.rel_tol));
  t.add_meta("exact_check_every", fmt(e.check_every));
}

std::optional<double> closed_form_or_none(const ModelSpec& spec) {
  try {
    return action_closed_form(spec).action;
  } catch (const MixedHeterogeneity&) {
    return std::nullopt;
  }
}

}  // namespace

CsvTable figure1(const ExactSweepOptions& opts) {
  std::vector<int> ns = opts.n_values;
  if (ns.empty())
    for (int n = 100; n <= 650; n += 50) ns.push_back(n);

  ExactOptions eo = opts.exact;
  eo.throw_on_failure = false;
  std::vector<QsdResult> res(ns.size());
  parallel_for(ns.size(), opts.threads, [&](std::size_t i) {
    res[i] = quasi_stationary(with_population(opts.spec, ns[i]), eo);
  });

  const auto a = closed_form_or_none(opts.spec);
  const double a0 = action_homogeneous(r0(opts.spec));
  CsvTable t;
  add_provenance(t, "figure1");
  t.add_meta("model", to_json(opts.spec));
  add_exact_meta(t, eo);
  t.columns = {"N", "tau", "ln_tau_over_N", "action", "action_homog", "residual", "iterations", "converged"};
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const auto& r = res[i];
    t.rows.push_back({fmt(ns[i]), fmt(r.tau), fmt(std::log(r.tau) / ns[i]), a ? fmt(*a) : "", fmt(a0),
                      fmt(r.residual), fmt(r.iterations), fmt(r.converged)});
  }
  return t;
}

std::vector<double> figure2_axis(int resolution) {
  if (resolution < 2) throw ConfigError("grid resolution must be at least 2");
  std::vector<double> v(static_cast<std::size_t>(resolution));
  for (int i = 0; i < resolution; ++i) v[i] = 0.1 + 1.8 * i / (resolution - 1);
  return v;
}

CsvTable figure2_bvp(const Figure2Options& opts) {
  const auto axis = figure2_axis(opts.resolution);
  const auto cells = action_grid(axis, axis, opts.r0, opts.gamma, opts.bvp);
  CsvTable t;
  add_provenance(t, "figure2 bvp");
  t.add_meta("r0", fmt(opts.r0));
  t.add_meta("gamma", fmt(opts.gamma));
  t.add_meta("f", "[0.5,0.5]");
  t.add_meta("h_tol", fmt(opts.bvp.h_tol));
  t.add_meta("endpoint_offset", fmt(opts.bvp.endpoint_offset));
  t.columns = {"lambda1", "mu1", "beta", "action", "h_residual_max", "converged"};
  for (const auto& c : cells)
    t.rows.push_back({fmt(c.lambda1), fmt(c.mu1), fmt(c.beta), c.converged ? fmt(c.action) : "",
                      fmt(c.h_residual_max), fmt(c.converged)});
  return t;
}

CsvTable figure2_finite(const Figure2Options& opts) {
  std::vector<std::pair<double, double>> cells = opts.finite_cells;
  if (cells.empty()) {
    const auto axis = figure2_axis(opts.resolution);
    for (double l : axis)
      for (double m : axis) cells.emplace_back(l, m);
  }
  ExactOptions eo = opts.exact;
  eo.throw_on_failure = false;
  struct Out {
    double beta = 0, t1 = 0, t2 = 0;
    bool ok = false;
  };
  std::vector<Out> out(cells.size());
  parallel_for(cells.size(), opts.threads, [&](std::size_t i) {
    const ModelSpec s = two_group_spec(cells[i].first, cells[i].second, opts.r0, opts.gamma);
    const auto q1 = quasi_stationary(with_population(s, opts.n1), eo);
    const auto q2 = quasi_stationary(with_population(s, opts.n2), eo);
    out[i] = {s.beta, q1.tau, q2.tau, q1.converged && q2.converged};
  });

  CsvTable t;
  add_provenance(t, "figure2 finite");
  t.add_meta("r0", fmt(opts.r0));
  t.add_meta("gamma", fmt(opts.gamma));
  t.add_meta("f", "[0.5,0.5]");
  t.add_meta("n1", fmt(opts.n1));
  t.add_meta("n2", fmt(opts.n2));
  add_exact_meta(t, eo);
  t.columns = {"lambda1", "mu1", "beta", "action_finite_n", "tau_n1", "tau_n2", "converged"};
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& o = out[i];
    const double est = (std::log(o.t2 * std::sqrt(double(opts.n2))) - std::log(o.t1 * std::sqrt(double(opts.n1)))) /
                       (opts.n2 - opts.n1);
    t.rows.push_back({fmt(cells[i].first), fmt(cells[i].second), fmt(o.beta), fmt(est), fmt(o.t1), fmt(o.t2),
                      fmt(o.ok)});
  }
  return t;
}

Figure3Result figure3(const Figure3Options& opts) {
  std::vector<int> ns = opts.n_values;
  if (ns.empty())
    for (int n = 200; n <= 600; n += 100) ns.push_back(n);

  const ModelSpec variants[2] = {opts.spec, swap_infectivity_susceptibility(opts.spec)};
  const char* names[2] = {"lambda", "mu"};

  std::vector<double> exact(ns.size(), 0.0);
  if (opts.exact_n_max > 0) {
    ExactOptions eo;
    eo.throw_on_failure = false;
    ModelSpec expo = opts.spec;
    expo.stages = 1;
    for (std::size_t i = 0; i < ns.size(); ++i)
      if (ns[i] <= opts.exact_n_max) {
        const auto q = quasi_stationary(with_population(expo, ns[i]), eo);
        if (q.converged) exact[i] = q.tau;
      }
  }

  Figure3Result out;
  std::size_t cell = 0;
  for (int v = 0; v < 2; ++v) {
    for (std::size_t i = 0; i < ns.size(); ++i, ++cell) {
      SimConfig cfg;
      cfg.spec = with_population(variants[v], ns[i]);
      cfg.period = opts.period;
      cfg.replicates = opts.replicates;
      cfg.seed = stream_seed(opts.seed, cell);
      cfg.threads = opts.threads;
      cfg.tmax_cap = opts.tmax_cap;
      Figure3Row row{ns[i], names[v], {}, exact[i]};
      try {
        row.estimate = estimate_tau(cfg);
      } catch (const EstimatorUndefined&) {
        row.estimate.seed = cfg.seed;
        row.estimate.replicates = cfg.replicates;
      }
      out.rows.push_back(std::move(row));
    }
  }

  CsvTable& t = out.table;
  add_provenance(t, "figure3");
  t.add_meta("model", to_json(opts.spec));
  t.add_meta("period", std::string(to_string(opts.period)));
  t.add_meta("replicates", fmt(opts.replicates));
  t.add_meta("root_seed", fmt(static_cast<long long>(opts.seed)));
  t.add_meta("tmax_cap", fmt(opts.tmax_cap));
  t.columns = {"N",   "variant", "period_kind", "tau_hat", "r", "m", "discarded", "stderr", "seed",
               "half_ln_N_plus_ln_tau", "tau_exact_exponential"};
  for (const auto& r : out.rows) {
    const auto& e = r.estimate;
    const bool ok = e.r > 0;
    t.rows.push_back({fmt(r.n), r.variant, std::string(to_string(opts.period)), ok ? fmt(e.tau_hat) : "",
                      fmt(e.r), fmt(e.m), fmt(e.discarded), ok ? fmt(e.stderr_) : "",
                      std::to_string(e.seed), ok ? fmt(0.5 * std::log(double(r.n)) + std::log(e.tau_hat)) : "",
                      r.exact_tau > 0 ? fmt(r.exact_tau) : ""});
  }
  return out;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw InvalidModel("line fit needs at least two paired points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = y[i] - f.intercept - f.slope * x[i];
      rss += e * e;
    }
    f.slope_stderr = std::sqrt(rss / (n - 2) / sxx);
  }
  return f;
}

CsvTable order_check(const OrderCheckOptions& opts) {
  const auto& fam = opts.family;
  if (fam.size() < 2) throw ConfigError("order-check needs at least two vectors");
  std::vector<double> actions(fam.size());
  for (std::size_t i = 0; i < fam.size(); ++i) {
    GroupStructure g{opts.f, std::vector<double>(opts.f.size(), 1.0), std::vector<double>(opts.f.size(), 1.0)};
    (opts.susceptibility ? g.mu : g.lambda) = fam[i];
    actions[i] = action_closed_form(spec_for_r0(std::move(g), opts.gamma, opts.r0)).action;
  }
  CsvTable t;
  add_provenance(t, "order-check");
  t.add_meta("f", "[" + [&] {
    std::string s;
    for (std::size_t i = 0; i < opts.f.size(); ++i) s += (i ? "," : "") + fmt(opts.f[i]);
    return s;
  }() + "]");
  t.add_meta("varied", opts.susceptibility ? "mu" : "lambda");
  t.add_meta("r0", fmt(opts.r0));
  t.add_meta("gamma", fmt(opts.gamma));
  t.columns = {"i", "j", "precedes", "action_i", "action_j", "action_ge", "consistent"};
  for (std::size_t i = 0; i < fam.size(); ++i)
    for (std::size_t j = 0; j < fam.size(); ++j) {
      if (i == j) continue;
      const bool prec = p_majorizes(fam[i], fam[j], opts.f);
      const bool ge = actions[i] >= actions[j] - kOrderTol;
      t.rows.push_back({fmt(i), fmt(j), fmt(prec), fmt(actions[i]), fmt(actions[j]), fmt(ge), fmt(!prec || ge)});
    }
  return t;
}

}  // namespace sispersist
