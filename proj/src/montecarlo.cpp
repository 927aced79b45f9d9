#include "sispersist/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>
#include <thread>

#include "sispersist/asymptotics.hpp"
#include "sispersist/error.hpp"

namespace sispersist {

namespace {

double exp_draw(Rng& rng, double rate) { return -std::log1p(-uniform01(rng)) / rate; }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Setup {
  std::vector<int> counts;
  int n = 0;
  double bn = 0.0;  // beta / N
};

Setup make_setup(const SimConfig& cfg) {
  Setup s;
  s.counts = group_counts(cfg.spec);
  s.n = std::accumulate(s.counts.begin(), s.counts.end(), 0);
  s.bn = cfg.spec.beta / s.n;
  return s;
}

void log_event(std::vector<TraceEvent>* trace, double t, std::size_t g, int delta) {
  if (trace) trace->push_back({t, g, delta});
}

SimOutcome run_exponential(const SimConfig& cfg, const Setup& st, std::vector<int> x, double horizon,
                           Rng& rng, std::vector<TraceEvent>* trace) {
  const auto& g = cfg.spec.groups;
  const std::size_t k = g.size();
  const double gamma = cfg.spec.gamma;
  std::vector<double> rate(2 * k);
  SimOutcome out;
  double t = 0.0;
  int infected = std::accumulate(x.begin(), x.end(), 0);
  while (infected > 0) {
    double force = 0.0;
    for (std::size_t j = 0; j < k; ++j) force += g.lambda[j] * x[j];
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      rate[2 * j] = st.bn * force * g.mu[j] * (st.counts[j] - x[j]);
      rate[2 * j + 1] = gamma * x[j];
      total += rate[2 * j] + rate[2 * j + 1];
    }
    const double dt = exp_draw(rng, total);
    if (t + dt > horizon) {
      out.time = horizon;
      out.final_state = std::move(x);
      return out;
    }
    t += dt;
    double u = uniform01(rng) * total;
    std::size_t c = 0;
    while (c + 1 < rate.size() && u >= rate[c]) u -= rate[c++];
    while (rate[c] == 0.0) --c;  // rounding can land past the last live channel
    const std::size_t j = c / 2;
    const int delta = (c % 2 == 0) ? 1 : -1;
    x[j] += delta;
    infected += delta;
    ++out.events;
    log_event(trace, t, j, delta);
  }
  out.extinct = true;
  out.time = t;
  out.final_state = std::move(x);
  return out;
}

SimOutcome run_erlang(const SimConfig& cfg, const Setup& st, const std::vector<int>& x0, double horizon,
                      Rng& rng, std::vector<TraceEvent>* trace) {
  const auto& g = cfg.spec.groups;
  const std::size_t k = g.size();
  const auto s = static_cast<std::size_t>(cfg.spec.stages);
  const double stage_rate = s * cfg.spec.gamma;

  // I[j*s + v]: infected of group j in stage v; spread the start evenly over stages.
  std::vector<int> stage(k * s, 0);
  std::vector<int> total_in(k, 0);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t v = 0; v < s; ++v)
      stage[j * s + v] = x0[j] / static_cast<int>(s) + (static_cast<int>(v) < x0[j] % static_cast<int>(s) ? 1 : 0);
    total_in[j] = x0[j];
  }
  // channels per group: infection, then one per stage (progression / recovery)
  std::vector<double> rate(k * (s + 1));
  SimOutcome out;
  double t = 0.0;
  int infected = std::accumulate(x0.begin(), x0.end(), 0);
  while (infected > 0) {
    double force = 0.0;
    for (std::size_t j = 0; j < k; ++j) force += g.lambda[j] * total_in[j];
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double* r = &rate[j * (s + 1)];
      r[0] = st.bn * force * g.mu[j] * (st.counts[j] - total_in[j]);
      total += r[0];
      for (std::size_t v = 0; v < s; ++v) {
        r[1 + v] = stage_rate * stage[j * s + v];
        total += r[1 + v];
      }
    }
    const double dt = exp_draw(rng, total);
    if (t + dt > horizon) {
      out.time = horizon;
      out.final_state = total_in;
      return out;
    }
    t += dt;
    double u = uniform01(rng) * total;
    std::size_t c = 0;
    while (c + 1 < rate.size() && u >= rate[c]) u -= rate[c++];
    while (rate[c] == 0.0) --c;
    const std::size_t j = c / (s + 1);
    const std::size_t ch = c % (s + 1);
    int delta = 0;
    if (ch == 0) {
      ++stage[j * s];
      ++total_in[j];
      delta = 1;
    } else {
      const std::size_t v = ch - 1;
      --stage[j * s + v];
      if (v + 1 < s) {
        ++stage[j * s + v + 1];
      } else {
        --total_in[j];
        delta = -1;
      }
    }
    infected += delta;
    ++out.events;
    log_event(trace, t, j, delta);
  }
  out.extinct = true;
  out.time = t;
  out.final_state = total_in;
  return out;
}

// Every period lasts exactly 1/gamma, so recoveries fire in infection order
// and a FIFO queue of recovery times is a priority queue.
SimOutcome run_constant(const SimConfig& cfg, const Setup& st, std::vector<int> x, double horizon, Rng& rng,
                        std::vector<TraceEvent>* trace) {
  const auto& g = cfg.spec.groups;
  const std::size_t k = g.size();
  const double period = 1.0 / cfg.spec.gamma;
  std::deque<std::pair<double, std::size_t>> pending;

  // Individuals infected before time 0 have residual periods uniform on (0, 1/gamma).
  std::vector<std::pair<double, std::size_t>> start;
  for (std::size_t j = 0; j < k; ++j)
    for (int i = 0; i < x[j]; ++i) start.emplace_back(period * uniform01(rng), j);
  std::sort(start.begin(), start.end());
  pending.assign(start.begin(), start.end());

  std::vector<double> inf(k);
  SimOutcome out;
  double t = 0.0;
  while (!pending.empty()) {
    double force = 0.0;
    for (std::size_t j = 0; j < k; ++j) force += g.lambda[j] * x[j];
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      inf[j] = st.bn * force * g.mu[j] * (st.counts[j] - x[j]);
      total += inf[j];
    }
    const double next_inf = total > 0.0 ? t + exp_draw(rng, total) : INFINITY;
    const double next_rec = pending.front().first;
    const double next = std::min(next_inf, next_rec);
    if (next > horizon) {
      out.time = horizon;
      out.final_state = std::move(x);
      return out;
    }
    t = next;
    if (next_rec <= next_inf) {
      const std::size_t j = pending.front().second;
      pending.pop_front();
      --x[j];
      log_event(trace, t, j, -1);
    } else {
      double u = uniform01(rng) * total;
      std::size_t j = 0;
      while (j + 1 < k && u >= inf[j]) u -= inf[j++];
      while (inf[j] == 0.0) --j;
      ++x[j];
      pending.emplace_back(t + period, j);
      log_event(trace, t, j, 1);
    }
    ++out.events;
  }
  out.extinct = true;
  out.time = t;
  out.final_state = std::move(x);
  return out;
}

}  // namespace

std::string_view to_string(PeriodKind k) {
  switch (k) {
    case PeriodKind::exponential: return "exponential";
    case PeriodKind::erlang: return "erlang";
    case PeriodKind::constant: return "constant";
  }
  return "exponential";
}

PeriodKind period_from_string(std::string_view s) {
  if (s == "exponential") return PeriodKind::exponential;
  if (s == "erlang") return PeriodKind::erlang;
  if (s == "constant") return PeriodKind::constant;
  throw ConfigError("unknown period kind '" + std::string(s) + "'");
}

double default_t0(const ModelSpec& spec) {
  const double R = r0(spec);
  const double f = R > 1.0 ? std::max(1.0, 1.0 / (R - 1.0)) : 1.0;
  return 10.0 / spec.gamma * f;
}

double default_tmax(const ModelSpec& spec, double t0, double cap) {
  double a = 0.0;
  if (r0(spec) > 1.0) {
    try {
      a = action_closed_form(spec).action;
    } catch (const MixedHeterogeneity&) {
      a = action_homogeneous(r0(spec));
    }
  }
  const int n = spec.population.value_or(1);
  const double t = t0 + 50.0 / spec.gamma * std::exp(a * n);
  return std::min(t, std::max(cap, 2.0 * t0));
}

std::uint64_t stream_seed(std::uint64_t root, std::uint64_t index) {
  return splitmix64(splitmix64(root) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

std::vector<int> initial_state(const SimConfig& cfg) {
  const auto counts = group_counts(cfg.spec);
  const std::size_t k = counts.size();
  if (cfg.initial) {
    if (cfg.initial->size() != k) throw ConfigError("initial state has the wrong number of groups");
    for (std::size_t j = 0; j < k; ++j)
      if ((*cfg.initial)[j] < 0 || (*cfg.initial)[j] > counts[j]) throw ConfigError("initial state out of range");
    return *cfg.initial;
  }
  std::vector<int> x(k, 0);
  if (r0(cfg.spec) > 1.0) {
    const auto ystar = endemic_equilibrium(cfg.spec);
    const int n = *cfg.spec.population;
    for (std::size_t j = 0; j < k; ++j) x[j] = std::clamp(static_cast<int>(std::lround(n * ystar[j])), 0, counts[j]);
    if (std::accumulate(x.begin(), x.end(), 0) == 0) {
      const auto top = std::max_element(ystar.begin(), ystar.end()) - ystar.begin();
      x[static_cast<std::size_t>(top)] = 1;
    }
  } else {
    std::fill(x.begin(), x.end(), 1);
  }
  return x;
}

SimOutcome simulate_one(const SimConfig& cfg, double horizon, Rng& rng, std::vector<TraceEvent>* trace) {
  if (!cfg.spec.population) throw ConfigError("simulation needs a population size");
  if (cfg.spec.beta < 0.0 || !(cfg.spec.gamma > 0.0)) throw InvalidModel("simulation needs beta >= 0, gamma > 0");
  const Setup st = make_setup(cfg);
  auto x = initial_state(cfg);
  switch (cfg.period) {
    case PeriodKind::exponential: return run_exponential(cfg, st, std::move(x), horizon, rng, trace);
    case PeriodKind::erlang: return run_erlang(cfg, st, x, horizon, rng, trace);
    case PeriodKind::constant: return run_constant(cfg, st, std::move(x), horizon, rng, trace);
  }
  throw InvalidModel("unknown period kind");
}

SimEstimate tau_from_counts(std::span<const double> offsets, std::size_t m, double t0, double tmax) {
  if (offsets.empty()) {
    std::ostringstream os;
    os << "no extinctions in (" << t0 << ", " << tmax << "] among " << m
       << " surviving runs; increase tmax";
    throw EstimatorUndefined(os.str());
  }
  SimEstimate e;
  e.r = offsets.size();
  e.m = m;
  e.t0 = t0;
  e.tmax = tmax;
  double total = static_cast<double>(m) * (tmax - t0);
  for (double o : offsets) total += o;
  e.tau_hat = total / static_cast<double>(e.r);
  e.stderr_ = e.tau_hat / std::sqrt(static_cast<double>(e.r));
  e.extinction_offsets.assign(offsets.begin(), offsets.end());
  return e;
}

SimEstimate estimate_tau(const SimConfig& cfg) {
  if (cfg.replicates < 1) throw ConfigError("replicates must be >= 1");
  const double t0 = cfg.t0 >= 0.0 ? cfg.t0 : default_t0(cfg.spec);
  const double tmax = cfg.tmax >= 0.0 ? cfg.tmax : default_tmax(cfg.spec, t0, cfg.tmax_cap);
  if (!(tmax > t0)) throw ConfigError("tmax must exceed t0");

  std::vector<SimOutcome> runs(cfg.replicates);
  std::atomic<std::size_t> next{0};
  const auto work = [&]() {
    for (std::size_t i = next++; i < cfg.replicates; i = next++) {
      Rng rng(stream_seed(cfg.seed, i));
      runs[i] = simulate_one(cfg, tmax, rng);
      runs[i].final_state.clear();
      runs[i].final_state.shrink_to_fit();
    }
  };
  const unsigned nt = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.replicates)));
  if (nt == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < nt; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  std::vector<double> offsets;
  std::size_t m = 0;
  std::size_t discarded = 0;
  for (const auto& r : runs) {
    if (r.extinct && r.time <= t0) ++discarded;
    else if (r.extinct) offsets.push_back(r.time - t0);
    else ++m;
  }
  SimEstimate e = tau_from_counts(offsets, m, t0, tmax);
  e.discarded = discarded;
  e.replicates = cfg.replicates;
  e.seed = cfg.seed;
  return e;
}

DualityProbe duality_probe(const SimConfig& cfg) {
  DualityProbe p;
  p.original = estimate_tau(cfg);
  SimConfig other = cfg;
  other.spec = swap_infectivity_susceptibility(cfg.spec);
  other.seed = stream_seed(cfg.seed, ~0ULL);
  if (other.t0 < 0.0) other.t0 = p.original.t0;
  if (other.tmax < 0.0) other.tmax = p.original.tmax;
  other.initial.reset();
  if (cfg.initial) other.initial = cfg.initial;
  p.swapped = estimate_tau(other);
  p.ratio = p.original.tau_hat / p.swapped.tau_hat;
  const double a = p.original.stderr_ / p.original.tau_hat;
  const double b = p.swapped.stderr_ / p.swapped.tau_hat;
  p.ratio_stderr = p.ratio * std::sqrt(a * a + b * b);
  return p;
}

}  // namespace sispersist
