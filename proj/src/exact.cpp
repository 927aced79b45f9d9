#include "sispersist/exact.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#if defined(__x86_64__) || defined(__i386__)
#include <pmmintrin.h>
#include <xmmintrin.h>
#define SISPERSIST_X86_FTZ 1
#endif

#include "sispersist/asymptotics.hpp"
#include "sispersist/error.hpp"

namespace sispersist {

StateSpace::StateSpace(std::vector<int> group_sizes) : sizes_(std::move(group_sizes)) {
  const std::size_t k = sizes_.size();
  strides_.assign(k, 1);
  std::size_t total = 1;
  for (std::size_t j = k; j-- > 0;) {
    strides_[j] = total;
    total *= static_cast<std::size_t>(sizes_[j]) + 1;
  }
  total_ = total;
}

std::size_t StateSpace::encode(std::span<const int> x) const {
  std::size_t idx = 0;
  for (std::size_t j = 0; j < sizes_.size(); ++j) idx += static_cast<std::size_t>(x[j]) * strides_[j];
  return idx;
}

std::vector<int> StateSpace::decode(std::size_t index) const {
  std::vector<int> x(sizes_.size());
  for (std::size_t j = 0; j < sizes_.size(); ++j) x[j] = digit(index, j);
  return x;
}

double infection_rate(const ModelSpec& spec, std::span<const int> counts, std::span<const int> x,
                      std::size_t j) {
  const auto& g = spec.groups;
  const int n = std::accumulate(counts.begin(), counts.end(), 0);
  double force = 0.0;
  for (std::size_t m = 0; m < x.size(); ++m) force += g.lambda[m] * x[m];
  return spec.beta / n * force * g.mu[j] * (counts[j] - x[j]);
}

double recovery_rate(const ModelSpec& spec, std::span<const int> x, std::size_t j) {
  return spec.gamma * x[j];
}

namespace {

StateSpace checked_space(const ModelSpec& spec, std::size_t state_cap) {
  if (spec.stages != 1) throw InvalidModel("exact computation needs exponential periods (stages = 1)");
  const auto counts = group_counts(spec);
  double total = 1.0;
  for (int c : counts) total *= c + 1.0;
  if (total > static_cast<double>(state_cap)) {
    std::ostringstream os;
    os << "state space has " << total << " states, above the cap of " << state_cap;
    throw StateSpaceTooLarge(os.str());
  }
  return StateSpace(counts);
}

// Visits every state in index order with its digit vector.
template <class F>
void for_each_state(const StateSpace& space, F&& fn) {
  const std::size_t k = space.groups();
  const auto& sizes = space.group_sizes();
  std::vector<int> x(k, 0);
  for (std::size_t idx = 0; idx < space.total_states(); ++idx) {
    fn(idx, std::span<const int>(x));
    for (std::size_t j = k; j-- > 0;) {
      if (++x[j] <= sizes[j]) break;
      x[j] = 0;
    }
  }
}

// Pull-form stencil of P = I + Q / Lambda over all states: entry y of the
// product collects q_y P(y,y), q_{y - e_j} P(y - e_j, y) and
// q_{y + e_j} P(y + e_j, y). Coefficients that would reach across a digit
// boundary are zero, so no wrap-around term survives.
struct Stencil {
  std::vector<std::ptrdiff_t> offsets;
  std::vector<std::vector<double>> coefs;
  std::vector<const double*> coef_ptrs;
  std::size_t pad = 0;
  double rate = 0.0;  // Lambda
};

Stencil build_stencil(const ModelSpec& spec, const StateSpace& space, bool kill_absorbing) {
  const auto& g = spec.groups;
  const std::size_t k = space.groups();
  const std::size_t n_states = space.total_states();
  const auto& sizes = space.group_sizes();
  const int n_total = std::accumulate(sizes.begin(), sizes.end(), 0);
  const double bn = spec.beta / n_total;

  Stencil st;
  st.offsets.push_back(0);
  for (std::size_t j = 0; j < k; ++j) {
    const auto s = static_cast<std::ptrdiff_t>(space.strides()[j]);
    st.offsets.push_back(-s);  // from y - e_j (an infection in j)
    st.offsets.push_back(s);   // from y + e_j (a recovery in j)
  }
  st.pad = space.strides()[0];
  st.coefs.assign(st.offsets.size(), std::vector<double>(n_states, 0.0));

  double max_exit = 0.0;
  for_each_state(space, [&](std::size_t y, std::span<const int> x) {
    double force = 0.0;
    for (std::size_t m = 0; m < k; ++m) force += g.lambda[m] * x[m];
    double exit = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      exit += bn * force * g.mu[j] * (sizes[j] - x[j]) + spec.gamma * x[j];
      if (x[j] > 0)
        st.coefs[1 + 2 * j][y] = bn * (force - g.lambda[j]) * g.mu[j] * (sizes[j] - x[j] + 1);
      if (x[j] < sizes[j]) st.coefs[2 + 2 * j][y] = spec.gamma * (x[j] + 1);
    }
    st.coefs[0][y] = exit;
    max_exit = std::max(max_exit, exit);
  });
  st.rate = 1.01 * max_exit;
  const double inv = 1.0 / st.rate;
  for (auto& c : st.coefs)
    for (double& v : c) v *= inv;
  for (double& v : st.coefs[0]) v = 1.0 - v;
  if (kill_absorbing)
    for (auto& c : st.coefs) c[0] = 0.0;
  for (const auto& c : st.coefs) st.coef_ptrs.push_back(c.data());
  return st;
}

class FlushDenormals {
 public:
  FlushDenormals() {
#if defined(SISPERSIST_X86_FTZ)
    ftz_ = _MM_GET_FLUSH_ZERO_MODE();
    daz_ = _MM_GET_DENORMALS_ZERO_MODE();
    _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
    _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
#endif
  }
  ~FlushDenormals() {
#if defined(SISPERSIST_X86_FTZ)
    _MM_SET_FLUSH_ZERO_MODE(ftz_);
    _MM_SET_DENORMALS_ZERO_MODE(daz_);
#endif
  }
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

 private:
  unsigned ftz_ = 0;
  unsigned daz_ = 0;
};

// Product of binomials centred on the endemic equilibrium (or near the
// origin below threshold), as a starting vector close to q.
void binomial_start(const ModelSpec& spec, const StateSpace& space, double* q) {
  const auto& sizes = space.group_sizes();
  std::vector<double> p(sizes.size());
  std::vector<double> ystar;
  if (r0(spec) > 1.0) ystar = endemic_equilibrium(spec);
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    const double frac = ystar.empty() ? 1.0 / (sizes[j] + 1.0) : ystar[j] / spec.groups.f[j];
    p[j] = std::clamp(frac, 0.5 / sizes[j], 1.0 - 0.5 / sizes[j]);
    if (sizes[j] == 1) p[j] = 0.5;
  }
  std::vector<std::vector<double>> logpmf(sizes.size());
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    const int n = sizes[j];
    for (int i = 0; i <= n; ++i)
      logpmf[j].push_back(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) +
                          i * std::log(p[j]) + (n - i) * std::log1p(-p[j]));
  }
  double peak = -INFINITY;
  for_each_state(space, [&](std::size_t y, std::span<const int> x) {
    double l = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) l += logpmf[j][x[j]];
    q[y] = l;
    if (y > 0) peak = std::max(peak, l);
  });
  q[0] = 0.0;
  for (std::size_t y = 1; y < space.total_states(); ++y) q[y] = std::exp(q[y] - peak);
}

}  // namespace

Eigen::SparseMatrix<double, Eigen::RowMajor> build_generator(const ModelSpec& spec,
                                                             std::size_t state_cap) {
  const StateSpace space = checked_space(spec, state_cap);
  const auto& sizes = space.group_sizes();
  const std::size_t k = space.groups();
  const auto n = static_cast<Eigen::Index>(space.transient_count());

  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(n) * (2 * k + 1));
  for_each_state(space, [&](std::size_t y, std::span<const int> x) {
    if (y == 0) return;
    const auto row = static_cast<Eigen::Index>(y - 1);
    double exit = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const auto s = space.strides()[j];
      const double inf = infection_rate(spec, sizes, x, j);
      const double rec = recovery_rate(spec, x, j);
      exit += inf + rec;
      if (inf > 0.0) entries.emplace_back(row, static_cast<Eigen::Index>(y + s - 1), inf);
      if (rec > 0.0 && y - s > 0) entries.emplace_back(row, static_cast<Eigen::Index>(y - s - 1), rec);
    }
    if (!(exit > 0.0)) throw InvalidModel("transient state with no outgoing transition");
    entries.emplace_back(row, row, -exit);
  });
  Eigen::SparseMatrix<double, Eigen::RowMajor> m(n, n);
  m.setFromTriplets(entries.begin(), entries.end());
  return m;
}

std::vector<double> absorption_rates(const ModelSpec& spec, std::size_t state_cap) {
  const StateSpace space = checked_space(spec, state_cap);
  std::vector<double> leak(space.transient_count(), 0.0);
  for (std::size_t j = 0; j < space.groups(); ++j) leak[space.strides()[j] - 1] = spec.gamma;
  return leak;
}

QsdResult quasi_stationary(const ModelSpec& spec, const ExactOptions& opts) {
  QsdResult res;
  res.space = checked_space(spec, opts.state_cap);
  const StateSpace& space = res.space;
  const std::size_t n = space.total_states();
  const Stencil st = build_stencil(spec, space, true);
  res.uniformization_rate = st.rate;

  std::vector<double> buf_a(n + 2 * st.pad, 0.0);
  std::vector<double> buf_b(n + 2 * st.pad, 0.0);
  double* qa = buf_a.data() + st.pad;
  double* qb = buf_b.data() + st.pad;
  if (opts.initial) {
    if (opts.initial->size() != n - 1) throw InvalidModel("warm start has the wrong length");
    std::copy(opts.initial->begin(), opts.initial->end(), qa + 1);
  } else {
    binomial_start(spec, space, qa);
  }
  qa[0] = 0.0;
  kernels::scale_inplace(opts.isa, n, qa, 1.0 / std::accumulate(qa, qa + n, 0.0));

  FlushDenormals ftz;
  const auto& strides = space.strides();
  const auto inv_tau_of = [&](const double* q) {
    double flux = 0.0;
    for (std::size_t j = 0; j < space.groups(); ++j) flux += q[strides[j]];
    return spec.gamma * flux;
  };

  double last_inv_tau = -1.0;
  double inv_tau = 0.0;
  double residual = INFINITY;
  std::size_t it = 0;
  for (; it < opts.max_iters; ++it) {
    const double mass = kernels::dia_apply(opts.isa, n, st.offsets.size(), st.offsets.data(),
                                           st.coef_ptrs.data(), qa, qb);
    if (it % opts.check_every == 0) {
      inv_tau = inv_tau_of(qa);
      residual = kernels::max_abs_axpby(opts.isa, n, st.rate, qb, inv_tau - st.rate, qa);
      const double change = std::abs(inv_tau - last_inv_tau) / inv_tau;
      if (residual < opts.tol && change < opts.rel_tol) {
        res.converged = true;
        break;
      }
      last_inv_tau = inv_tau;
    }
    kernels::scale_inplace(opts.isa, n, qb, 1.0 / mass);
    std::swap(qa, qb);
  }

  res.iterations = it;
  res.residual = residual;
  res.tau = 1.0 / inv_tau;
  res.q.assign(qa + 1, qa + n);
  for (double v : res.q) {
    if (v < -1e-14) throw ConvergenceFailure("quasi-stationary vector changed sign", residual);
  }
  if (!res.converged && opts.throw_on_failure) {
    std::ostringstream os;
    os << "power iteration stopped after " << it << " iterations, residual " << residual
       << ", tau estimate " << res.tau;
    throw ConvergenceFailure(os.str(), residual);
  }
  return res;
}

double finite_n_action_estimate(const ModelSpec& spec, int n1, int n2, const ExactOptions& opts) {
  if (!(n1 < n2)) throw InvalidModel("finite-N slope needs N1 < N2");
  const double t1 = quasi_stationary(with_population(spec, n1), opts).tau;
  const double t2 = quasi_stationary(with_population(spec, n2), opts).tau;
  return (std::log(t2 * std::sqrt(static_cast<double>(n2))) -
          std::log(t1 * std::sqrt(static_cast<double>(n1)))) /
         (n2 - n1);
}

std::vector<ProfilePoint> log_qsd_profile(const ModelSpec& spec, const QsdResult& qsd) {
  const auto& sizes = qsd.space.group_sizes();
  const double n = std::accumulate(sizes.begin(), sizes.end(), 0);
  (void)spec;
  std::vector<ProfilePoint> out;
  out.reserve(qsd.q.size());
  for_each_state(qsd.space, [&](std::size_t y, std::span<const int> x) {
    if (y == 0) return;
    const double q = qsd.q[y - 1];
    if (!(q > 0.0)) return;  // flushed to zero far out in the tail
    ProfilePoint p;
    p.y.reserve(x.size());
    for (int v : x) p.y.push_back(v / n);
    p.log_q_over_n = std::log(q) / n;
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<double> transient_distribution(const ModelSpec& spec, std::span<const int> x0, double t,
                                           std::size_t state_cap) {
  const StateSpace space = checked_space(spec, state_cap);
  const std::size_t n = space.total_states();
  for (std::size_t j = 0; j < space.groups(); ++j)
    if (x0[j] < 0 || x0[j] > space.group_sizes()[j]) throw InvalidModel("initial state out of range");
  const Stencil st = build_stencil(spec, space, false);
  const kernels::Isa isa = kernels::active();

  std::vector<double> buf_a(n + 2 * st.pad, 0.0);
  std::vector<double> buf_b(n + 2 * st.pad, 0.0);
  double* pa = buf_a.data() + st.pad;
  double* pb = buf_b.data() + st.pad;
  pa[space.encode(x0)] = 1.0;

  std::vector<double> out(n, 0.0);
  if (!(t > 0.0)) {
    out[space.encode(x0)] = 1.0;
    return out;
  }
  const double lt = st.rate * t;
  const auto last = static_cast<std::size_t>(lt + 12.0 * std::sqrt(lt) + 40.0);
  for (std::size_t m = 0; m <= last; ++m) {
    const double w = std::exp(-lt + m * std::log(lt) - std::lgamma(m + 1.0));
    for (std::size_t i = 0; i < n; ++i) out[i] += w * pa[i];
    kernels::dia_apply(isa, n, st.offsets.size(), st.offsets.data(), st.coef_ptrs.data(), pa, pb);
    std::swap(pa, pb);
  }
  return out;
}

void write_qsd_csv(std::ostream& os, const QsdResult& qsd) {
  const std::size_t k = qsd.space.groups();
  os << "# tau: " << qsd.tau << "\n# residual: " << qsd.residual << "\n# iterations: " << qsd.iterations
     << "\n";
  for (std::size_t j = 0; j < k; ++j) os << "I" << j + 1 << ",";
  os << "q\n";
  const auto prec = os.precision(17);
  for_each_state(qsd.space, [&](std::size_t y, std::span<const int> x) {
    if (y == 0) return;
    for (int v : x) os << v << ",";
    os << qsd.q[y - 1] << "\n";
  });
  os.precision(prec);
}

std::uint64_t spec_hash(const ModelSpec& spec) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  const auto k = static_cast<std::uint64_t>(spec.k());
  mix(&k, sizeof k);
  for (const auto* v : {&spec.groups.f, &spec.groups.lambda, &spec.groups.mu})
    mix(v->data(), v->size() * sizeof(double));
  mix(&spec.beta, sizeof spec.beta);
  mix(&spec.gamma, sizeof spec.gamma);
  mix(&spec.stages, sizeof spec.stages);
  const int pop = spec.population.value_or(0);
  mix(&pop, sizeof pop);
  return h;
}

TauCache::TauCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_, std::ios::binary);
  std::uint64_t key = 0;
  Entry e;
  while (in.read(reinterpret_cast<char*>(&key), sizeof key) &&
         in.read(reinterpret_cast<char*>(&e.tau), sizeof e.tau) &&
         in.read(reinterpret_cast<char*>(&e.residual), sizeof e.residual)) {
    entries_[key] = e;
  }
}

std::optional<TauCache::Entry> TauCache::find(const ModelSpec& spec) const {
  const auto it = entries_.find(spec_hash(spec));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void TauCache::store(const ModelSpec& spec, const Entry& e) { entries_[spec_hash(spec)] = e; }

void TauCache::flush() const {
  std::vector<std::uint64_t> keys;
  for (const auto& [key, e] : entries_) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  std::ofstream out(path_, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write tau cache " + path_);
  for (auto key : keys) {
    const Entry& e = entries_.at(key);
    out.write(reinterpret_cast<const char*>(&key), sizeof key);
    out.write(reinterpret_cast<const char*>(&e.tau), sizeof e.tau);
    out.write(reinterpret_cast<const char*>(&e.residual), sizeof e.residual);
  }
}

}  // namespace sispersist
