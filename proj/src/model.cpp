#include "sispersist/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sispersist/error.hpp"

namespace sispersist {

namespace {

double weighted_sum(std::span<const double> v, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * w[i];
  return s;
}

void require_positive(const std::vector<double>& v, const char* name) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0) || !std::isfinite(v[i])) {
      std::ostringstream os;
      os << name << "[" << i << "] = " << v[i] << " must be positive and finite";
      throw InvalidModel(os.str());
    }
  }
}

// Divides v by s unless s is already 1 within tolerance; returns the divisor used.
double rescale(std::vector<double>& v, double s) {
  if (std::abs(s - 1.0) <= kNormalizationTol) return 1.0;
  for (double& x : v) x /= s;
  return s;
}

}  // namespace

ModelSpec validate(ModelSpec raw) {
  auto& g = raw.groups;
  const std::size_t k = g.f.size();
  if (k == 0) throw InvalidModel("group vectors are empty");
  if (g.lambda.size() != k || g.mu.size() != k) {
    std::ostringstream os;
    os << "mismatched group vector lengths: f=" << k << " lambda=" << g.lambda.size()
       << " mu=" << g.mu.size();
    throw InvalidModel(os.str());
  }
  require_positive(g.f, "f");
  require_positive(g.lambda, "lambda");
  require_positive(g.mu, "mu");
  if (!(raw.beta > 0.0) || !std::isfinite(raw.beta)) throw InvalidModel("beta must be positive");
  if (!(raw.gamma > 0.0) || !std::isfinite(raw.gamma)) throw InvalidModel("gamma must be positive");
  if (raw.stages < 1) throw InvalidModel("stages must be >= 1");

  const double sf = rescale(g.f, std::accumulate(g.f.begin(), g.f.end(), 0.0));
  const double sl = rescale(g.lambda, weighted_sum(g.lambda, g.f));
  const double sm = rescale(g.mu, weighted_sum(g.mu, g.f));
  raw.beta *= sl * sm;
  raw.applied_scale.f *= sf;
  raw.applied_scale.lambda *= sl;
  raw.applied_scale.mu *= sm;

  if (raw.population) {
    if (*raw.population < 1) throw InvalidModel("population must be >= 1");
    (void)group_counts(g.f, *raw.population);
  }
  return raw;
}

std::vector<int> group_counts(std::span<const double> f, int population) {
  const std::size_t k = f.size();
  std::vector<int> counts(k);
  std::vector<std::pair<double, std::size_t>> remainders(k);
  long assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double exact = population * f[i];
    counts[i] = static_cast<int>(std::floor(exact));
    remainders[i] = {exact - counts[i], i};
    assigned += counts[i];
  }
  // Largest remainders first; ties go to the lower group index.
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (long r = 0; assigned + r < population; ++r) ++counts[remainders[r].second];
  for (std::size_t i = 0; i < k; ++i) {
    if (counts[i] < 1) {
      std::ostringstream os;
      os << "population " << population << " leaves group " << i << " empty (f=" << f[i] << ")";
      throw InvalidModel(os.str());
    }
  }
  return counts;
}

std::vector<int> group_counts(const ModelSpec& spec) {
  if (!spec.population) throw InvalidModel("spec has no population size");
  return group_counts(spec.groups.f, *spec.population);
}

double r0(const ModelSpec& spec) {
  const auto& g = spec.groups;
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += g.lambda[i] * g.mu[i] * g.f[i];
  return spec.beta / spec.gamma * s;
}

double beta_for_r0(const GroupStructure& groups, double gamma, double target_r0) {
  if (!(target_r0 > 0.0)) throw InvalidModel("target R0 must be positive");
  double s = 0.0;
  for (std::size_t i = 0; i < groups.size(); ++i)
    s += groups.lambda[i] * groups.mu[i] * groups.f[i];
  return target_r0 * gamma / s;
}

ModelSpec spec_for_r0(GroupStructure groups, double gamma, double target_r0, int stages,
                      std::optional<int> population) {
  ModelSpec raw;
  raw.groups = std::move(groups);
  raw.beta = 1.0;
  raw.gamma = gamma;
  raw.stages = stages;
  raw.population = population;
  ModelSpec spec = validate(std::move(raw));
  spec.beta = beta_for_r0(spec.groups, gamma, target_r0);
  return spec;
}

bool all_ones(std::span<const double> v, double tol) {
  return std::all_of(v.begin(), v.end(), [tol](double x) { return std::abs(x - 1.0) <= tol; });
}

ModelSpec swap_infectivity_susceptibility(const ModelSpec& spec) {
  ModelSpec out = spec;
  std::swap(out.groups.lambda, out.groups.mu);
  std::swap(out.applied_scale.lambda, out.applied_scale.mu);
  return out;
}

ModelSpec merge_equal_groups(const ModelSpec& spec, double tol) {
  ModelSpec out = spec;
  auto& g = out.groups;
  g.f.clear();
  g.lambda.clear();
  g.mu.clear();
  for (std::size_t i = 0; i < spec.k(); ++i) {
    const double l = spec.groups.lambda[i];
    const double m = spec.groups.mu[i];
    std::size_t j = 0;
    while (j < g.size() && !(std::abs(g.lambda[j] - l) <= tol && std::abs(g.mu[j] - m) <= tol)) ++j;
    if (j == g.size()) {
      g.f.push_back(spec.groups.f[i]);
      g.lambda.push_back(l);
      g.mu.push_back(m);
    } else {
      g.f[j] += spec.groups.f[i];
    }
  }
  return out;
}

ModelSpec with_population(ModelSpec spec, int population) {
  spec.population = population;
  if (population < 1) throw InvalidModel("population must be >= 1");
  (void)group_counts(spec.groups.f, population);
  return spec;
}

// ---------------------------------------------------------------------------

double DegreeDistribution::mean_in() const {
  double s = 0.0;
  for (const auto& p : support) s += p.d_in * p.prob;
  return s;
}

double DegreeDistribution::mean_out() const {
  double s = 0.0;
  for (const auto& p : support) s += p.d_out * p.prob;
  return s;
}

void validate_degrees(const DegreeDistribution& d) {
  if (d.support.empty()) throw InvalidModel("degree distribution has empty support");
  if (!(d.kappa > 0.0)) throw InvalidModel("kappa must be positive");
  if (!(d.gamma > 0.0)) throw InvalidModel("gamma must be positive");
  double total = 0.0;
  int largest = 0;
  for (const auto& p : d.support) {
    if (!(p.prob > 0.0)) throw InvalidModel("degree probabilities must be positive");
    if (p.d_in < 0 || p.d_out < 0) throw InvalidModel("degrees must be nonnegative");
    largest = std::max({largest, p.d_in, p.d_out});
    total += p.prob;
  }
  if (std::abs(total - 1.0) > kNormalizationTol) {
    std::ostringstream os;
    os << "degree probabilities sum to " << total;
    throw InvalidModel(os.str());
  }
  if (d.d_max > 0 && largest > d.d_max) {
    std::ostringstream os;
    os << "degree " << largest << " exceeds d_max = " << d.d_max;
    throw InvalidModel(os.str());
  }
  const double ein = d.mean_in();
  const double eout = d.mean_out();
  if (std::abs(ein - eout) > kNormalizationTol * std::max(1.0, ein)) {
    std::ostringstream os;
    os << "E[d_in] = " << ein << " differs from E[d_out] = " << eout;
    throw InvalidModel(os.str());
  }
  if (!(ein > 0.0)) throw InvalidModel("network has no links");
}

NetworkMapping map_degree_distribution(const DegreeDistribution& d) {
  validate_degrees(d);
  NetworkMapping out;
  double kept_mass = 0.0;
  for (const auto& p : d.support) {
    if (p.d_in == 0) {
      out.excluded.push_back(p);
      out.excluded_mass += p.prob;
      continue;
    }
    if (p.d_out == 0) {
      std::ostringstream os;
      os << "support point (" << p.d_in << ", 0) would need zero infectivity";
      throw InvalidModel(os.str());
    }
    out.groups.push_back(p);
    kept_mass += p.prob;
  }
  if (out.groups.empty()) throw InvalidModel("no support point can be infected");

  double ein = 0.0;
  double eout = 0.0;
  for (const auto& p : out.groups) {
    ein += p.d_in * p.prob / kept_mass;
    eout += p.d_out * p.prob / kept_mass;
  }
  ModelSpec spec;
  spec.beta = d.kappa * eout;
  spec.gamma = d.gamma;
  for (const auto& p : out.groups) {
    spec.groups.f.push_back(p.prob / kept_mass);
    spec.groups.mu.push_back(p.d_in / ein);
    spec.groups.lambda.push_back(p.d_out / eout);
  }
  out.spec = validate(std::move(spec));
  return out;
}

ModelSpec from_degree_distribution(const DegreeDistribution& d) {
  return map_degree_distribution(d).spec;
}

}  // namespace sispersist
