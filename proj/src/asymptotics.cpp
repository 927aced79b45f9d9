#include "sispersist/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "sispersist/error.hpp"

namespace sispersist {

namespace {

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

void require_supercritical(const ModelSpec& spec) {
  const double R = r0(spec);
  if (!(R > 1.0)) {
    std::ostringstream os;
    os << "R0 = " << R << " <= 1: no endemic equilibrium";
    throw Subcritical(os.str());
  }
}

void require_lambda_ones(const ModelSpec& spec, const char* what) {
  if (!all_ones(spec.groups.lambda)) {
    std::ostringstream os;
    os << what << " requires homogeneous infectivity (lambda = 1)";
    throw InvalidModel(os.str());
  }
}

std::vector<double> ones(std::size_t k) { return std::vector<double>(k, 1.0); }

// sum_i f_i ln(1 + b_i D) - (gamma/beta) D
double action_formula(std::span<const double> b, std::span<const double> f, double d,
                      double beta, double gamma) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * std::log1p(b[i] * d);
  return s - gamma / beta * d;
}

constexpr double kSimplexSlack = 1e-14;

}  // namespace

std::string_view to_string(ActionVariant v) {
  switch (v) {
    case ActionVariant::hetero_infectivity: return "hetero-infectivity";
    case ActionVariant::hetero_susceptibility: return "hetero-susceptibility";
    case ActionVariant::homogeneous: return "homogeneous";
    case ActionVariant::erlang_susceptibility: return "erlang-susceptibility";
    case ActionVariant::network_out: return "network-out";
    case ActionVariant::network_in: return "network-in";
  }
  return "unknown";
}

double StageMatrix::group_total(std::size_t i) const {
  double s = 0.0;
  for (std::size_t v = 0; v < stages; ++v) s += (*this)(i, v);
  return s;
}

RootResult solve_D(std::span<const double> a, std::span<const double> b,
                   std::span<const double> f, double beta, double gamma) {
  const double c = beta / gamma;
  const auto g = [&](double d) {
    double s = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) s += a[j] * b[j] * f[j] / (1.0 + b[j] * d);
    return c * s - 1.0;
  };
  const auto dg = [&](double d) {
    double s = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) {
      const double den = 1.0 + b[j] * d;
      s -= a[j] * b[j] * b[j] * f[j] / (den * den);
    }
    return c * s;
  };
  if (!(g(0.0) > 0.0)) {
    std::ostringstream os;
    os << "D equation has no positive root: left side at 0 is " << g(0.0) + 1.0;
    throw Subcritical(os.str());
  }
  return solve_decreasing(g, dg, 0.0);
}

std::vector<double> deterministic_rhs(const ModelSpec& spec, std::span<const double> y) {
  const auto& g = spec.groups;
  double force = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) force += g.lambda[j] * y[j];
  std::vector<double> dy(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    dy[i] = spec.beta * force * g.mu[i] * (g.f[i] - y[i]) - spec.gamma * y[i];
  return dy;
}

std::vector<double> endemic_equilibrium(const ModelSpec& spec) {
  require_supercritical(spec);
  const auto& g = spec.groups;
  const double d = solve_D(g.lambda, g.mu, g.f, spec.beta, spec.gamma).root;
  std::vector<double> y(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) y[i] = g.mu[i] * g.f[i] * d / (1.0 + g.mu[i] * d);
  return y;
}

std::vector<double> theta_star(const ModelSpec& spec) {
  require_supercritical(spec);
  const auto& g = spec.groups;
  // The B equation's left side is strictly decreasing on the admissible
  // range B > -1/max(lambda), so D(mu, lambda) is the only nonzero root.
  const double d = solve_D(g.mu, g.lambda, g.f, spec.beta, spec.gamma).root;
  std::vector<double> th(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) th[i] = -std::log1p(g.lambda[i] * d);
  return th;
}

std::vector<double> theta_equilibrium_residual(const ModelSpec& spec,
                                               std::span<const double> theta) {
  const auto& g = spec.groups;
  double s = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) s += g.mu[j] * g.f[j] * std::expm1(theta[j]);
  std::vector<double> r(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    r[i] = spec.beta * g.lambda[i] * s + spec.gamma * std::expm1(-theta[i]);
  return r;
}

ActionResult action_closed_form(const ModelSpec& spec) {
  const auto& g = spec.groups;
  const bool mu1 = all_ones(g.mu);
  const bool lambda1 = all_ones(g.lambda);
  if (!mu1 && !lambda1) {
    throw MixedHeterogeneity(
        "both infectivity and susceptibility are heterogeneous; no closed-form action "
        "exists, use the heteroclinic boundary-value solver (bvp)");
  }
  require_supercritical(spec);
  const auto one = ones(g.size());

  ActionResult res;
  // The homogeneous case runs through the general formula with b = 1.
  const std::vector<double>& b = mu1 ? g.lambda : g.mu;
  res.variant = mu1 ? (lambda1 ? ActionVariant::homogeneous : ActionVariant::hetero_infectivity)
                    : ActionVariant::hetero_susceptibility;
  res.d_value = solve_D(one, b, g.f, spec.beta, spec.gamma).root;
  res.action = action_formula(b, g.f, res.d_value, spec.beta, spec.gamma);
  res.y_star = endemic_equilibrium(spec);
  res.theta_star = theta_star(spec);
  return res;
}

double action_homogeneous(double r0) {
  if (r0 < 1.0) {
    std::ostringstream os;
    os << "R0 = " << r0 << " < 1";
    throw Subcritical(os.str());
  }
  return 1.0 / r0 - 1.0 + std::log(r0);
}

// ---------------------------------------------------------------------------

PotentialPoint potential_V_susceptibility(const ModelSpec& spec, std::span<const double> y) {
  require_lambda_ones(spec, "V(y)");
  const auto& g = spec.groups;
  if (y.size() != g.size()) throw InvalidModel("V(y): dimension mismatch");
  const double c = spec.beta / spec.gamma;
  double total = 0.0;
  double v = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (y[i] < -kSimplexSlack || y[i] > g.f[i] + kSimplexSlack)
      throw InvalidModel("V(y): point outside 0 <= y_i <= f_i");
    const double yi = std::clamp(y[i], 0.0, g.f[i]);
    total += yi;
    v += yi + xlogx(yi) - yi * std::log(c * g.mu[i]) + xlogx(g.f[i] - yi);
  }
  v -= xlogx(total);
  return {std::vector<double>(y.begin(), y.end()), v, 0.0};
}

std::vector<double> gradient_V_susceptibility(const ModelSpec& spec, std::span<const double> y) {
  require_lambda_ones(spec, "grad V(y)");
  const auto& g = spec.groups;
  const double c = spec.beta / spec.gamma;
  double total = 0.0;
  for (double yi : y) total += yi;
  std::vector<double> grad(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    grad[i] = std::log(y[i] / (c * g.mu[i] * (g.f[i] - y[i]) * total));
  return grad;
}

namespace {

// Shared root solver for Q and Q_s: (c) sum w_j f_j / (1 + w_j Q) = 1 with
// per-group weights w_j > 0.
RootResult solve_weighted_q(std::span<const double> w, std::span<const double> f, double c) {
  const auto g = [&](double q) {
    double s = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) s += w[j] * f[j] / (1.0 + w[j] * q);
    return c * s - 1.0;
  };
  const auto dg = [&](double q) {
    double s = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) {
      const double den = 1.0 + w[j] * q;
      s -= w[j] * w[j] * f[j] / (den * den);
    }
    return c * s;
  };
  const double g0 = g(0.0);
  if (std::abs(g0) <= 1e-13) return RootResult{0.0, 0.0, 0.0, g0, 0};
  if (g0 < 0.0) {
    std::ostringstream os;
    os << "Q equation has no nonnegative root (left side at 0 is " << g0 + 1.0 << ")";
    throw NoRoot(os.str());
  }
  return solve_decreasing(g, dg, 0.0);
}

}  // namespace

RootResult solve_Q(const ModelSpec& spec, std::span<const double> theta) {
  require_lambda_ones(spec, "Q(mu, theta)");
  const auto& g = spec.groups;
  // mu_j f_j / (e^-theta_j + mu_j Q) = w_j f_j / (1 + w_j Q) with w_j = mu_j e^theta_j
  std::vector<double> w(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) w[j] = g.mu[j] * std::exp(theta[j]);
  return solve_weighted_q(w, g.f, spec.beta / spec.gamma);
}

PotentialPoint potential_U_susceptibility(const ModelSpec& spec, std::span<const double> theta) {
  const auto& g = spec.groups;
  const double q = solve_Q(spec, theta).root;
  double u = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) u += g.f[i] * std::log1p(g.mu[i] * std::exp(theta[i]) * q);
  u -= spec.gamma / spec.beta * q;
  return {std::vector<double>(theta.begin(), theta.end()), u, q};
}

// ---------------------------------------------------------------------------

RootResult solve_Ds(const ModelSpec& spec) {
  require_supercritical(spec);
  const auto& g = spec.groups;
  const int s = spec.stages;
  const double c = spec.beta / (s * spec.gamma);
  const auto lhs = [&](double d) {
    double total = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double x = 1.0 / (1.0 + g.lambda[j] * d);
      double geo = 0.0;
      double p = 1.0;
      for (int v = 1; v <= s; ++v) {
        p *= x;
        geo += p;
      }
      total += g.mu[j] * g.f[j] * g.lambda[j] * geo;
    }
    return c * total - 1.0;
  };
  const auto dlhs = [&](double d) {
    double total = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double x = 1.0 / (1.0 + g.lambda[j] * d);
      double p = x;
      double acc = 0.0;
      for (int v = 1; v <= s; ++v) {
        p *= x;  // x^{v+1}
        acc -= v * g.lambda[j] * p;
      }
      total += g.mu[j] * g.f[j] * g.lambda[j] * acc;
    }
    return c * total;
  };
  return solve_decreasing(lhs, dlhs, 0.0);
}

StageMatrix theta_star_erlang(const ModelSpec& spec) {
  const auto& g = spec.groups;
  const std::size_t s = static_cast<std::size_t>(spec.stages);
  const double d = solve_Ds(spec).root;
  StageMatrix th(g.size(), s);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double l = std::log1p(g.lambda[i] * d);
    for (std::size_t v = 0; v < s; ++v) th(i, v) = -static_cast<double>(s - v) * l;
  }
  return th;
}

StageMatrix endemic_equilibrium_erlang(const ModelSpec& spec) {
  const auto y = endemic_equilibrium(spec);
  const std::size_t s = static_cast<std::size_t>(spec.stages);
  StageMatrix m(y.size(), s);
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t v = 0; v < s; ++v) m(i, v) = y[i] / static_cast<double>(s);
  return m;
}

double hamiltonian_erlang(const ModelSpec& spec, const StageMatrix& y, const StageMatrix& theta) {
  const auto& g = spec.groups;
  const std::size_t s = y.stages;
  const double rate = static_cast<double>(s) * spec.gamma;
  double force = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) force += g.lambda[j] * y.group_total(j);
  double infection = 0.0;
  double progression = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    infection += g.mu[i] * (g.f[i] - y.group_total(i)) * std::expm1(theta(i, 0));
    for (std::size_t v = 0; v + 1 < s; ++v)
      progression += y(i, v) * std::expm1(-theta(i, v) + theta(i, v + 1));
    progression += y(i, s - 1) * std::expm1(-theta(i, s - 1));
  }
  return spec.beta * force * infection + rate * progression;
}

StageMatrix erlang_theta_residual(const ModelSpec& spec, const StageMatrix& theta) {
  const auto& g = spec.groups;
  const std::size_t s = theta.stages;
  const double rate = static_cast<double>(s) * spec.gamma;
  double infection = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) infection += g.mu[i] * g.f[i] * std::expm1(theta(i, 0));
  StageMatrix r(g.size(), s);
  for (std::size_t j = 0; j < g.size(); ++j) {
    for (std::size_t v = 0; v < s; ++v) {
      const double next = (v + 1 < s) ? theta(j, v + 1) : 0.0;
      r(j, v) = -(spec.beta * g.lambda[j] * infection + rate * std::expm1(-theta(j, v) + next));
    }
  }
  return r;
}

PotentialPoint potential_V_erlang_susceptibility(const ModelSpec& spec, const StageMatrix& y) {
  require_lambda_ones(spec, "Erlang V(y)");
  const auto& g = spec.groups;
  const double c = spec.beta / (static_cast<double>(y.stages) * spec.gamma);
  double total = 0.0;
  double v = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double yi = y.group_total(i);
    if (yi > g.f[i] + kSimplexSlack) throw InvalidModel("Erlang V(y): stage totals exceed f_i");
    const double ln_c = std::log(c * g.mu[i]);
    for (std::size_t s = 0; s < y.stages; ++s) {
      const double x = y(i, s);
      if (x < -kSimplexSlack) throw InvalidModel("Erlang V(y): negative stage occupancy");
      v += x + xlogx(std::max(x, 0.0)) - x * ln_c;
    }
    total += yi;
    v += xlogx(std::max(g.f[i] - yi, 0.0));
  }
  v -= xlogx(total);
  return {y.values, v, 0.0};
}

StageMatrix gradient_V_erlang_susceptibility(const ModelSpec& spec, const StageMatrix& y) {
  require_lambda_ones(spec, "Erlang grad V(y)");
  const auto& g = spec.groups;
  const double c = spec.beta / (static_cast<double>(y.stages) * spec.gamma);
  double total = 0.0;
  for (double x : y.values) total += x;
  StageMatrix grad(y.groups, y.stages);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double free = g.f[i] - y.group_total(i);
    for (std::size_t v = 0; v < y.stages; ++v)
      grad(i, v) = std::log(y(i, v) / (c * g.mu[i] * total * free));
  }
  return grad;
}

RootResult solve_Qs(const ModelSpec& spec, const StageMatrix& theta) {
  require_lambda_ones(spec, "Q_s(mu, theta)");
  const auto& g = spec.groups;
  std::vector<double> w(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    double e = 0.0;
    for (std::size_t v = 0; v < theta.stages; ++v) e += std::exp(theta(j, v));
    w[j] = g.mu[j] * e;
  }
  return solve_weighted_q(w, g.f, spec.beta / (spec.gamma * static_cast<double>(theta.stages)));
}

PotentialPoint potential_U_erlang(const ModelSpec& spec, const StageMatrix& theta) {
  const auto& g = spec.groups;
  const double q = solve_Qs(spec, theta).root;
  double u = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double e = 0.0;
    for (std::size_t v = 0; v < theta.stages; ++v) e += std::exp(theta(i, v));
    u += g.f[i] * std::log1p(g.mu[i] * e * q);
  }
  u -= spec.gamma * static_cast<double>(theta.stages) / spec.beta * q;
  return {theta.values, u, q};
}

ActionResult action_erlang_susceptibility(const ModelSpec& spec) {
  require_lambda_ones(spec, "Erlang action");
  require_supercritical(spec);
  const std::size_t s = static_cast<std::size_t>(spec.stages);
  const StageMatrix origin(spec.k(), s, 0.0);
  const StageMatrix ystar = endemic_equilibrium_erlang(spec);
  ActionResult res;
  res.variant = ActionVariant::erlang_susceptibility;
  res.action = potential_V_erlang_susceptibility(spec, origin).value -
               potential_V_erlang_susceptibility(spec, ystar).value;
  res.d_value = solve_Ds(spec).root;
  res.y_star = ystar.values;
  res.theta_star = theta_star_erlang(spec).values;
  return res;
}

// ---------------------------------------------------------------------------

namespace {

// Action from a single degree law: sum_i p_i ln(1 + i D) - (gamma/kappa) D
// with (kappa/gamma) sum_j j p_j / (1 + j D) = 1.
ActionResult degree_action(const std::map<int, double>& law, double kappa, double gamma,
                           ActionVariant variant) {
  std::vector<double> deg;
  std::vector<double> prob;
  for (const auto& [d, p] : law) {
    if (d == 0) continue;  // contributes to neither sum
    deg.push_back(d);
    prob.push_back(p);
  }
  const std::vector<double> one(deg.size(), 1.0);
  ActionResult res;
  res.variant = variant;
  res.d_value = solve_D(one, deg, prob, kappa, gamma).root;
  res.action = action_formula(deg, prob, res.d_value, kappa, gamma);
  return res;
}

}  // namespace

ActionResult action_network_out(const DegreeDistribution& d) {
  validate_degrees(d);
  std::map<int, double> law;
  for (const auto& p : d.support) {
    if (p.d_in != d.support.front().d_in)
      throw InvalidModel("A_out requires every individual to share the same in-degree");
    law[p.d_out] += p.prob;
  }
  return degree_action(law, d.kappa, d.gamma, ActionVariant::network_out);
}

ActionResult action_network_in(const DegreeDistribution& d) {
  validate_degrees(d);
  std::map<int, double> law;
  for (const auto& p : d.support) {
    if (p.d_out != d.support.front().d_out)
      throw InvalidModel("A_in requires every individual to share the same out-degree");
    law[p.d_in] += p.prob;
  }
  return degree_action(law, d.kappa, d.gamma, ActionVariant::network_in);
}

}  // namespace sispersist
