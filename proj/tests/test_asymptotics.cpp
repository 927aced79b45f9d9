#include "doctest.h"

#include <cmath>
#include <random>

#include "sispersist/asymptotics.hpp"
#include "sispersist/error.hpp"
#include "sispersist/hamiltonian.hpp"
#include "sispersist/ordering.hpp"

using namespace sispersist;

namespace {

ModelSpec fig1() { return spec_for_r0({{0.5, 0.5}, {100.0 / 51, 2.0 / 51}, {1, 1}}, 1.0, 1.5); }

// Plain bisection for (beta/gamma) sum a b f / (1 + b D) = 1.
double bisect_D(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& f,
                double c) {
  auto g = [&](double d) {
    double s = 0;
    for (std::size_t i = 0; i < f.size(); ++i) s += a[i] * b[i] * f[i] / (1 + b[i] * d);
    return c * s - 1;
  };
  double lo = 0, hi = 1;
  while (g(hi) > 0) hi *= 2;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> random_positive(std::mt19937_64& rng, std::size_t k, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(k);
  for (double& x : v) x = u(rng);
  return v;
}

ModelSpec random_single(std::mt19937_64& rng, bool susceptibility, double r0lo = 1.1, double r0hi = 2.5) {
  const std::size_t k = 2 + rng() % 4;
  GroupStructure g{random_positive(rng, k, 0.1, 1.0), random_positive(rng, k, 0.1, 3.0),
                   std::vector<double>(k, 1.0)};
  if (susceptibility) std::swap(g.lambda, g.mu);
  std::uniform_real_distribution<double> u(r0lo, r0hi);
  return spec_for_r0(std::move(g), 0.5 + (rng() % 3) * 0.5, u(rng));
}

}  // namespace

TEST_CASE("figure 1 closed-form values") {
  const auto s = fig1();
  const auto& g = s.groups;
  CHECK(solve_D(g.lambda, g.mu, g.f, s.beta, s.gamma).root == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(solve_D(g.mu, g.lambda, g.f, s.beta, s.gamma).root - 0.2625) < 1e-4);
  const auto y = endemic_equilibrium(s);
  CHECK(std::abs(y[0] - 1.0 / 6) < 1e-12);
  CHECK(std::abs(y[1] - 1.0 / 6) < 1e-12);
  const auto th = theta_star(s);
  CHECK(std::abs(th[0] + 0.4152) < 1e-4);
  CHECK(std::abs(th[1] + 0.0102) < 1e-4);
  const auto a = action_closed_form(s);
  CHECK(a.variant == ActionVariant::hetero_infectivity);
  CHECK(std::abs(a.action - 0.0377) < 1e-4);
  CHECK(std::abs(action_homogeneous(1.5) - 0.0721) < 1e-4);
}

TEST_CASE("figure 3 closed-form value") {
  const auto s = spec_for_r0({{0.5, 0.5}, {5.0 / 3, 1.0 / 3}, {1, 1}}, 1.0, 1.2);
  CHECK(std::abs(action_closed_form(s).action - 0.0110) < 1e-4);
}

TEST_CASE("solve_D agrees with bisection") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const std::size_t k = 1 + t % 6;
    const auto f0 = random_positive(rng, k, 0.1, 1.0);
    double s = 0;
    for (double x : f0) s += x;
    std::vector<double> f = f0;
    for (double& x : f) x /= s;
    const auto a = random_positive(rng, k, 0.1, 3.0);
    const auto b = random_positive(rng, k, 0.1, 3.0);
    double g0 = 0;
    for (std::size_t i = 0; i < k; ++i) g0 += a[i] * b[i] * f[i];
    const double beta = (1.05 + (t % 10) * 0.3) / g0;
    const double d = solve_D(a, b, f, beta, 1.0).root;
    CHECK(d == doctest::Approx(bisect_D(a, b, f, beta)).epsilon(1e-10));
  }
  CHECK_THROWS_AS(solve_D(std::vector<double>{1.0}, std::vector<double>{1.0}, std::vector<double>{1.0}, 0.9, 1.0),
                  Subcritical);
}

TEST_CASE("homogeneous reduction") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(1.01, 5.0);
  for (int t = 0; t < 100; ++t) {
    const std::size_t k = 1 + t % 4;
    const double r = u(rng);
    const auto s = spec_for_r0({random_positive(rng, k, 0.1, 1.0), std::vector<double>(k, 1.0),
                                std::vector<double>(k, 1.0)},
                               1.0, r);
    CHECK(std::abs(action_closed_form(s).action - (1 / r - 1 + std::log(r))) < 1e-12);
  }
  CHECK(action_homogeneous(1.0) == 0.0);
  CHECK_THROWS_AS(action_homogeneous(0.9), Subcritical);
}

TEST_CASE("equilibria and action invariants") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 60; ++t) {
    const auto s = random_single(rng, t % 2 == 1);
    const auto a = action_closed_form(s);
    CHECK(a.action > 0);
    CHECK(a.d_value > 0);
    const auto rhs = deterministic_rhs(s, a.y_star);
    for (std::size_t i = 0; i < s.k(); ++i) {
      CHECK(a.y_star[i] > 0);
      CHECK(a.y_star[i] < s.groups.f[i]);
      CHECK(a.theta_star[i] < 0);
      CHECK(std::abs(rhs[i]) < 1e-12);
    }
    for (double r : theta_equilibrium_residual(s, a.theta_star)) CHECK(std::abs(r) < 1e-12);
    // both equilibria lie on the zero-energy surface
    CHECK(std::abs(hamiltonian(s, {a.y_star, std::vector<double>(s.k(), 0.0)})) < 1e-14);
    CHECK(std::abs(hamiltonian(s, {std::vector<double>(s.k(), 0.0), a.theta_star})) < 1e-14);
  }
}

TEST_CASE("mixed heterogeneity has no closed form") {
  const auto s = spec_for_r0({{0.5, 0.5}, {1.5, 0.5}, {0.5, 1.5}}, 1.0, 1.2);
  CHECK_THROWS_AS(action_closed_form(s), MixedHeterogeneity);
  const auto sub = spec_for_r0({{0.5, 0.5}, {1.5, 0.5}, {1, 1}}, 1.0, 0.9);
  CHECK_THROWS_AS(action_closed_form(sub), Subcritical);
}

TEST_CASE("infectivity and susceptibility duality") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 30; ++t) {
    const auto s = random_single(rng, false);
    const auto w = swap_infectivity_susceptibility(s);
    CHECK(action_closed_form(w).variant == ActionVariant::hetero_susceptibility);
    CHECK(action_closed_form(w).action == doctest::Approx(action_closed_form(s).action).epsilon(1e-12));
  }
}

TEST_CASE("susceptibility potentials reproduce the action") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 30; ++t) {
    const auto s = random_single(rng, true);
    const auto a = action_closed_form(s);
    const std::vector<double> zero(s.k(), 0.0);
    const double v0 = potential_V_susceptibility(s, zero).value;
    const double vs = potential_V_susceptibility(s, a.y_star).value;
    CHECK(v0 - vs == doctest::Approx(a.action).epsilon(1e-10));
    const auto u_star = potential_U_susceptibility(s, a.theta_star);
    const auto u_zero = potential_U_susceptibility(s, zero);
    CHECK(u_star.q_value == doctest::Approx(0.0));
    CHECK(u_zero.value - u_star.value == doctest::Approx(a.action).epsilon(1e-9));

    // grad V vanishes at y* and satisfies H(y, grad V) = 0 elsewhere
    for (double g : gradient_V_susceptibility(s, a.y_star)) CHECK(std::abs(g) < 1e-10);
    std::vector<double> y(s.k());
    std::uniform_real_distribution<double> u(0.1, 0.9);
    for (std::size_t i = 0; i < s.k(); ++i) y[i] = u(rng) * s.groups.f[i];
    auto grad = gradient_V_susceptibility(s, y);
    std::vector<double> th(s.k());
    for (std::size_t i = 0; i < s.k(); ++i) th[i] = grad[i];
    CHECK(std::abs(hamiltonian(s, {y, th})) < 1e-12);
    // gradient against central differences
    for (std::size_t i = 0; i < s.k(); ++i) {
      auto yp = y, ym = y;
      const double h = 1e-6;
      yp[i] += h;
      ym[i] -= h;
      const double fd = (potential_V_susceptibility(s, yp).value - potential_V_susceptibility(s, ym).value) / (2 * h);
      CHECK(fd == doctest::Approx(grad[i]).epsilon(1e-6));
    }
  }
}

TEST_CASE("Erlang invariance of the susceptibility action") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 10; ++t) {
    auto s = random_single(rng, true);
    const double a1 = action_closed_form(s).action;
    for (int st = 1; st <= 6; ++st) {
      s.stages = st;
      const auto a = action_erlang_susceptibility(s);
      CHECK(std::abs(a.action - a1) < 1e-10);
      StageMatrix th(s.k(), st);
      th.values = a.theta_star;
      for (double r : erlang_theta_residual(s, th).values) CHECK(std::abs(r) < 1e-10);
      StageMatrix y(s.k(), st);
      y.values = a.y_star;
      CHECK(std::abs(hamiltonian_erlang(s, y, StageMatrix(s.k(), st))) < 1e-14);
      CHECK(std::abs(hamiltonian_erlang(s, StageMatrix(s.k(), st), th)) < 1e-12);
    }
  }
}

TEST_CASE("Erlang D_s at one stage is D(mu, lambda)") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    const auto s = random_single(rng, t % 2 == 0);
    const auto& g = s.groups;
    CHECK(solve_Ds(s).root ==
          doctest::Approx(solve_D(g.mu, g.lambda, g.f, s.beta, s.gamma).root).epsilon(1e-12));
    const auto th = theta_star_erlang(s);
    const auto t1 = theta_star(s);
    for (std::size_t i = 0; i < s.k(); ++i) CHECK(th(i, 0) == doctest::Approx(t1[i]).epsilon(1e-12));
  }
}

TEST_CASE("network actions") {
  // fixed in-degree 3, out-degree 5 or 1: the figure 3 shape
  DegreeDistribution d{{{3, 5, 0.5}, {3, 1, 0.5}}, 0.4, 1.0, 6};
  const auto out = action_network_out(d);
  CHECK(out.action == doctest::Approx(action_closed_form(from_degree_distribution(d)).action).epsilon(1e-12));
  CHECK_THROWS_AS(action_network_in(d), InvalidModel);

  DegreeDistribution dual{{{5, 3, 0.5}, {1, 3, 0.5}}, 0.4, 1.0, 6};
  CHECK(action_network_in(dual).action == doctest::Approx(out.action).epsilon(1e-12));

  // convex ordering of out-degree laws reverses the actions
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  int tested = 0;
  for (int t = 0; t < 200 && tested < 30; ++t) {
    // mean-preserving spread of a law on {1..6}
    std::vector<double> p(7, 0.0);
    double s = 0;
    for (int i = 2; i <= 5; ++i) s += (p[i] = u(rng));
    for (double& x : p) x /= s;
    const int c = 2 + static_cast<int>(rng() % 4);
    const double eps = std::min(p[c], 0.2) * u(rng);
    std::vector<double> q = p;
    q[c] -= eps;
    q[c - 1] += eps / 2;
    q[c + 1] += eps / 2;
    if (!convex_order_leq({p}, {q})) continue;
    double mean = 0;
    for (int i = 0; i <= 6; ++i) mean += i * p[i];
    // use the group-model form directly: mu = 1, lambda_j = j / mean
    auto group_action = [&](const std::vector<double>& pr) {
      GroupStructure g;
      for (int i = 1; i <= 6; ++i)
        if (pr[i] > 0) g.f.push_back(pr[i]), g.lambda.push_back(i / mean), g.mu.push_back(1.0);
      return action_closed_form(spec_for_r0(g, 1.0, 1.5)).action;
    };
    CHECK(group_action(p) >= group_action(q) - 1e-12);
    ++tested;
  }
  CHECK(tested == 30);
}
