#include "doctest.h"

#include <cmath>
#include <random>

#include "sispersist/asymptotics.hpp"
#include "sispersist/error.hpp"
#include "sispersist/hamiltonian.hpp"

using namespace sispersist;

namespace {

ModelSpec random_mixed(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.3, 1.7);
  const double l = u(rng), m = u(rng);
  return two_group_spec(l, m, 1.1 + 0.9 * std::uniform_real_distribution<double>(0, 1)(rng));
}

}  // namespace

TEST_CASE("equations of motion are Hamilton's equations") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.05, 0.45), v(-1.0, 0.5);
  for (int t = 0; t < 20; ++t) {
    const auto s = random_mixed(rng);
    PhasePoint p{{u(rng), u(rng)}, {v(rng), v(rng)}};
    const auto rhs = eom_rhs(s, p);
    const double h = 1e-6;
    for (std::size_t i = 0; i < 2; ++i) {
      auto a = p, b = p;
      a.theta[i] += h;
      b.theta[i] -= h;
      CHECK(rhs.dy[i] == doctest::Approx((hamiltonian(s, a) - hamiltonian(s, b)) / (2 * h)).epsilon(1e-7));
      a = p, b = p;
      a.y[i] += h;
      b.y[i] -= h;
      CHECK(rhs.dtheta[i] == doctest::Approx(-(hamiltonian(s, a) - hamiltonian(s, b)) / (2 * h)).epsilon(1e-7));
    }
    // Jacobian against central differences of the right-hand side
    const auto jac = eom_jacobian(s, p);
    for (std::size_t c = 0; c < 4; ++c) {
      auto a = p, b = p;
      (c < 2 ? a.y[c] : a.theta[c - 2]) += h;
      (c < 2 ? b.y[c] : b.theta[c - 2]) -= h;
      const auto ra = eom_rhs(s, a), rb = eom_rhs(s, b);
      for (std::size_t r = 0; r < 4; ++r) {
        const double fd = ((r < 2 ? ra.dy[r] : ra.dtheta[r - 2]) - (r < 2 ? rb.dy[r] : rb.dtheta[r - 2])) / (2 * h);
        CHECK(jac(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("homogeneous orbit reproduces A0") {
  const auto s = two_group_spec(1.0, 1.0, 1.2);
  const auto tr = solve_heteroclinic(s);
  CHECK(tr.converged);
  CHECK(tr.action() == doctest::Approx(action_homogeneous(1.2)).epsilon(1e-6));
  CHECK(tr.h_residual_max < 1e-8);
}

TEST_CASE("single heterogeneity orbits match the closed form") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.2, 1.8), r(1.1, 2.0);
  for (int t = 0; t < 4; ++t) {
    const bool susc = t % 2;
    const auto s = two_group_spec(susc ? 1.0 : u(rng), susc ? u(rng) : 1.0, r(rng));
    const auto tr = solve_heteroclinic(s);
    CHECK(tr.converged);
    CHECK(std::abs(tr.action() - action_closed_form(s).action) < 1e-4);
    CHECK(std::abs(tr.action_forward - tr.action_backward) < 1e-6);
    CHECK(tr.h_residual_max < 1e-8);
    CHECK(tr.left_distance <= BvpOptions{}.max_endpoint_distance);
    CHECK(tr.right_distance <= BvpOptions{}.max_endpoint_distance);
  }
}

TEST_CASE("mixed orbit symmetries") {
  const double a = solve_heteroclinic(two_group_spec(0.46, 1.54, 1.2)).action();
  const double b = solve_heteroclinic(two_group_spec(1.54, 0.46, 1.2)).action();
  const double c = solve_heteroclinic(two_group_spec(1.54, 0.46, 1.2)).action();
  CHECK(a == doctest::Approx(b).epsilon(1e-6));
  CHECK(b == c);
  CHECK(a < action_homogeneous(1.2));
}

TEST_CASE("orbit endpoints and monotone time grid") {
  const auto s = spec_for_r0({{0.5, 0.5}, {100.0 / 51, 2.0 / 51}, {1, 1}}, 1.0, 1.5);
  const auto tr = solve_heteroclinic(s);
  REQUIRE(tr.times.size() == tr.points.size());
  for (std::size_t i = 1; i < tr.times.size(); ++i) CHECK(tr.times[i] > tr.times[i - 1]);
  const auto ys = endemic_equilibrium(s);
  const auto ts = theta_star(s);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(std::abs(tr.points.front().y[i] - ys[i]) < 1e-5);
    CHECK(std::abs(tr.points.front().theta[i]) < 1e-5);
    CHECK(std::abs(tr.points.back().y[i]) < 1e-5);
    CHECK(std::abs(tr.points.back().theta[i] - ts[i]) < 1e-5);
  }
  CHECK(std::abs(tr.unfolding) < 1e-8);
}

TEST_CASE("continuation and grid") {
  const auto from = two_group_spec(1.0, 1.0, 1.2);
  const auto to = two_group_spec(0.82, 1.18, 1.2);
  const auto base = solve_heteroclinic(from);
  const auto cont = continue_heteroclinic(from, base, to);
  const auto direct = solve_heteroclinic(to);
  CHECK(cont.action() == doctest::Approx(direct.action()).epsilon(1e-7));

  const std::vector<double> ax{0.64, 1.0, 1.36};
  const auto g = action_grid(ax, ax, 1.2);
  REQUIRE(g.size() == 9);
  for (const auto& c : g) CHECK(c.converged);
  CHECK(g[4].action == doctest::Approx(action_homogeneous(1.2)).epsilon(1e-6));
  for (std::size_t i = 0; i < 9; ++i) {
    if (i == 4) continue;
    CHECK(g[i].action < g[4].action);
    CHECK(g[i].action == doctest::Approx(g[8 - i].action).epsilon(1e-6));  // half turn
  }
  CHECK(g[1].action == doctest::Approx(g[3].action).epsilon(1e-6));  // reflection
}

TEST_CASE("subcritical specs are rejected") {
  CHECK_THROWS_AS(solve_heteroclinic(two_group_spec(0.5, 1.5, 0.9)), Subcritical);
}
