#include "doctest.h"

#include <Eigen/Dense>
#include <random>

#include "sispersist/error.hpp"
#include "sispersist/model.hpp"

using namespace sispersist;

namespace {

ModelSpec raw(std::vector<double> f, std::vector<double> l, std::vector<double> m, double beta = 1.0) {
  ModelSpec s;
  s.groups = {std::move(f), std::move(l), std::move(m)};
  s.beta = beta;
  return s;
}

}  // namespace

TEST_CASE("validate rescales uniform vectors") {
  const auto s = validate(raw({1, 1}, {2, 2}, {3, 3}));
  CHECK(s.groups.f == std::vector<double>{0.5, 0.5});
  CHECK(s.groups.lambda == std::vector<double>{1.0, 1.0});
  CHECK(s.groups.mu == std::vector<double>{1.0, 1.0});
  CHECK(s.applied_scale.lambda == 2.0);
  CHECK(s.applied_scale.mu == 3.0);
  // the rescaling is absorbed by beta so R0 is unchanged
  CHECK(r0(s) == doctest::Approx(2.0 * 3.0 * 1.0));
}

TEST_CASE("validate normalizes the figure 1 infectivity") {
  const auto s = validate(raw({0.5, 0.5}, {50, 1}, {1, 1}));
  CHECK(s.groups.lambda[0] == doctest::Approx(100.0 / 51).epsilon(1e-15));
  CHECK(s.groups.lambda[1] == doctest::Approx(2.0 / 51).epsilon(1e-15));
}

TEST_CASE("validate rejects bad input") {
  CHECK_THROWS_AS(validate(raw({0.5, -0.5}, {1, 1}, {1, 1})), InvalidModel);
  CHECK_THROWS_AS(validate(raw({}, {}, {})), InvalidModel);
  CHECK_THROWS_AS(validate(raw({0.5, 0.5}, {1}, {1, 1})), InvalidModel);
  CHECK_THROWS_AS(validate(raw({1}, {1}, {1}, 0.0)), InvalidModel);
  auto s = raw({1}, {1}, {1});
  s.stages = 0;
  CHECK_THROWS_AS(validate(s), InvalidModel);
  s = raw({0.5, 0.5}, {1, 1}, {1, 1});
  s.population = 1;
  CHECK_THROWS_AS(validate(s), InvalidModel);
}

TEST_CASE("validate is idempotent") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  for (int t = 0; t < 50; ++t) {
    const std::size_t k = 1 + t % 5;
    std::vector<double> f(k), l(k), m(k);
    for (std::size_t i = 0; i < k; ++i) f[i] = u(rng), l[i] = u(rng), m[i] = u(rng);
    const auto once = validate(raw(f, l, m, u(rng)));
    const auto twice = validate(once);
    CHECK(twice.groups.f == once.groups.f);
    CHECK(twice.groups.lambda == once.groups.lambda);
    CHECK(twice.groups.mu == once.groups.mu);
    CHECK(twice.beta == once.beta);
  }
}

TEST_CASE("r0 equals the dominant eigenvalue of the next-generation matrix") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (int t = 0; t < 20; ++t) {
    ModelSpec s = validate(raw({u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)}, u(rng)));
    s.gamma = u(rng);
    Eigen::Matrix3d m;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = s.beta * s.groups.lambda[i] * s.groups.mu[j] * s.groups.f[j] / s.gamma;
    const double ev = m.eigenvalues().real().maxCoeff();
    CHECK(r0(s) == doctest::Approx(ev).epsilon(1e-12));
  }
  CHECK(r0(validate(raw({1}, {1}, {1}))) == 1.0);
}

TEST_CASE("beta_for_r0") {
  CHECK(beta_for_r0({{1}, {1}, {1}}, 1.0, 1.2) == doctest::Approx(1.2));
  GroupStructure g{{0.5, 0.5}, {1.5, 0.5}, {1.5, 0.5}};
  CHECK(beta_for_r0(g, 1.0, 1.2) == doctest::Approx(0.96).epsilon(1e-14));
  const auto s = spec_for_r0(g, 1.0, 1.2);
  CHECK(std::abs(r0(s) - 1.2) < 1e-12);
  const auto fig1 = spec_for_r0({{0.5, 0.5}, {50, 1}, {1, 1}}, 1.0, 1.5);
  CHECK(fig1.beta == doctest::Approx(1.5).epsilon(1e-14));
}

TEST_CASE("group counts use largest remainders") {
  CHECK(group_counts(std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}, 10) == std::vector<int>{4, 3, 3});
  CHECK(group_counts(std::vector<double>{0.5, 0.5}, 101) == std::vector<int>{51, 50});
  CHECK(group_counts(std::vector<double>{0.15, 0.85}, 10) == std::vector<int>{2, 8});
  CHECK_THROWS_AS(group_counts(std::vector<double>{0.01, 0.99}, 10), InvalidModel);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> f{u(rng), u(rng), u(rng), u(rng)};
    double s = 0;
    for (double x : f) s += x;
    for (double& x : f) x /= s;
    const int n = 40 + t;
    const auto c = group_counts(f, n);
    int tot = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      tot += c[i];
      CHECK(std::abs(c[i] - n * f[i]) < 1.0);
    }
    CHECK(tot == n);
  }
}

TEST_CASE("swap and merge") {
  const auto s = spec_for_r0({{0.25, 0.25, 0.5}, {2, 2, 0.5}, {1, 1, 1}}, 1.0, 1.5);
  const auto w = swap_infectivity_susceptibility(s);
  CHECK(w.groups.lambda == s.groups.mu);
  CHECK(w.groups.mu == s.groups.lambda);
  CHECK(r0(w) == doctest::Approx(r0(s)));
  const auto m = merge_equal_groups(s);
  CHECK(m.k() == 2);
  CHECK(m.groups.f[0] == doctest::Approx(0.5));
  CHECK(r0(m) == doctest::Approx(r0(s)));
}

TEST_CASE("degree distribution mapping") {
  DegreeDistribution reg{{{3, 3, 1.0}}, 0.5, 1.0, 0};
  const auto r = from_degree_distribution(reg);
  CHECK(r.k() == 1);
  CHECK(r.beta == doctest::Approx(1.5));
  CHECK(r.groups.lambda[0] == 1.0);

  DegreeDistribution d{{{3, 5, 0.5}, {3, 1, 0.5}}, 0.7, 1.0, 6};
  const auto s = from_degree_distribution(d);
  CHECK(s.groups.mu == std::vector<double>{1.0, 1.0});
  CHECK(s.groups.lambda[0] == doctest::Approx(5.0 / 3));
  CHECK(s.groups.lambda[1] == doctest::Approx(1.0 / 3));
  CHECK(s.beta == doctest::Approx(3 * 0.7));
  CHECK(s.applied_scale.lambda == 1.0);
  CHECK(s.applied_scale.mu == 1.0);

  CHECK_THROWS_AS(from_degree_distribution({{{1, 2, 1.0}}, 1.0, 1.0, 0}), InvalidModel);
  CHECK_THROWS_AS(from_degree_distribution({{}, 1.0, 1.0, 0}), InvalidModel);
  CHECK_THROWS_AS(from_degree_distribution({{{3, 3, 1.0}}, 1.0, 1.0, 2}), InvalidModel);

  // d_in = 0 points never get infected and are set aside
  const auto m = map_degree_distribution({{{0, 4, 0.25}, {2, 2, 0.25}, {4, 2, 0.5}}, 1.0, 1.0, 0});
  CHECK(m.excluded.size() == 1);
  CHECK(m.excluded_mass == doctest::Approx(0.25));
  CHECK(m.spec.k() == 2);
  // a point that can be infected but never transmits has no group form
  CHECK_THROWS_AS(from_degree_distribution({{{2, 0, 0.5}, {2, 4, 0.5}}, 1.0, 1.0, 0}), InvalidModel);
}

TEST_CASE("network r0 identity on random degree laws") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> deg(1, 8);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int t = 0; t < 40; ++t) {
    // independent in and out degrees with a shared marginal
    std::vector<int> a{deg(rng), deg(rng), deg(rng)};
    std::vector<double> p{u(rng), u(rng), u(rng)};
    double s = p[0] + p[1] + p[2];
    for (double& x : p) x /= s;
    DegreeDistribution d;
    d.kappa = u(rng);
    d.gamma = u(rng);
    double ein = 0, eio = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        d.support.push_back({a[i], a[j], p[i] * p[j]});
        ein += p[i] * p[j] * a[i];
        eio += p[i] * p[j] * a[i] * a[j];
      }
    const auto spec = from_degree_distribution(d);
    CHECK(r0(spec) == doctest::Approx(d.kappa / d.gamma * eio / ein).epsilon(1e-12));
  }
}
