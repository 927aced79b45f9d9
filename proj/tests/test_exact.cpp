#include "doctest.h"

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <cstdio>
#include <random>
#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

#include "sispersist/error.hpp"
#include "sispersist/exact.hpp"

using namespace sispersist;

namespace {

ModelSpec single(double beta, int n) {
  ModelSpec s;
  s.groups = {{1.0}, {1.0}, {1.0}};
  s.beta = beta;
  s.population = n;
  return validate(s);
}

ModelSpec random_spec(std::mt19937_64& rng, std::size_t k, int n, double r0lo = 1.2, double r0hi = 2.5) {
  std::uniform_real_distribution<double> u(0.2, 2.0);
  GroupStructure g;
  for (std::size_t i = 0; i < k; ++i) {
    g.f.push_back(1.0 / k);
    g.lambda.push_back(u(rng));
    g.mu.push_back(u(rng));
  }
  std::uniform_real_distribution<double> r(r0lo, r0hi);
  return spec_for_r0(std::move(g), 1.0, r(rng), 1, n);
}

// Mean absorption time from q by solving -Q_C t = 1.
double fundamental_tau(const ModelSpec& spec, const std::vector<double>& q) {
  Eigen::SparseMatrix<double> m = -build_generator(spec);
  m.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(m);
  REQUIRE(lu.info() == Eigen::Success);
  const Eigen::VectorXd t = lu.solve(Eigen::VectorXd::Ones(m.rows()));
  return Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size())).dot(t);
}

}  // namespace

TEST_CASE("state space encoding") {
  StateSpace s({2, 3, 1});
  CHECK(s.total_states() == 3 * 4 * 2);
  for (std::size_t i = 0; i < s.total_states(); ++i) {
    const auto x = s.decode(i);
    CHECK(s.encode(x) == i);
    for (std::size_t g = 0; g < 3; ++g) CHECK(s.digit(i, g) == x[g]);
  }
  CHECK(s.encode(std::vector<int>{0, 0, 1}) == 1);  // last group fastest
}

TEST_CASE("generator rows leak exactly the absorption rates") {
  std::mt19937_64 rng(1);
  const auto spec = random_spec(rng, 3, 12);
  const auto q = build_generator(spec);
  const auto leak = absorption_rates(spec);
  for (Eigen::Index r = 0; r < q.rows(); ++r) {
    double s = 0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(q, r); it; ++it) {
      s += it.value();
      if (it.col() != r) CHECK(it.value() > 0);
    }
    CHECK(std::abs(s + leak[r]) < 1e-12);
  }
}

TEST_CASE("two-state eigenvalue oracle") {
  // Q_C = [[-2.5, 1.5], [2, -2]] has eigenvalues -1/2 and -4
  const auto r = quasi_stationary(single(3.0, 2));
  CHECK(r.converged);
  CHECK(std::abs(r.tau - 2.0) < 1e-10);
  CHECK(r.residual < 1e-10);
  CHECK(r.q.size() == 2);
  // left eigenvector of -1/2: q (Q_C + I/2) = 0 gives q2 = q1
  CHECK(r.q[0] == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("dense Perron oracle") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 5; ++t) {
    const auto spec = random_spec(rng, 2, 14);
    const Eigen::MatrixXd q = Eigen::MatrixXd(build_generator(spec));
    const double lead = q.eigenvalues().real().maxCoeff();
    CHECK(quasi_stationary(spec).tau == doctest::Approx(-1.0 / lead).epsilon(1e-10));
  }
}

TEST_CASE("fundamental-matrix absorption time under q equals tau") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    const std::size_t k = 1 + t % 3;
    const int n = k == 1 ? 150 : (k == 2 ? 60 : 18);
    const auto spec = random_spec(rng, k, n, 1.1, 1.5);
    const auto r = quasi_stationary(spec);
    CHECK(r.space.total_states() <= 10001);
    CHECK(fundamental_tau(spec, r.q) == doctest::Approx(r.tau).epsilon(1e-8));
  }
}

TEST_CASE("exact duality under swapping infectivity and susceptibility") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 6; ++t) {
    const auto spec = random_spec(rng, 2, 10 + 8 * t);
    const double a = quasi_stationary(spec).tau;
    const double b = quasi_stationary(swap_infectivity_susceptibility(spec)).tau;
    CHECK(a == doctest::Approx(b).epsilon(1e-9));
  }
}

TEST_CASE("time rescaling") {
  std::mt19937_64 rng(5);
  auto spec = random_spec(rng, 2, 30);
  const double t1 = quasi_stationary(spec).tau;
  spec.beta *= 2.5;
  spec.gamma *= 2.5;
  CHECK(quasi_stationary(spec).tau == doctest::Approx(t1 / 2.5).epsilon(1e-10));
}

TEST_CASE("scalar and vector kernels give the same tau") {
  std::mt19937_64 rng(6);
  const auto spec = random_spec(rng, 2, 80);
  ExactOptions a;
  a.isa = kernels::Isa::scalar;
  ExactOptions b;
  const auto ra = quasi_stationary(spec, a);
  const auto rb = quasi_stationary(spec, b);
  CHECK(ra.tau == doctest::Approx(rb.tau).epsilon(1e-11));
}

TEST_CASE("subcritical and small populations still converge") {
  const auto r = quasi_stationary(single(0.5, 40));
  CHECK(r.converged);
  CHECK(r.tau > 0);
  CHECK(r.tau < 10);
}

TEST_CASE("transient distribution matches the matrix exponential") {
  std::mt19937_64 rng(7);
  const auto spec = random_spec(rng, 2, 6);
  // full generator including the absorbing state
  const auto qc = build_generator(spec);
  const auto leak = absorption_rates(spec);
  const Eigen::Index n = qc.rows() + 1;
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(n, n);
  full.bottomRightCorner(n - 1, n - 1) = Eigen::MatrixXd(qc);
  for (Eigen::Index i = 1; i < n; ++i) full(i, 0) = leak[i - 1];
  const std::vector<int> x0{2, 3};
  const StateSpace space({3, 3});
  const auto start = static_cast<Eigen::Index>(space.encode(x0));
  for (double t : {0.0, 0.3, 2.0}) {
    const Eigen::MatrixXd e = (full * t).exp();
    const auto p = transient_distribution(spec, x0, t);
    double total = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      CHECK(std::abs(p[j] - e(start, j)) < 1e-12);
      total += p[j];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("state cap and options") {
  ModelSpec s = single(2.0, 100);
  ExactOptions o;
  o.state_cap = 50;
  CHECK_THROWS_AS(quasi_stationary(s, o), StateSpaceTooLarge);
  o = {};
  o.max_iters = 10;
  CHECK_THROWS_AS(quasi_stationary(s, o), ConvergenceFailure);
  o.throw_on_failure = false;
  CHECK_FALSE(quasi_stationary(s, o).converged);
  CHECK_THROWS_AS(finite_n_action_estimate(s, 100, 100), InvalidModel);
  ModelSpec no_pop = s;
  no_pop.population.reset();
  CHECK_THROWS_AS(quasi_stationary(no_pop), InvalidModel);
}

TEST_CASE("profile, dump and cache") {
  const auto spec = single(2.0, 50);
  const auto r = quasi_stationary(spec);
  const auto prof = log_qsd_profile(spec, r);
  CHECK(prof.size() == 50);
  CHECK(prof[0].y[0] == doctest::Approx(1.0 / 50));

  std::ostringstream os;
  write_qsd_csv(os, r);
  std::size_t lines = 0;
  for (char c : os.str()) lines += c == '\n';
  CHECK(lines == 3 + 1 + 50);

  const std::string path = "test_exact_cache.bin";
  std::remove(path.c_str());
  {
    TauCache c(path);
    CHECK_FALSE(c.find(spec).has_value());
    c.store(spec, {r.tau, r.residual});
    c.flush();
  }
  TauCache c(path);
  REQUIRE(c.find(spec).has_value());
  CHECK(c.find(spec)->tau == r.tau);
  CHECK_FALSE(c.find(single(2.0, 51)).has_value());
  std::remove(path.c_str());
}
