#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <random>

#include "sispersist/error.hpp"
#include "sispersist/ordering.hpp"

using namespace sispersist;

namespace {

// The definition taken literally: some permutation sorting both vectors
// non-increasingly, equal weighted sums, dominated weighted partial sums.
bool brute_p_majorizes(const std::vector<double>& x1, const std::vector<double>& x2, const std::vector<double>& p) {
  const std::size_t k = x1.size();
  double s1 = 0, s2 = 0;
  for (std::size_t i = 0; i < k; ++i) s1 += p[i] * x1[i], s2 += p[i] * x2[i];
  if (std::abs(s1 - s2) > 1e-12) return false;
  std::vector<std::size_t> sigma(k);
  std::iota(sigma.begin(), sigma.end(), 0);
  do {
    bool sorted = true;
    for (std::size_t j = 0; j + 1 < k; ++j)
      if (x1[sigma[j + 1]] > x1[sigma[j]] + 1e-12 || x2[sigma[j + 1]] > x2[sigma[j]] + 1e-12) sorted = false;
    if (!sorted) continue;
    double a = 0, b = 0;
    bool ok = true;
    for (std::size_t j = 0; j + 1 < k; ++j) {
      a += p[sigma[j]] * x1[sigma[j]];
      b += p[sigma[j]] * x2[sigma[j]];
      if (a > b + 1e-12) ok = false;
    }
    if (ok) return true;
  } while (std::next_permutation(sigma.begin(), sigma.end()));
  return false;
}

std::vector<double> random_weights(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<double> p(k);
  double s = 0;
  for (double& x : p) s += (x = u(rng));
  for (double& x : p) x /= s;
  return p;
}

}  // namespace

TEST_CASE("plain majorization examples") {
  const std::vector<double> a{1, 1}, b{1.5, 0.5}, c{1.4, 0.8};
  CHECK(majorizes(a, b));
  CHECK(majorizes(a, a));
  CHECK_FALSE(majorizes(a, c));
  CHECK_FALSE(majorizes(b, a));
  CHECK_THROWS_AS(majorizes(a, std::vector<double>{1, 1, 1}), InvalidModel);
}

TEST_CASE("p-majorization examples") {
  const std::vector<double> x{1, 1};
  CHECK(p_majorizes(x, x, std::vector<double>{0.5, 0.5}));
  CHECK(p_majorizes(std::vector<double>{1, 1}, std::vector<double>{10.0 / 9, 0}, std::vector<double>{0.9, 0.1}));
  CHECK(p_majorizes(WeightedVector{{1, 1}, {0.9, 0.1}}, WeightedVector{{10.0 / 9, 0}, {0.9, 0.1}}));
  CHECK_THROWS_AS(p_majorizes(WeightedVector{{1, 1}, {0.9, 0.1}}, WeightedVector{{1, 1}, {0.5, 0.5}}), InvalidModel);
  // opposite sort orders have no common permutation
  CHECK_FALSE(p_majorizes(std::vector<double>{1.2, 0.8}, std::vector<double>{0.5, 1.5}, std::vector<double>{0.5, 0.5}));
  // ties in x1 let either order of x2 through
  CHECK(p_majorizes(std::vector<double>{1, 1, 1}, std::vector<double>{0.5, 2, 0.5}, std::vector<double>{1. / 3, 1. / 3, 1. / 3}));
}

TEST_CASE("p-majorization agrees with brute-force enumeration") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  int positives = 0;
  for (int t = 0; t < 2000; ++t) {
    const std::size_t k = 2 + t % 4;
    const auto p = random_weights(rng, k);
    std::vector<double> x1(k), x2(k);
    // coarse values create ties; x2 is shifted to match the weighted sum of x1
    for (std::size_t i = 0; i < k; ++i) x1[i] = 0.5 * (1 + rng() % 4), x2[i] = 0.5 * (1 + rng() % 4);
    if (t % 3 == 0) x2 = spread_along_order(x1, p, [&] {
      std::vector<double> g(k);
      for (double& v : g) v = u(rng);
      std::sort(g.begin(), g.end(), std::greater<>());
      return g;
    }(), 0.5);
    double s1 = 0, s2 = 0;
    for (std::size_t i = 0; i < k; ++i) s1 += p[i] * x1[i], s2 += p[i] * x2[i];
    if (t % 3 != 0) {
      for (double& v : x2) v += s1 - s2;
    }
    const bool expect = brute_p_majorizes(x1, x2, p);
    positives += expect;
    CHECK(p_majorizes(x1, x2, p) == expect);
  }
  CHECK(positives > 200);
}

TEST_CASE("uniform weights reduce to plain majorization on co-sorted vectors") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (int t = 0; t < 500; ++t) {
    const std::size_t k = 2 + t % 5;
    std::vector<double> x1(k), x2(k);
    for (auto& v : x1) v = u(rng);
    for (auto& v : x2) v = u(rng);
    std::sort(x1.begin(), x1.end(), std::greater<>());
    std::sort(x2.begin(), x2.end(), std::greater<>());
    const double shift = (std::accumulate(x1.begin(), x1.end(), 0.0) - std::accumulate(x2.begin(), x2.end(), 0.0)) / k;
    for (auto& v : x2) v += shift;
    const std::vector<double> p(k, 1.0 / k);
    CHECK(p_majorizes(x1, x2, p) == majorizes(x1, x2));
  }
}

TEST_CASE("spread family") {
  const WeightedVector base{{1, 1}, {0.5, 0.5}};
  const double eps[] = {0.0, 0.5, 0.9};
  const auto fam = spread_family(base, eps);
  CHECK(fam[1] == std::vector<double>{1.5, 0.5});
  const double bad[] = {1.0};
  CHECK_THROWS_AS(spread_family(base, bad), InvalidModel);

  // the figure 1 infectivity is the member at eps = 49/51
  const double e1[] = {49.0 / 51};
  const auto fig = spread_family(base, e1)[0];
  CHECK(fig[0] == doctest::Approx(100.0 / 51));
  CHECK(fig[1] == doctest::Approx(2.0 / 51));
  CHECK(p_majorizes(base.values, fig, base.weights));

  // pairwise results form a total order consistent with eps
  std::mt19937_64 rng(3);
  const WeightedVector b3{{1.2, 1.0, 0.6}, random_weights(rng, 3)};
  double s = 0;
  for (std::size_t i = 0; i < 3; ++i) s += b3.weights[i] * b3.values[i];
  WeightedVector nb = b3;
  for (double& v : nb.values) v /= s;
  const double es[] = {0.0, 0.02, 0.05, 0.1, 0.15};
  const auto f3 = spread_family(nb, es);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(p_majorizes(f3[i], f3[j], nb.weights) == (i <= j));
}

TEST_CASE("convex order against angle functions") {
  CHECK(convex_order_leq({{0, 0, 0, 1, 0, 0, 0}}, {{0.1, 0.2, 0.1, 0.2, 0.1, 0.2, 0.1}}));
  const IntegerLaw a{{0.2, 0.3, 0.5}};
  CHECK(convex_order_leq(a, a));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int agree_true = 0;
  for (int t = 0; t < 3000; ++t) {
    std::vector<double> pa(7, 0.0), pb(7, 0.0);
    double sa = 0, sb = 0;
    for (int i = 1; i <= 6; ++i) sa += (pa[i] = u(rng)), sb += (pb[i] = u(rng));
    for (auto& v : pa) v /= sa;
    for (auto& v : pb) v /= sb;
    // move mass in b between two points so the means agree when possible
    double ma = 0, mb = 0;
    for (int i = 1; i <= 6; ++i) ma += i * pa[i], mb += i * pb[i];
    const int lo = 1, hi = 6;
    const double shift = (ma - mb) / (hi - lo);
    if (shift > 0 && pb[lo] >= shift) pb[lo] -= shift, pb[hi] += shift;
    else if (shift < 0 && pb[hi] >= -shift) pb[hi] += shift, pb[lo] -= shift;
    else continue;
    const IntegerLaw la{pa}, lb{pb};
    bool oracle = std::abs(la.mean() - lb.mean()) <= 1e-12;
    for (int c = 1; c <= 6 && oracle; ++c) {
      double ea = 0, eb = 0;
      for (int i = 0; i <= 6; ++i) ea += pa[i] * std::max(i - c, 0), eb += pb[i] * std::max(i - c, 0);
      if (ea > eb + 1e-12) oracle = false;
    }
    agree_true += oracle;
    CHECK(convex_order_leq(la, lb) == oracle);
  }
  CHECK(agree_true > 50);
}

TEST_CASE("validation") {
  CHECK_THROWS_AS(validate(WeightedVector{{1, -1}, {0.5, 0.5}}), InvalidModel);
  CHECK_THROWS_AS(validate(WeightedVector{{1, 1}, {0.5, 0.6}}), InvalidModel);
  CHECK_THROWS_AS(validate(IntegerLaw{{0.5, 0.6}}), InvalidModel);
  CHECK(IntegerLaw{{0.25, 0.5, 0.25}}.mean() == doctest::Approx(1.0));
}
