#include "sispersist/ordering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sispersist/error.hpp"

namespace sispersist {

namespace {

bool same(double a, double b) { return std::abs(a - b) <= kOrderTol; }

std::vector<std::size_t> decreasing_order(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  return idx;
}

bool dominated_along(std::span<const std::size_t> sigma, std::span<const double> x1,
                     std::span<const double> x2, std::span<const double> p) {
  double s1 = 0.0;
  double s2 = 0.0;
  for (std::size_t j = 0; j + 1 < sigma.size(); ++j) {
    s1 += p[sigma[j]] * x1[sigma[j]];
    s2 += p[sigma[j]] * x2[sigma[j]];
    if (s1 > s2 + kOrderTol) return false;
  }
  return true;
}

}  // namespace

double IntegerLaw::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) m += static_cast<double>(i) * probs[i];
  return m;
}

void validate(const WeightedVector& v) {
  if (v.values.size() != v.weights.size()) throw InvalidModel("values and weights differ in length");
  if (v.values.empty()) throw InvalidModel("empty weighted vector");
  for (double x : v.values)
    if (!(x > 0.0)) throw InvalidModel("weighted vector values must be positive");
  double total = 0.0;
  for (double w : v.weights) {
    if (!(w > 0.0)) throw InvalidModel("weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > kOrderTol) throw InvalidModel("weights do not sum to 1");
}

void validate(const IntegerLaw& law) {
  if (law.probs.empty()) throw InvalidModel("empty integer law");
  double total = 0.0;
  for (double p : law.probs) {
    if (p < 0.0) throw InvalidModel("negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > kOrderTol) throw InvalidModel("integer law does not sum to 1");
}

bool majorizes(std::span<const double> x1, std::span<const double> x2) {
  if (x1.size() != x2.size()) throw InvalidModel("majorization needs equal lengths");
  std::vector<double> a(x1.begin(), x1.end());
  std::vector<double> b(x2.begin(), x2.end());
  std::sort(a.begin(), a.end(), std::greater<>());
  std::sort(b.begin(), b.end(), std::greater<>());
  double sa = 0.0;
  double sb = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    sa += a[j];
    sb += b[j];
    if (j + 1 < a.size() && sa > sb + kOrderTol) return false;
  }
  return same(sa, sb);
}

bool p_majorizes(std::span<const double> x1, std::span<const double> x2, std::span<const double> p) {
  const std::size_t k = x1.size();
  if (x2.size() != k || p.size() != k) throw InvalidModel("p-majorization needs equal lengths");
  double w1 = 0.0;
  double w2 = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    w1 += p[i] * x1[i];
    w2 += p[i] * x2[i];
  }
  if (!same(w1, w2)) return false;

  // Any admissible permutation orders by x1 and, inside ties of x1, by x2.
  std::vector<std::size_t> sigma(k);
  std::iota(sigma.begin(), sigma.end(), 0);
  std::stable_sort(sigma.begin(), sigma.end(), [&](std::size_t a, std::size_t b) {
    if (!same(x1[a], x1[b])) return x1[a] > x1[b];
    if (!same(x2[a], x2[b])) return x2[a] > x2[b];
    return false;
  });
  for (std::size_t j = 0; j + 1 < k; ++j)
    if (x2[sigma[j + 1]] > x2[sigma[j]] + kOrderTol) return false;  // no common sorting permutation

  // Blocks tied in both vectors can be permuted freely.
  std::vector<std::pair<std::size_t, std::size_t>> blocks;
  for (std::size_t s = 0; s < k;) {
    std::size_t e = s + 1;
    while (e < k && same(x1[sigma[e]], x1[sigma[s]]) && same(x2[sigma[e]], x2[sigma[s]])) ++e;
    if (e - s > 1) blocks.emplace_back(s, e);
    s = e;
  }
  for (auto [s, e] : blocks) std::sort(sigma.begin() + s, sigma.begin() + e);

  // Odometer over the permutations of every block.
  for (;;) {
    if (dominated_along(sigma, x1, x2, p)) return true;
    std::size_t b = 0;
    for (; b < blocks.size(); ++b) {
      auto [s, e] = blocks[b];
      if (std::next_permutation(sigma.begin() + s, sigma.begin() + e)) break;
      // wrapped around to sorted order; carry to the next block
    }
    if (b == blocks.size()) return false;
  }
}

bool p_majorizes(const WeightedVector& x1, const WeightedVector& x2) {
  if (x1.weights.size() != x2.weights.size()) throw InvalidModel("weights differ in length");
  for (std::size_t i = 0; i < x1.weights.size(); ++i)
    if (!same(x1.weights[i], x2.weights[i])) throw InvalidModel("p-majorization needs shared weights");
  return p_majorizes(x1.values, x2.values, x1.weights);
}

bool convex_order_leq(const IntegerLaw& a, const IntegerLaw& b) {
  if (!same(a.mean(), b.mean())) return false;
  const std::size_t n = std::max(a.probs.size(), b.probs.size());
  double ca = 0.0;
  double cb = 0.0;
  double sa = 0.0;
  double sb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ca += i < a.probs.size() ? a.probs[i] : 0.0;
    cb += i < b.probs.size() ? b.probs[i] : 0.0;
    sa += ca;
    sb += cb;
    if (sa > sb + kOrderTol) return false;
  }
  return true;
}

std::vector<std::vector<double>> spread_family(const WeightedVector& base, std::span<const double> epsilons) {
  validate(base);
  const auto& x = base.values;
  const auto& p = base.weights;
  std::size_t a = 0;
  std::size_t b = x.size() - 1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > x[a]) a = i;
    if (x[i] < x[b]) b = i;
  }
  std::vector<double> dir(x.size(), 0.0);
  if (a != b) {
    dir[a] += 0.5 / p[a];
    dir[b] -= 0.5 / p[b];
  }

  std::vector<std::vector<double>> out;
  for (double eps : epsilons) {
    if (eps < 0.0) throw InvalidModel("spread parameter must be nonnegative");
    std::vector<double> v(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      v[i] = x[i] + eps * dir[i];
      if (!(v[i] > 0.0)) {
        std::ostringstream os;
        os << "spread " << eps << " drives entry " << i << " to " << v[i];
        throw InvalidModel(os.str());
      }
    }
    out.push_back(std::move(v));
  }

  std::vector<std::size_t> order(epsilons.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return epsilons[i] < epsilons[j]; });
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    if (!p_majorizes(out[order[i]], out[order[i + 1]], p))
      throw Error("spread family failed its own ordering check");
  }
  return out;
}

std::vector<double> spread_along_order(std::span<const double> x1, std::span<const double> p,
                                       std::span<const double> g_sorted, double step) {
  const std::size_t k = x1.size();
  if (p.size() != k || g_sorted.size() != k) throw InvalidModel("spread needs equal lengths");
  for (std::size_t j = 0; j + 1 < k; ++j)
    if (g_sorted[j + 1] > g_sorted[j]) throw InvalidModel("spread profile must be non-increasing");
  const auto sigma = decreasing_order(x1);
  std::vector<double> d(k);
  double mean = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    d[sigma[j]] = g_sorted[j];
    mean += p[sigma[j]] * g_sorted[j];
  }
  double tmax = INFINITY;
  for (std::size_t i = 0; i < k; ++i) {
    d[i] -= mean;
    if (d[i] < 0.0) tmax = std::min(tmax, -x1[i] / d[i]);
  }
  if (!std::isfinite(tmax)) tmax = 0.0;  // constant profile: no spread
  std::vector<double> x2(k);
  for (std::size_t i = 0; i < k; ++i) x2[i] = x1[i] + step * tmax * d[i];
  return x2;
}

}  // namespace sispersist
