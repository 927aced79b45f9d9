#pragma once

// Majorization, weighted (p-) majorization and convex order on integer laws,
// plus generators of ordered parameter vectors.

#include <cstdint>
#include <span>
#include <vector>

namespace sispersist {

inline constexpr double kOrderTol = 1e-12;

struct WeightedVector {
  std::vector<double> values;
  std::vector<double> weights;  // probability vector
};

/// Law on {0, ..., d_max}: probs[i] = P(X = i).
struct IntegerLaw {
  std::vector<double> probs;

  int d_max() const { return static_cast<int>(probs.size()) - 1; }
  double mean() const;
};

/// Throws InvalidModel unless values > 0, weights > 0 summing to 1 and the
/// lengths agree.
void validate(const WeightedVector& v);
void validate(const IntegerLaw& law);

/// x1 majorized by x2: equal sums and dominated partial sums of the
/// decreasing rearrangements. Throws InvalidModel on length mismatch.
bool majorizes(std::span<const double> x1, std::span<const double> x2);

/// x1 p-majorized by x2 for the shared weights p: some permutation sorts
/// both vectors non-increasingly, the weighted sums agree and the weighted
/// partial sums of x1 are dominated along it. Every permutation compatible
/// with ties is tried.
bool p_majorizes(const WeightedVector& x1, const WeightedVector& x2);
bool p_majorizes(std::span<const double> x1, std::span<const double> x2, std::span<const double> p);

/// a <=_cv b through partial sums of the distribution functions.
bool convex_order_leq(const IntegerLaw& a, const IntegerLaw& b);

/// x(eps) = base + eps * d with d = (e_a / p_a - e_b / p_b) / 2, a the first
/// largest and b the last smallest entry of base. The direction has zero
/// weighted sum, so the family increases in the p-majorization order; each
/// consecutive pair (after sorting eps) is checked before returning.
/// Throws InvalidModel if some eps leaves the positive orthant.
std::vector<std::vector<double>> spread_family(const WeightedVector& base, std::span<const double> epsilons);

/// x2 = x1 + t d with d_i = g_i - sum_j p_j g_j and g non-increasing along the
/// decreasing order of x1; t is the fraction `step` of the largest value
/// keeping x2 positive. Then x1 is p-majorized by x2.
std::vector<double> spread_along_order(std::span<const double> x1, std::span<const double> p,
                                       std::span<const double> g_sorted, double step);

}  // namespace sispersist
