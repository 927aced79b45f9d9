#pragma once

#include <functional>

namespace sispersist {

/// Root of a strictly decreasing function together with the final bracket.
struct RootResult {
  double root = 0.0;
  double lo = 0.0;  // g(lo) >= 0
  double hi = 0.0;  // g(hi) <= 0
  double residual = 0.0;
  int iterations = 0;
};

struct RootOptions {
  double bracket_width = 1e-8;
  double residual_tol = 1e-14;
  int max_newton = 50;
};

/// Finds the root of a strictly decreasing g on [lo, inf). Requires
/// g(lo) > 0. The upper end starts at max(1, 2*lo) and doubles until g
/// changes sign; bisection narrows the bracket to bracket_width and Newton
/// steps (kept inside the bracket) polish the residual.
/// Throws NoRoot if g(lo) <= 0 or no sign change is found.
RootResult solve_decreasing(const std::function<double(double)>& g,
                            const std::function<double(double)>& dg, double lo,
                            const RootOptions& opts = {});

}  // namespace sispersist
