#include "sispersist/roots.hpp"

#include <cmath>
#include <sstream>

#include "sispersist/error.hpp"

namespace sispersist {

RootResult solve_decreasing(const std::function<double(double)>& g,
                            const std::function<double(double)>& dg, double lo,
                            const RootOptions& opts) {
  RootResult r;
  const double g_lo = g(lo);
  if (!(g_lo > 0.0)) {
    std::ostringstream os;
    os << "no root above " << lo << ": g(lo) = " << g_lo;
    throw NoRoot(os.str());
  }
  double hi = std::max(1.0, 2.0 * std::abs(lo));
  int doublings = 0;
  while (g(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 1100 || !std::isfinite(hi)) throw NoRoot("no sign change found");
  }

  int it = 0;
  while (hi - lo > opts.bracket_width) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if (gm > 0.0) {
      lo = mid;
    } else if (gm < 0.0) {
      hi = mid;
    } else {
      lo = hi = mid;
    }
    ++it;
  }

  double x = 0.5 * (lo + hi);
  double gx = g(x);
  for (int n = 0; n < opts.max_newton && std::abs(gx) > opts.residual_tol; ++n) {
    if (gx > 0.0) lo = x; else hi = x;
    const double d = dg(x);
    double next = (d < 0.0) ? x - gx / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == x) break;
    x = next;
    gx = g(x);
    ++it;
  }
  if (gx > 0.0) lo = std::max(lo, x); else if (gx < 0.0) hi = std::min(hi, x);

  r.root = x;
  r.lo = lo;
  r.hi = hi;
  r.residual = gx;
  r.iterations = it;
  return r;
}

}  // namespace sispersist
