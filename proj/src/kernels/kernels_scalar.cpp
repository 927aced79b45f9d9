#include <cmath>

#include "table.hpp"

namespace sispersist::kernels::detail {

namespace {

double dia_apply(std::size_t n, std::size_t ndiag, const std::ptrdiff_t* offsets,
                 const double* const* coefs, const double* x, double* out) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t d = 0; d < ndiag; ++d)
      acc += coefs[d][i] * x[static_cast<std::ptrdiff_t>(i) + offsets[d]];
    out[i] = acc;
    total += acc;
  }
  return total;
}

double dot(std::size_t n, const double* a, const double* b) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void scale_inplace(std::size_t n, double* a, double s) {
  for (std::size_t i = 0; i < n; ++i) a[i] *= s;
}

double max_abs_axpby(std::size_t n, double alpha, const double* x, double beta, const double* y) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::fmax(m, std::fabs(alpha * x[i] + beta * y[i]));
  return m;
}

}  // namespace

const Table& scalar_table() {
  static const Table t{dia_apply, dot, scale_inplace, max_abs_axpby};
  return t;
}

}  // namespace sispersist::kernels::detail
