#include <arm_neon.h>

#include <cmath>

#include "table.hpp"

namespace sispersist::kernels::detail {

namespace {

double dia_apply(std::size_t n, std::size_t ndiag, const std::ptrdiff_t* offsets,
                 const double* const* coefs, const double* x, double* out) {
  float64x2_t total = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t d = 0; d < ndiag; ++d) {
      const float64x2_t c = vld1q_f64(coefs[d] + i);
      const float64x2_t v = vld1q_f64(x + static_cast<std::ptrdiff_t>(i) + offsets[d]);
      acc = vfmaq_f64(acc, c, v);
    }
    vst1q_f64(out + i, acc);
    total = vaddq_f64(total, acc);
  }
  double tail = 0.0;
  for (; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t d = 0; d < ndiag; ++d)
      acc = std::fma(coefs[d][i], x[static_cast<std::ptrdiff_t>(i) + offsets[d]], acc);
    out[i] = acc;
    tail += acc;
  }
  return vaddvq_f64(total) + tail;
}

double dot(std::size_t n, const double* a, const double* b) {
  float64x2_t s = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) s = vfmaq_f64(s, vld1q_f64(a + i), vld1q_f64(b + i));
  double out = vaddvq_f64(s);
  for (; i < n; ++i) out += a[i] * b[i];
  return out;
}

void scale_inplace(std::size_t n, double* a, double s) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(a + i, vmulq_n_f64(vld1q_f64(a + i), s));
  for (; i < n; ++i) a[i] *= s;
}

double max_abs_axpby(std::size_t n, double alpha, const double* x, double beta, const double* y) {
  float64x2_t m = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t r = vfmaq_n_f64(vmulq_n_f64(vld1q_f64(y + i), beta), vld1q_f64(x + i), alpha);
    m = vmaxq_f64(m, vabsq_f64(r));
  }
  double out = vmaxvq_f64(m);
  for (; i < n; ++i) out = std::fmax(out, std::fabs(alpha * x[i] + beta * y[i]));
  return out;
}

}  // namespace

const Table& neon_table() {
  static const Table t{dia_apply, dot, scale_inplace, max_abs_axpby};
  return t;
}

}  // namespace sispersist::kernels::detail
