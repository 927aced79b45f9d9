#include <immintrin.h>

#include <cmath>

#include "table.hpp"

namespace sispersist::kernels::detail {

namespace {

double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d m = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(m, _mm_unpackhi_pd(m, m)));
}

double dia_apply(std::size_t n, std::size_t ndiag, const std::ptrdiff_t* offsets,
                 const double* const* coefs, const double* x, double* out) {
  __m256d total = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t d = 0; d < ndiag; ++d) {
      const __m256d c = _mm256_loadu_pd(coefs[d] + i);
      const __m256d v = _mm256_loadu_pd(x + static_cast<std::ptrdiff_t>(i) + offsets[d]);
      acc = _mm256_fmadd_pd(c, v, acc);
    }
    _mm256_storeu_pd(out + i, acc);
    total = _mm256_add_pd(total, acc);
  }
  double tail = 0.0;
  for (; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t d = 0; d < ndiag; ++d)
      acc = std::fma(coefs[d][i], x[static_cast<std::ptrdiff_t>(i) + offsets[d]], acc);
    out[i] = acc;
    tail += acc;
  }
  return hsum(total) + tail;
}

double dot(std::size_t n, const double* a, const double* b) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
  }
  double s = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void scale_inplace(std::size_t n, double* a, double s) {
  const __m256d f = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(a + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), f));
  for (; i < n; ++i) a[i] *= s;
}

double max_abs_axpby(std::size_t n, double alpha, const double* x, double beta, const double* y) {
  const __m256d va = _mm256_set1_pd(alpha);
  const __m256d vb = _mm256_set1_pd(beta);
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d m = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                      _mm256_mul_pd(vb, _mm256_loadu_pd(y + i)));
    m = _mm256_max_pd(m, _mm256_andnot_pd(sign, r));
  }
  double out = hmax(m);
  for (; i < n; ++i) out = std::fmax(out, std::fabs(alpha * x[i] + beta * y[i]));
  return out;
}

}  // namespace

const Table& avx2_table() {
  static const Table t{dia_apply, dot, scale_inplace, max_abs_axpby};
  return t;
}

}  // namespace sispersist::kernels::detail
