#pragma once

#include <cstddef>

namespace sispersist::kernels::detail {

struct Table {
  double (*dia_apply)(std::size_t, std::size_t, const std::ptrdiff_t*, const double* const*,
                      const double*, double*);
  double (*dot)(std::size_t, const double*, const double*);
  void (*scale_inplace)(std::size_t, double*, double);
  double (*max_abs_axpby)(std::size_t, double, const double*, double, const double*);
};

const Table& scalar_table();
#if defined(SISPERSIST_HAVE_AVX2)
const Table& avx2_table();
#endif
#if defined(SISPERSIST_HAVE_NEON)
const Table& neon_table();
#endif

}  // namespace sispersist::kernels::detail
