#include <cstdlib>
#include <string>

#include "sispersist/kernels.hpp"
#include "table.hpp"

namespace sispersist::kernels {

namespace {

const detail::Table& table(Isa isa) {
  switch (isa) {
#if defined(SISPERSIST_HAVE_AVX2)
    case Isa::avx2: return detail::avx2_table();
#endif
#if defined(SISPERSIST_HAVE_NEON)
    case Isa::neon: return detail::neon_table();
#endif
    default: return detail::scalar_table();
  }
}

Isa resolve() {
  if (const char* env = std::getenv("SISPERSIST_ISA")) {
    const std::string want(env);
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon})
      if (want == to_string(isa) && available(isa)) return isa;
  }
  if (available(Isa::avx2)) return Isa::avx2;
  if (available(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "scalar";
}

bool available(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(SISPERSIST_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::neon:
#if defined(SISPERSIST_HAVE_NEON)
      return true;  // mandatory on aarch64
#else
      return false;
#endif
  }
  return false;
}

Isa active() {
  static const Isa isa = resolve();
  return isa;
}

double dia_apply(Isa isa, std::size_t n, std::size_t ndiag, const std::ptrdiff_t* offsets,
                 const double* const* coefs, const double* x, double* out) {
  return table(isa).dia_apply(n, ndiag, offsets, coefs, x, out);
}

double dot(Isa isa, std::size_t n, const double* a, const double* b) {
  return table(isa).dot(n, a, b);
}

void scale_inplace(Isa isa, std::size_t n, double* a, double s) {
  table(isa).scale_inplace(n, a, s);
}

double max_abs_axpby(Isa isa, std::size_t n, double alpha, const double* x, double beta,
                     const double* y) {
  return table(isa).max_abs_axpby(n, alpha, x, beta, y);
}

}  // namespace sispersist::kernels
