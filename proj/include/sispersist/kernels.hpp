#pragma once

// Vector kernels behind the exact solver's power iteration. Each routine has a
// scalar reference and, where the target allows, AVX2/FMA and NEON variants;
// the variant is picked once at runtime and can be forced through the
// SISPERSIST_ISA environment variable (scalar | avx2 | neon).

#include <cstddef>
#include <string_view>

namespace sispersist::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view to_string(Isa isa);

/// True if the variant was compiled in and the CPU supports it.
bool available(Isa isa);

/// Best available variant, honouring SISPERSIST_ISA when it names an
/// available one. Resolved once and cached.
Isa active();

/// Diagonal-storage product: out[i] = sum_d coefs[d][i] * x[i + offsets[d]]
/// for i in [0, n). x must be readable at every i + offsets[d]; callers pad
/// it. Returns sum_i out[i].
double dia_apply(Isa isa, std::size_t n, std::size_t ndiag, const std::ptrdiff_t* offsets,
                 const double* const* coefs, const double* x, double* out);

double dot(Isa isa, std::size_t n, const double* a, const double* b);

/// a[i] *= s
void scale_inplace(Isa isa, std::size_t n, double* a, double s);

/// max_i |alpha * x[i] + beta * y[i]|
double max_abs_axpby(Isa isa, std::size_t n, double alpha, const double* x, double beta,
                     const double* y);

}  // namespace sispersist::kernels
