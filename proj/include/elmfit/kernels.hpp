#pragma once

#include <cstddef>

namespace elmfit::kern {

// Arithmetic inner loops used by the solver, feature builder, spectral
// estimator and blender. Every kernel has a scalar reference implementation
// and (on x86-64) an AVX2+FMA variant, selected once at startup from CPU
// capabilities. aarch64 builds use NEON as the baseline variant.
//
// The variant can be forced for testing via set_backend() or the
// ELMFIT_KERNELS environment variable ("scalar", "avx2", "neon").
// Selection never changes results across thread counts; scalar and SIMD
// variants agree to reduction-order rounding (equivalence-tested).

enum class Backend { scalar, avx2, neon };

Backend active_backend();
const char* backend_name(Backend b);
bool backend_available(Backend b);
// Returns false (and leaves the active backend unchanged) if unsupported.
bool set_backend(Backend b);

double dot(const double* a, const double* b, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);  // y += a*x
double sum(const double* x, std::size_t n);
double sumsq(const double* x, std::size_t n);
void relu(double* x, std::size_t n);

// sum_i w[i] * sqrt(re[i]^2 + im[i]^2)
double weighted_mag_sum(const double* re, const double* im, const double* w, std::size_t n);

// C[i*ldc + j] += scale * dot(B + i*ldb, B + j*ldb, k) for 0 <= j <= i < n.
// Lower triangle including the diagonal; upper triangle untouched.
void syrk_lower_accum(double* C, std::size_t ldc, const double* B, std::size_t ldb,
                      std::size_t n, std::size_t k, double scale);

// G = A^T A for row-major A (S x m). Full symmetric matrix written.
void gram(const double* A, std::size_t S, std::size_t m, double* G);

// B (m x C, column-major: channel blocks of length m) = A^T Y,
// A row-major S x m, Y row-major S x C.
void at_b(const double* A, const double* Y, std::size_t S, std::size_t m, std::size_t C,
          double* B);

// out (S x C row-major) = A X, A row-major S x m, X column-major m x C.
void a_x(const double* A, const double* X, std::size_t S, std::size_t m, std::size_t C,
         double* out);

}  // namespace elmfit::kern
