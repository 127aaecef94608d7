// AVX2 + FMA kernel variants. This translation unit is the only one built
// with -mavx2 -mfma; it is entered only after a runtime cpuid check.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstddef>

#include "kernel_table.hpp"

namespace elmfit::kern {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    __m256d acc2 = _mm256_setzero_pd();
    __m256d acc3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
        acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
        acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double r = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
    for (; i < n; ++i) r += a[i] * b[i];
    return r;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
        _mm256_storeu_pd(y + i + 4,
                         _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
    }
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

double sum_avx2(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double r = hsum(acc);
    for (; i < n; ++i) r += x[i];
    return r;
}

double sumsq_avx2(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        acc = _mm256_fmadd_pd(v, v, acc);
    }
    double r = hsum(acc);
    for (; i < n; ++i) r += x[i] * x[i];
    return r;
}

void relu_avx2(double* x, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    for (; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

double wmag_avx2(const double* re, const double* im, const double* w, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d r = _mm256_loadu_pd(re + i);
        __m256d m = _mm256_loadu_pd(im + i);
        __m256d mag = _mm256_sqrt_pd(_mm256_fmadd_pd(r, r, _mm256_mul_pd(m, m)));
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + i), mag, acc);
    }
    double out = hsum(acc);
    for (; i < n; ++i) out += w[i] * std::sqrt(re[i] * re[i] + im[i] * im[i]);
    return out;
}

// 2x4 register-tiled row-dot products: C[i..i+1][j..j+3] += scale * Bi.Bj.
// Entries above the diagonal that fall inside a tile get their (correct)
// symmetric value; callers treat the upper triangle as undefined.
void syrk_avx2(double* C, std::size_t ldc, const double* B, std::size_t ldb, std::size_t n,
               std::size_t k, double scale) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const double* bi0 = B + i * ldb;
        const double* bi1 = bi0 + ldb;
        std::size_t j = 0;
        for (; j + 4 <= i + 2; j += 4) {
            const double* bj0 = B + j * ldb;
            const double* bj1 = bj0 + ldb;
            const double* bj2 = bj1 + ldb;
            const double* bj3 = bj2 + ldb;
            __m256d a00 = _mm256_setzero_pd(), a01 = _mm256_setzero_pd();
            __m256d a02 = _mm256_setzero_pd(), a03 = _mm256_setzero_pd();
            __m256d a10 = _mm256_setzero_pd(), a11 = _mm256_setzero_pd();
            __m256d a12 = _mm256_setzero_pd(), a13 = _mm256_setzero_pd();
            std::size_t t = 0;
            for (; t + 4 <= k; t += 4) {
                __m256d r0 = _mm256_loadu_pd(bi0 + t);
                __m256d r1 = _mm256_loadu_pd(bi1 + t);
                __m256d c0 = _mm256_loadu_pd(bj0 + t);
                __m256d c1 = _mm256_loadu_pd(bj1 + t);
                __m256d c2 = _mm256_loadu_pd(bj2 + t);
                __m256d c3 = _mm256_loadu_pd(bj3 + t);
                a00 = _mm256_fmadd_pd(r0, c0, a00);
                a01 = _mm256_fmadd_pd(r0, c1, a01);
                a02 = _mm256_fmadd_pd(r0, c2, a02);
                a03 = _mm256_fmadd_pd(r0, c3, a03);
                a10 = _mm256_fmadd_pd(r1, c0, a10);
                a11 = _mm256_fmadd_pd(r1, c1, a11);
                a12 = _mm256_fmadd_pd(r1, c2, a12);
                a13 = _mm256_fmadd_pd(r1, c3, a13);
            }
            double e00 = hsum(a00), e01 = hsum(a01), e02 = hsum(a02), e03 = hsum(a03);
            double e10 = hsum(a10), e11 = hsum(a11), e12 = hsum(a12), e13 = hsum(a13);
            for (; t < k; ++t) {
                double r0 = bi0[t], r1 = bi1[t];
                e00 += r0 * bj0[t];
                e01 += r0 * bj1[t];
                e02 += r0 * bj2[t];
                e03 += r0 * bj3[t];
                e10 += r1 * bj0[t];
                e11 += r1 * bj1[t];
                e12 += r1 * bj2[t];
                e13 += r1 * bj3[t];
            }
            double* c0p = C + i * ldc + j;
            double* c1p = c0p + ldc;
            c0p[0] += scale * e00;
            c0p[1] += scale * e01;
            c0p[2] += scale * e02;
            c0p[3] += scale * e03;
            c1p[0] += scale * e10;
            c1p[1] += scale * e11;
            c1p[2] += scale * e12;
            c1p[3] += scale * e13;
        }
        // columns >= j are uncovered for both rows of the pair
        for (std::size_t jj = j; jj <= i; ++jj)
            C[i * ldc + jj] += scale * dot_avx2(bi0, B + jj * ldb, k);
        for (std::size_t jj = j; jj <= i + 1; ++jj)
            C[(i + 1) * ldc + jj] += scale * dot_avx2(bi1, B + jj * ldb, k);
    }
    for (; i < n; ++i) {
        const double* bi = B + i * ldb;
        for (std::size_t j = 0; j <= i; ++j)
            C[i * ldc + j] += scale * dot_avx2(bi, B + j * ldb, k);
    }
}

}  // namespace

const KernelTable kt_avx2 = {
    dot_avx2, axpy_avx2, sum_avx2, sumsq_avx2,
    relu_avx2, wmag_avx2, syrk_avx2,
};

bool avx2_supported() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

}  // namespace elmfit::kern

#endif  // x86-64
