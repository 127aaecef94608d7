// NEON kernel variants for aarch64, where 128-bit SIMD is baseline.
// Structure mirrors the scalar reference; lanes are float64x2.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>
#include <cstddef>

#include "kernel_table.hpp"

namespace elmfit::kern {
namespace {

inline double hsum(float64x2_t v) { return vgetq_lane_f64(v, 0) + vgetq_lane_f64(v, 1); }

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    double r = hsum(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) r += a[i] * b[i];
    return r;
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

double sum_neon(const double* x, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
    double r = hsum(acc);
    for (; i < n; ++i) r += x[i];
    return r;
}

double sumsq_neon(const double* x, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t v = vld1q_f64(x + i);
        acc = vfmaq_f64(acc, v, v);
    }
    double r = hsum(acc);
    for (; i < n; ++i) r += x[i] * x[i];
    return r;
}

void relu_neon(double* x, std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmaxq_f64(vld1q_f64(x + i), zero));
    for (; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

double wmag_neon(const double* re, const double* im, const double* w, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t r = vld1q_f64(re + i);
        float64x2_t m = vld1q_f64(im + i);
        float64x2_t mag = vsqrtq_f64(vfmaq_f64(vmulq_f64(m, m), r, r));
        acc = vfmaq_f64(acc, vld1q_f64(w + i), mag);
    }
    double out = hsum(acc);
    for (; i < n; ++i) out += w[i] * std::sqrt(re[i] * re[i] + im[i] * im[i]);
    return out;
}

void syrk_neon(double* C, std::size_t ldc, const double* B, std::size_t ldb, std::size_t n,
               std::size_t k, double scale) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* bi = B + i * ldb;
        std::size_t j = 0;
        for (; j + 2 <= i + 1; j += 2) {
            const double* bj0 = B + j * ldb;
            const double* bj1 = bj0 + ldb;
            float64x2_t a0 = vdupq_n_f64(0.0);
            float64x2_t a1 = vdupq_n_f64(0.0);
            std::size_t t = 0;
            for (; t + 2 <= k; t += 2) {
                float64x2_t r = vld1q_f64(bi + t);
                a0 = vfmaq_f64(a0, r, vld1q_f64(bj0 + t));
                a1 = vfmaq_f64(a1, r, vld1q_f64(bj1 + t));
            }
            double e0 = hsum(a0), e1 = hsum(a1);
            for (; t < k; ++t) {
                e0 += bi[t] * bj0[t];
                e1 += bi[t] * bj1[t];
            }
            C[i * ldc + j] += scale * e0;
            C[i * ldc + j + 1] += scale * e1;
        }
        for (; j <= i; ++j) C[i * ldc + j] += scale * dot_neon(bi, B + j * ldb, k);
    }
}

}  // namespace

const KernelTable kt_neon = {
    dot_neon, axpy_neon, sum_neon, sumsq_neon,
    relu_neon, wmag_neon, syrk_neon,
};

}  // namespace elmfit::kern

#endif  // aarch64
