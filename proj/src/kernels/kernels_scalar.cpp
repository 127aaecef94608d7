// Reference kernels. Plain sequential loops; reductions accumulate in
// index order so results are the baseline other variants are tested against.

#include <cmath>
#include <cstddef>

#include "kernel_table.hpp"

namespace elmfit::kern {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sum_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double sumsq_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

void relu_scalar(double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

double wmag_scalar(const double* re, const double* im, const double* w, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += w[i] * std::sqrt(re[i] * re[i] + im[i] * im[i]);
    return acc;
}

void syrk_scalar(double* C, std::size_t ldc, const double* B, std::size_t ldb, std::size_t n,
                 std::size_t k, double scale) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* bi = B + i * ldb;
        std::size_t j = 0;
        for (; j + 1 <= i; j += 2) {
            const double* bj0 = B + j * ldb;
            const double* bj1 = bj0 + ldb;
            double acc0 = 0.0, acc1 = 0.0;
            for (std::size_t t = 0; t < k; ++t) {
                acc0 += bi[t] * bj0[t];
                acc1 += bi[t] * bj1[t];
            }
            C[i * ldc + j] += scale * acc0;
            C[i * ldc + j + 1] += scale * acc1;
        }
        if (j <= i) C[i * ldc + j] += scale * dot_scalar(bi, B + j * ldb, k);
    }
}

}  // namespace

const KernelTable kt_scalar = {
    dot_scalar, axpy_scalar, sum_scalar, sumsq_scalar,
    relu_scalar, wmag_scalar, syrk_scalar,
};

}  // namespace elmfit::kern
