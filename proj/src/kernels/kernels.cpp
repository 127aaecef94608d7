#include "elmfit/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <vector>

#include "kernel_table.hpp"

namespace elmfit::kern {
namespace {

struct Active {
    const KernelTable* table;
    Backend backend;
};

Active detect() {
#if defined(__x86_64__) || defined(_M_X64)
    if (const char* env = std::getenv("ELMFIT_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return {&kt_scalar, Backend::scalar};
        if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return {&kt_avx2, Backend::avx2};
    }
    if (avx2_supported()) return {&kt_avx2, Backend::avx2};
    return {&kt_scalar, Backend::scalar};
#elif defined(__aarch64__)
    if (const char* env = std::getenv("ELMFIT_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return {&kt_scalar, Backend::scalar};
    }
    return {&kt_neon, Backend::neon};
#else
    return {&kt_scalar, Backend::scalar};
#endif
}

std::atomic<const KernelTable*> g_table{nullptr};
std::atomic<Backend> g_backend{Backend::scalar};

const KernelTable* table() {
    const KernelTable* t = g_table.load(std::memory_order_acquire);
    if (!t) {
        Active a = detect();
        g_backend.store(a.backend, std::memory_order_relaxed);
        g_table.store(a.table, std::memory_order_release);
        t = a.table;
    }
    return t;
}

}  // namespace

Backend active_backend() {
    table();
    return g_backend.load(std::memory_order_relaxed);
}

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    return "?";
}

bool backend_available(Backend b) {
    if (b == Backend::scalar) return true;
#if defined(__x86_64__) || defined(_M_X64)
    if (b == Backend::avx2) return avx2_supported();
#endif
#if defined(__aarch64__)
    if (b == Backend::neon) return true;
#endif
    return false;
}

bool set_backend(Backend b) {
    if (!backend_available(b)) return false;
    const KernelTable* t = &kt_scalar;
#if defined(__x86_64__) || defined(_M_X64)
    if (b == Backend::avx2) t = &kt_avx2;
#endif
#if defined(__aarch64__)
    if (b == Backend::neon) t = &kt_neon;
#endif
    g_backend.store(b, std::memory_order_relaxed);
    g_table.store(t, std::memory_order_release);
    return true;
}

double dot(const double* a, const double* b, std::size_t n) { return table()->dot(a, b, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { table()->axpy(a, x, y, n); }
double sum(const double* x, std::size_t n) { return table()->sum(x, n); }
double sumsq(const double* x, std::size_t n) { return table()->sumsq(x, n); }
void relu(double* x, std::size_t n) { table()->relu(x, n); }

double weighted_mag_sum(const double* re, const double* im, const double* w, std::size_t n) {
    return table()->weighted_mag_sum(re, im, w, n);
}

void syrk_lower_accum(double* C, std::size_t ldc, const double* B, std::size_t ldb, std::size_t n,
                      std::size_t k, double scale) {
    table()->syrk_lower_accum(C, ldc, B, ldb, n, k, scale);
}

// A^T A via transposed strip packing: each strip of rows is copied into a
// column-contiguous panel so the syrk microkernel reads unit-stride streams.
void gram(const double* A, std::size_t S, std::size_t m, double* G) {
    const std::size_t strip = 256;
    for (std::size_t i = 0; i < m * m; ++i) G[i] = 0.0;
    std::vector<double> panel(m * std::min(strip, S));
    for (std::size_t s0 = 0; s0 < S; s0 += strip) {
        const std::size_t len = std::min(strip, S - s0);
        // panel[j*len + t] = A[(s0+t)*m + j]
        for (std::size_t t = 0; t < len; ++t) {
            const double* row = A + (s0 + t) * m;
            for (std::size_t j = 0; j < m; ++j) panel[j * len + t] = row[j];
        }
        syrk_lower_accum(G, m, panel.data(), len, m, len, 1.0);
    }
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) G[i * m + j] = G[j * m + i];
}

void at_b(const double* A, const double* Y, std::size_t S, std::size_t m, std::size_t C,
          double* B) {
    for (std::size_t i = 0; i < m * C; ++i) B[i] = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
        const double* row = A + s * m;
        const double* y = Y + s * C;
        for (std::size_t c = 0; c < C; ++c) axpy(y[c], row, B + c * m, m);
    }
}

void a_x(const double* A, const double* X, std::size_t S, std::size_t m, std::size_t C,
         double* out) {
    for (std::size_t s = 0; s < S; ++s) {
        const double* row = A + s * m;
        for (std::size_t c = 0; c < C; ++c) out[s * C + c] = dot(row, X + c * m, m);
    }
}

}  // namespace elmfit::kern
