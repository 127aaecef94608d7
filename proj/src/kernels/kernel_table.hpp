#pragma once

#include <cstddef>

namespace elmfit::kern {

// Per-backend primitive table. Blocked drivers (gram, at_b, a_x) are shared
// and sit on top of these.
struct KernelTable {
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    double (*sumsq)(const double*, std::size_t);
    void (*relu)(double*, std::size_t);
    double (*weighted_mag_sum)(const double*, const double*, const double*, std::size_t);
    void (*syrk_lower_accum)(double*, std::size_t, const double*, std::size_t, std::size_t,
                             std::size_t, double);
};

extern const KernelTable kt_scalar;

#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable kt_avx2;
bool avx2_supported();
#endif

#if defined(__aarch64__)
extern const KernelTable kt_neon;
#endif

}  // namespace elmfit::kern
