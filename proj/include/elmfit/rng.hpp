#pragma once

#include <cmath>
#include <cstdint>

namespace elmfit {

// The project's single PRNG: SplitMix64 with Box-Muller normals. The
// algorithm is part of the reproducibility contract (config key
// rng_algorithm = "splitmix64"), so draws are specified exactly:
//   - uniform [0,1):  next() >> 11, scaled by 2^-53
//   - uniform [-1,1): 2u - 1
//   - normal: Box-Muller pairs from two uniforms, cos branch first
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform_pm1() { return 2.0 * uniform01() - 1.0; }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Finalizer-only mix, used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Stream seeds: one per (global seed, purpose tag). Region hidden layers use
// tag = region id; the shared feature encoder uses a fixed tag.
inline std::uint64_t stream_seed(std::uint64_t global_seed, std::uint64_t tag) {
    return mix64(mix64(global_seed) ^ mix64(tag + 0x9E3779B97F4A7C15ULL));
}

constexpr std::uint64_t kEncoderStreamTag = 0x524646ULL << 32;  // distinct from region ids

}  // namespace elmfit
