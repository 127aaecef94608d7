#include "elmfit/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

#include "elmfit/kernels.hpp"

namespace elmfit {
namespace {

// FFTW plan creation/destruction is not thread safe; execution is.
std::mutex g_fftw_mutex;

struct FftwBuffer {
    fftw_complex* data = nullptr;
    explicit FftwBuffer(std::size_t n) { data = fftw_alloc_complex(n); }
    ~FftwBuffer() { fftw_free(data); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
};

}  // namespace

double barron_energy(const SignalTensor& patch, const std::vector<std::uint8_t>& mask) {
    const std::int64_t n = patch.samples();
    if (n <= 0 || patch.shape.empty()) fail_usage("barron_energy: empty patch");
    if (!mask.empty() && static_cast<std::int64_t>(mask.size()) != n)
        fail_usage("barron_energy: mask shape does not match patch");

    const int rank = patch.rank();
    std::vector<int> dims(rank);
    for (int a = 0; a < rank; ++a) dims[a] = static_cast<int>(patch.shape[a]);

    // ||k||_1 per bin, centered indices, row-major over dims
    std::vector<double> weight(static_cast<std::size_t>(n));
    {
        std::vector<std::int64_t> idx(rank, 0);
        for (std::int64_t i = 0; i < n; ++i) {
            double w = 0.0;
            for (int a = 0; a < rank; ++a) {
                const std::int64_t na = patch.shape[a];
                const std::int64_t j = idx[a];
                const std::int64_t k = (j <= (na - 1) / 2) ? j : j - na;
                w += static_cast<double>(k < 0 ? -k : k);
            }
            weight[static_cast<std::size_t>(i)] = w;
            for (int a = rank - 1; a >= 0; --a) {
                if (++idx[a] < patch.shape[a]) break;
                idx[a] = 0;
            }
        }
    }

    FftwBuffer buf(static_cast<std::size_t>(n));
    std::vector<double> re(static_cast<std::size_t>(n)), im(static_cast<std::size_t>(n));

    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lk(g_fftw_mutex);
        plan = fftw_plan_dft(rank, dims.data(), buf.data, buf.data, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    if (!plan) fail_numeric("barron_energy: FFT plan failure");

    const double unitary = 1.0 / std::sqrt(static_cast<double>(n));
    double total = 0.0;
    for (std::int64_t c = 0; c < patch.channels; ++c) {
        double mean = 0.0;
        std::int64_t inside = 0;
        for (std::int64_t i = 0; i < n; ++i) {
            if (mask.empty() || mask[static_cast<std::size_t>(i)]) {
                mean += patch.values[static_cast<std::size_t>(i * patch.channels + c)];
                ++inside;
            }
        }
        if (inside == 0) fail_usage("barron_energy: mask excludes every sample");
        mean /= static_cast<double>(inside);

        for (std::int64_t i = 0; i < n; ++i) {
            const bool in = mask.empty() || mask[static_cast<std::size_t>(i)];
            const double v =
                in ? patch.values[static_cast<std::size_t>(i * patch.channels + c)] - mean : 0.0;
            buf.data[i][0] = v;
            buf.data[i][1] = 0.0;
        }
        fftw_execute(plan);
        for (std::int64_t i = 0; i < n; ++i) {
            re[static_cast<std::size_t>(i)] = buf.data[i][0];
            im[static_cast<std::size_t>(i)] = buf.data[i][1];
        }
        total += unitary * kern::weighted_mag_sum(re.data(), im.data(), weight.data(),
                                                  static_cast<std::size_t>(n));
    }

    {
        std::lock_guard<std::mutex> lk(g_fftw_mutex);
        fftw_destroy_plan(plan);
    }
    return total;
}

}  // namespace elmfit
