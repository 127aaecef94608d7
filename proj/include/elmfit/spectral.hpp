#pragma once

#include <cstdint>
#include <vector>

#include "elmfit/tensor.hpp"

namespace elmfit {

// Frequency-weighted spectral energy of a rectangular (optionally masked)
// patch: sum over centered DFT bins k of ||k||_1 * |F(k)|, with the unitary
// (1/sqrt(N)) DFT of the per-channel mean-removed, mask-zeroed content.
// Multichannel patches sum energies over channels. An axis of length n
// carries centered indices k in [-floor(n/2), ceil(n/2)-1].
//
// mask: empty, or one byte per sample of `patch` (nonzero = inside). The
// per-channel mean is taken over masked samples only; outside-mask samples
// contribute zero after mean removal.
double barron_energy(const SignalTensor& patch, const std::vector<std::uint8_t>& mask = {});

struct SpectralEnergy {
    double value = 0.0;
    std::int64_t region_id = -1;
};

}  // namespace elmfit
