#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "elmfit/common.hpp"

namespace elmfit {

// Dense multichannel gridded signal. `shape` lists the sample counts per
// axis (spatial axes first, optional trailing time axis); values are stored
// row-major over `shape` with the channel as the innermost (minor) index.
struct SignalTensor {
    std::vector<std::int64_t> shape;
    std::int64_t channels = 1;
    std::vector<double> values;
    double value_min = 0.0;  // recorded range of the raw source
    double value_max = 0.0;

    SignalTensor() = default;
    SignalTensor(std::vector<std::int64_t> shape_, std::int64_t channels_)
        : shape(std::move(shape_)), channels(channels_) {
        values.assign(static_cast<std::size_t>(samples() * channels), 0.0);
    }

    int rank() const { return static_cast<int>(shape.size()); }

    std::int64_t samples() const {
        std::int64_t n = 1;
        for (auto s : shape) n *= s;
        return n;
    }
    std::int64_t size() const { return samples() * channels; }

    // Row-major sample offset (without channel).
    std::int64_t sample_offset(const std::array<std::int64_t, 3>& idx) const {
        std::int64_t off = 0;
        for (int a = 0; a < rank(); ++a) off = off * shape[a] + idx[a];
        return off;
    }
    double at(const std::array<std::int64_t, 3>& idx, std::int64_t c) const {
        return values[static_cast<std::size_t>(sample_offset(idx) * channels + c)];
    }
    double& at(const std::array<std::int64_t, 3>& idx, std::int64_t c) {
        return values[static_cast<std::size_t>(sample_offset(idx) * channels + c)];
    }

    bool all_finite() const;
    void record_range();  // sets value_min/value_max from values
};

// ETNS container: "ETNS" magic, version u8=1, dtype u8 (0 = float32),
// rank u8, rank x u64 little-endian dims, then the row-major float32
// little-endian payload. Round-trips bit-exactly at float32 precision.
SignalTensor load_tensor(const std::string& path);
void save_tensor(const SignalTensor& t, const std::string& path);

// PNG path for 1- or 3-channel images; 8- or 16-bit gray/RGB only.
// Values are scaled to [0,1] on load and quantized floor(v*255 + 0.5)
// (after clamping to [0,1]) on save.
SignalTensor load_image(const std::string& path);
void save_image(const SignalTensor& t, const std::string& path);

}  // namespace elmfit
