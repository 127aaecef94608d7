#pragma once

#include <cstdint>
#include <vector>

#include "elmfit/common.hpp"
#include "elmfit/partition.hpp"

namespace elmfit {

// Per-axis affine map taking a region's bounding box onto [-1,1]. Single
// sample axes map to 0. Extends continuously beyond the box.
struct CoordMap {
    int rank = 0;
    std::array<double, 3> scale{{0.0, 0.0, 0.0}};
    std::array<double, 3> offset{{0.0, 0.0, 0.0}};

    static CoordMap from_box(const Box& b);
    void apply(const double* in, double* out) const {
        for (int a = 0; a < rank; ++a) out[a] = scale[a] * in[a] + offset[a];
    }
};

// Normalized coordinates (S x d row-major) for integer sample indices inside
// the region's bounding box; corners map exactly to +/-1.
std::vector<double> normalize_coords(const Region& region,
                                     const std::vector<std::array<std::int64_t, 3>>& indices,
                                     int rank);

// gamma(x) = [cos(2 pi B^T x), sin(2 pi B^T x)], B ~ N(0, sigma^2) d x F,
// drawn once from the global seed and shared by all regions.
struct RffEncoder {
    int d = 0;
    int features = 0;  // F; output dimension is 2F
    double sigma = 1.0;
    std::uint64_t seed = 0;
    std::vector<double> B;  // d x F row-major

    static RffEncoder make(int d, int features, double sigma, std::uint64_t global_seed);
    void encode(const double* x, double* out) const;
    int out_dim() const { return 2 * features; }
};

// Frozen random hidden layer: W ~ N(0,1) (m x in_dim), b ~ U(-1,1), ReLU.
// The seed is derived from (global seed, region id) so regions are
// independent but the whole fit reproduces from one seed.
struct HiddenLayer {
    std::int64_t region_id = -1;
    int in_dim = 0;
    int m = 0;
    std::uint64_t seed = 0;
    std::vector<double> W;   // m x in_dim row-major
    std::vector<double> Wt;  // in_dim x m (layout for the activation kernel)
    std::vector<double> b;   // m

    static HiddenLayer make(std::uint64_t global_seed, std::int64_t region_id, int m, int in_dim);
};

// H[k][j] = ReLU(w_j . gamma(x_k) + b_j); gamma is the encoder or the
// identity when enc is null. coords: S x d row-major normalized coordinates.
// H must hold S*m doubles (row-major, row stride ld >= m).
void hidden_activations(const HiddenLayer& layer, const RffEncoder* enc, const double* coords,
                        std::size_t S, int d, double* H, std::size_t ld);

}  // namespace elmfit
