#include "elmfit/features.hpp"

#include <cmath>

#include "elmfit/kernels.hpp"
#include "elmfit/rng.hpp"

namespace elmfit {

CoordMap CoordMap::from_box(const Box& b) {
    CoordMap m;
    m.rank = b.rank;
    for (int a = 0; a < b.rank; ++a) {
        const double lo = static_cast<double>(b.lo[a]);
        const double hi = static_cast<double>(b.hi[a]);
        if (hi > lo) {
            m.scale[a] = 2.0 / (hi - lo);
            m.offset[a] = -(hi + lo) / (hi - lo);
        } else {
            m.scale[a] = 0.0;
            m.offset[a] = 0.0;
        }
    }
    return m;
}

std::vector<double> normalize_coords(const Region& region,
                                     const std::vector<std::array<std::int64_t, 3>>& indices,
                                     int rank) {
    const CoordMap cm = CoordMap::from_box(region.bbox);
    std::vector<double> out(indices.size() * static_cast<std::size_t>(rank));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        double raw[3];
        for (int a = 0; a < rank; ++a) {
            if (indices[i][a] < region.bbox.lo[a] || indices[i][a] > region.bbox.hi[a])
                fail_usage("sample index outside region bounding box");
            raw[a] = static_cast<double>(indices[i][a]);
        }
        cm.apply(raw, out.data() + i * static_cast<std::size_t>(rank));
    }
    return out;
}

RffEncoder RffEncoder::make(int d, int features, double sigma, std::uint64_t global_seed) {
    if (d < 1 || features < 1) fail_usage("encoder needs d >= 1 and F >= 1");
    if (!(sigma > 0.0)) fail_usage("sigma_rff must be > 0");
    RffEncoder e;
    e.d = d;
    e.features = features;
    e.sigma = sigma;
    e.seed = stream_seed(global_seed, kEncoderStreamTag);
    e.B.resize(static_cast<std::size_t>(d) * features);
    SplitMix64 rng(e.seed);
    for (auto& v : e.B) v = sigma * rng.normal();
    return e;
}

void RffEncoder::encode(const double* x, double* out) const {
    constexpr double two_pi = 6.283185307179586476925286766559;
    for (int f = 0; f < features; ++f) {
        double t = 0.0;
        for (int a = 0; a < d; ++a) t += B[static_cast<std::size_t>(a) * features + f] * x[a];
        t *= two_pi;
        out[f] = std::cos(t);
        out[features + f] = std::sin(t);
    }
}

HiddenLayer HiddenLayer::make(std::uint64_t global_seed, std::int64_t region_id, int m,
                              int in_dim) {
    if (m < 1) fail_usage("m must be >= 1");
    if (in_dim < 1) fail_usage("hidden layer input dimension must be >= 1");
    HiddenLayer l;
    l.region_id = region_id;
    l.in_dim = in_dim;
    l.m = m;
    l.seed = stream_seed(global_seed, static_cast<std::uint64_t>(region_id));
    l.W.resize(static_cast<std::size_t>(m) * in_dim);
    l.b.resize(static_cast<std::size_t>(m));
    SplitMix64 rng(l.seed);
    for (auto& v : l.W) v = rng.normal();  // row-major, neuron-major order
    for (auto& v : l.b) v = rng.uniform_pm1();
    l.Wt.resize(l.W.size());
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < in_dim; ++k)
            l.Wt[static_cast<std::size_t>(k) * m + j] = l.W[static_cast<std::size_t>(j) * in_dim + k];
    return l;
}

void hidden_activations(const HiddenLayer& layer, const RffEncoder* enc, const double* coords,
                        std::size_t S, int d, double* H, std::size_t ld) {
    const int in_dim = enc ? enc->out_dim() : d;
    if (in_dim != layer.in_dim) fail_usage("hidden layer input dimension mismatch");
    std::vector<double> feat(static_cast<std::size_t>(in_dim));
    const std::size_t m = static_cast<std::size_t>(layer.m);
    for (std::size_t s = 0; s < S; ++s) {
        const double* x = coords + s * static_cast<std::size_t>(d);
        const double* f = x;
        if (enc) {
            enc->encode(x, feat.data());
            f = feat.data();
        }
        double* row = H + s * ld;
        for (std::size_t j = 0; j < m; ++j) row[j] = layer.b[j];
        for (int k = 0; k < in_dim; ++k)
            kern::axpy(f[k], layer.Wt.data() + static_cast<std::size_t>(k) * m, row, m);
        kern::relu(row, m);
    }
}

}  // namespace elmfit
