#include "elmfit/pou.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "elmfit/parallel.hpp"

namespace elmfit {
namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

// Raised-cosine ramp over signed depth delta (in samples): 0 at delta <= -o,
// 1 at delta >= o. o = 0 degenerates to the half-open indicator.
inline double taper(double delta, std::int64_t o) {
    if (o == 0) return delta >= 0.0 ? 1.0 : 0.0;
    const double u = (delta + static_cast<double>(o)) / (2.0 * static_cast<double>(o));
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return 0.5 * (1.0 - std::cos(kPi * u));
}

// Per-axis signed depth of x into [lo-0.5, hi+0.5].
inline double axis_depth(double x, std::int64_t lo, std::int64_t hi) {
    return std::min(x - (static_cast<double>(lo) - 0.5), (static_cast<double>(hi) + 0.5) - x);
}

struct DepthPlane {
    // Signed Chebyshev depth sampled over `box` (which may extend past the
    // domain): positive inside the region, negative outside, zero never hit
    // (values are half-integers).
    Box box;
    std::vector<double> values;
};

// Exact grid Chebyshev distances via multi-source BFS with king moves,
// capped at `cap` (farther samples keep `cap`).
void chebyshev_bfs(const Box& box, std::vector<std::int32_t>& dist, std::int32_t cap, int rank) {
    std::deque<std::int64_t> frontier;
    const std::int64_t n = box.volume();
    for (std::int64_t i = 0; i < n; ++i)
        if (dist[static_cast<std::size_t>(i)] == 0) frontier.push_back(i);
    std::vector<std::int64_t> strides(static_cast<std::size_t>(rank), 1);
    for (int a = rank - 2; a >= 0; --a) strides[a] = strides[a + 1] * box.extent(a + 1);

    while (!frontier.empty()) {
        const std::int64_t cur = frontier.front();
        frontier.pop_front();
        const std::int32_t dcur = dist[static_cast<std::size_t>(cur)];
        if (dcur >= cap) continue;
        // enumerate the full king-move neighborhood
        std::array<std::int64_t, 3> cc{{0, 0, 0}};
        std::int64_t rem = cur;
        for (int a = 0; a < rank; ++a) {
            cc[a] = rem / strides[a];
            rem %= strides[a];
        }
        std::array<std::int64_t, 3> off{{-1, -1, -1}};
        for (;;) {
            bool zero = true;
            for (int a = 0; a < rank; ++a) zero = zero && off[a] == 0;
            if (!zero) {
                bool ok = true;
                std::int64_t ni = 0;
                for (int a = 0; a < rank; ++a) {
                    const std::int64_t v = cc[a] + off[a];
                    if (v < 0 || v >= box.extent(a)) {
                        ok = false;
                        break;
                    }
                    ni += v * strides[a];
                }
                if (ok && dist[static_cast<std::size_t>(ni)] > dcur + 1) {
                    dist[static_cast<std::size_t>(ni)] = dcur + 1;
                    frontier.push_back(ni);
                }
            }
            int a = rank - 1;
            for (; a >= 0; --a) {
                if (++off[a] <= 1) break;
                off[a] = -1;
            }
            if (a < 0) break;
        }
    }
}

DepthPlane region_depth_plane(const Partition& p, const Region& r, const Box& support,
                              std::int64_t o, int rank) {
    DepthPlane dp;
    dp.box = support;
    for (int a = 0; a < rank; ++a) {
        dp.box.lo[a] -= 1;  // ring of complement for exact outside distances
        dp.box.hi[a] += 1;
    }
    const std::int64_t n = dp.box.volume();
    const std::int32_t cap = static_cast<std::int32_t>(o) + 2;

    // membership over the plane box
    std::vector<std::uint8_t> inside(static_cast<std::size_t>(n), 0);
    const auto& g = p.grid;
    for (auto c : r.cells) {
        const Box cb = g.cell_box(c);
        std::array<std::int64_t, 3> idx{};
        for (int a = 0; a < rank; ++a) idx[a] = cb.lo[a];
        for (;;) {
            std::int64_t off = 0;
            for (int a = 0; a < rank; ++a) off = off * dp.box.extent(a) + (idx[a] - dp.box.lo[a]);
            inside[static_cast<std::size_t>(off)] = 1;
            int a = rank - 1;
            for (; a >= 0; --a) {
                if (++idx[a] <= cb.hi[a]) break;
                idx[a] = cb.lo[a];
            }
            if (a < 0) break;
        }
    }

    std::vector<std::int32_t> d_out(static_cast<std::size_t>(n), cap);
    std::vector<std::int32_t> d_in(static_cast<std::size_t>(n), cap);
    for (std::int64_t i = 0; i < n; ++i) {
        if (inside[static_cast<std::size_t>(i)])
            d_out[static_cast<std::size_t>(i)] = 0;
        else
            d_in[static_cast<std::size_t>(i)] = 0;
    }
    chebyshev_bfs(dp.box, d_out, cap, rank);
    chebyshev_bfs(dp.box, d_in, cap, rank);

    dp.values.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        dp.values[ii] = inside[ii] ? static_cast<double>(d_in[ii]) - 0.5
                                   : 0.5 - static_cast<double>(d_out[ii]);
    }
    return dp;
}

double interp_depth(const double* values, const Box& box, const double* x, int rank) {
    // multilinear interpolation, coordinates clamped into the plane box
    std::array<std::int64_t, 3> base{{0, 0, 0}};
    std::array<double, 3> frac{{0.0, 0.0, 0.0}};
    for (int a = 0; a < rank; ++a) {
        double xa = std::min(std::max(x[a], static_cast<double>(box.lo[a])),
                             static_cast<double>(box.hi[a]));
        double fl = std::floor(xa);
        std::int64_t b = static_cast<std::int64_t>(fl);
        if (b >= box.hi[a]) b = box.hi[a] - 1;
        base[a] = b - box.lo[a];
        frac[a] = xa - static_cast<double>(b);
    }
    double acc = 0.0;
    const int corners = 1 << rank;
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        std::int64_t off = 0;
        for (int a = 0; a < rank; ++a) {
            const int bit = (c >> (rank - 1 - a)) & 1;
            w *= bit ? frac[a] : 1.0 - frac[a];
            off = off * box.extent(a) + (base[a] + bit);
        }
        acc += w * values[static_cast<std::size_t>(off)];
    }
    return acc;
}

}  // namespace

double PouField::raw_window_at(std::size_t support_index, const double* x) const {
    const Support& s = supports[support_index];
    if (s.rectangular) {
        double w = 1.0;
        for (int a = 0; a < rank; ++a) {
            w *= taper(axis_depth(x[a], s.region_bbox.lo[a], s.region_bbox.hi[a]), overlap);
            if (w == 0.0) return 0.0;
        }
        return w;
    }
    for (int a = 0; a < rank; ++a) {
        if (x[a] < static_cast<double>(s.support_bbox.lo[a]) - 0.5 ||
            x[a] > static_cast<double>(s.support_bbox.hi[a]) + 0.5)
            return 0.0;
    }
    Box dbox = s.support_bbox;  // depth plane carries a one-sample ring
    for (int a = 0; a < rank; ++a) {
        dbox.lo[a] -= 1;
        dbox.hi[a] += 1;
    }
    return taper(interp_depth(s.depth.data(), dbox, x, rank), overlap);
}

std::vector<std::array<std::int64_t, 3>> PouField::support_samples(
    std::size_t support_index) const {
    const Support& s = supports[support_index];
    std::vector<std::array<std::int64_t, 3>> out;
    out.reserve(static_cast<std::size_t>(s.support_bbox.volume()));
    std::array<std::int64_t, 3> idx{};
    for (int a = 0; a < rank; ++a) idx[a] = s.support_bbox.lo[a];
    std::int64_t flat = 0;
    for (;;) {
        if (s.window[static_cast<std::size_t>(flat)] > 0.0) out.push_back(idx);
        ++flat;
        int a = rank - 1;
        for (; a >= 0; --a) {
            if (++idx[a] <= s.support_bbox.hi[a]) break;
            idx[a] = s.support_bbox.lo[a];
        }
        if (a < 0) break;
    }
    return out;
}

PouField build_pou(const Partition& p, std::int64_t overlap) {
    if (overlap < 0) fail_usage("overlap must be >= 0");
    const int rank = p.grid.rank();
    if (overlap > 0) {
        for (const auto& r : p.regions)
            for (int a = 0; a < rank; ++a)
                if (overlap >= r.bbox.extent(a))
                    fail_usage("overlap " + std::to_string(overlap) +
                               " too large for region extent " +
                               std::to_string(r.bbox.extent(a)));
    }

    PouField f;
    f.overlap = overlap;
    f.extent = p.grid.extent;
    f.rank = rank;
    f.supports.resize(p.regions.size());

    for (std::size_t i = 0; i < p.regions.size(); ++i) {
        const Region& r = p.regions[i];
        PouField::Support& s = f.supports[i];
        s.region_id = r.id;
        s.region_bbox = r.bbox;
        s.rectangular = p.region_samples(r) == r.bbox.volume();
        s.support_bbox = r.bbox;
        for (int a = 0; a < rank; ++a) {
            s.support_bbox.lo[a] = std::max<std::int64_t>(0, r.bbox.lo[a] - overlap);
            s.support_bbox.hi[a] = std::min(p.grid.extent[a] - 1, r.bbox.hi[a] + overlap);
        }

        const std::int64_t vol = s.support_bbox.volume();
        s.window.resize(static_cast<std::size_t>(vol));

        if (s.rectangular) {
            std::array<std::int64_t, 3> idx{};
            for (int a = 0; a < rank; ++a) idx[a] = s.support_bbox.lo[a];
            std::int64_t flat = 0;
            for (;;) {
                double w = 1.0;
                for (int a = 0; a < rank; ++a)
                    w *= taper(axis_depth(static_cast<double>(idx[a]), r.bbox.lo[a], r.bbox.hi[a]),
                               overlap);
                s.window[static_cast<std::size_t>(flat++)] = w;
                int a = rank - 1;
                for (; a >= 0; --a) {
                    if (++idx[a] <= s.support_bbox.hi[a]) break;
                    idx[a] = s.support_bbox.lo[a];
                }
                if (a < 0) break;
            }
        } else {
            DepthPlane dp = region_depth_plane(p, r, s.support_bbox, overlap, rank);
            s.depth = dp.values;
            std::array<std::int64_t, 3> idx{};
            for (int a = 0; a < rank; ++a) idx[a] = s.support_bbox.lo[a];
            std::int64_t flat = 0;
            for (;;) {
                std::int64_t off = 0;
                for (int a = 0; a < rank; ++a)
                    off = off * dp.box.extent(a) + (idx[a] - dp.box.lo[a]);
                s.window[static_cast<std::size_t>(flat++)] =
                    taper(dp.values[static_cast<std::size_t>(off)], overlap);
                int a = rank - 1;
                for (; a >= 0; --a) {
                    if (++idx[a] <= s.support_bbox.hi[a]) break;
                    idx[a] = s.support_bbox.lo[a];
                }
                if (a < 0) break;
            }
        }
    }
    return f;
}

SignalTensor blend(const PouField& pou, const std::vector<std::vector<double>>& local_pred,
                   std::int64_t channels, int threads) {
    if (local_pred.size() != pou.supports.size())
        fail_usage("blend: one prediction plane per region required");
    SignalTensor out(pou.extent, channels);
    const std::int64_t rows = pou.extent[0];
    std::int64_t row_samples = 1;
    for (int a = 1; a < pou.rank; ++a) row_samples *= pou.extent[a];

    std::vector<double> den(static_cast<std::size_t>(out.samples()), 0.0);
    const std::int64_t strip = 32;
    const std::int64_t nstrips = (rows + strip - 1) / strip;

    parallel_for(nstrips, threads, [&](std::int64_t si) {
        const std::int64_t y0 = si * strip;
        const std::int64_t y1 = std::min(rows, y0 + strip);
        for (std::size_t ri = 0; ri < pou.supports.size(); ++ri) {
            const auto& s = pou.supports[ri];
            const auto& pred = local_pred[ri];
            const std::int64_t sy0 = std::max(y0, s.support_bbox.lo[0]);
            const std::int64_t sy1 = std::min(y1 - 1, s.support_bbox.hi[0]);
            if (sy0 > sy1) continue;
            std::array<std::int64_t, 3> idx{};
            idx[0] = sy0;
            for (int a = 1; a < pou.rank; ++a) idx[a] = s.support_bbox.lo[a];
            for (;;) {
                std::int64_t loc = 0;
                std::int64_t glob = 0;
                for (int a = 0; a < pou.rank; ++a) {
                    loc = loc * s.support_bbox.extent(a) + (idx[a] - s.support_bbox.lo[a]);
                    glob = glob * pou.extent[a] + idx[a];
                }
                const double w = s.window[static_cast<std::size_t>(loc)];
                if (w > 0.0) {
                    den[static_cast<std::size_t>(glob)] += w;
                    for (std::int64_t c = 0; c < channels; ++c)
                        out.values[static_cast<std::size_t>(glob * channels + c)] +=
                            w * pred[static_cast<std::size_t>(loc * channels + c)];
                }
                int a = pou.rank - 1;
                for (; a >= 1; --a) {
                    if (++idx[a] <= s.support_bbox.hi[a]) break;
                    idx[a] = s.support_bbox.lo[a];
                }
                if (a < 1) {
                    if (++idx[0] > sy1) break;
                }
            }
        }
        // normalize this strip
        for (std::int64_t y = y0; y < y1; ++y) {
            for (std::int64_t j = 0; j < row_samples; ++j) {
                const std::int64_t g = y * row_samples + j;
                const double d = den[static_cast<std::size_t>(g)];
                if (!(d > 0.0)) fail_numeric("blend: sample not covered by any window");
                for (std::int64_t c = 0; c < channels; ++c)
                    out.values[static_cast<std::size_t>(g * channels + c)] /= d;
            }
        }
    });
    out.record_range();
    return out;
}

}  // namespace elmfit
