#pragma once

#include <cstdint>
#include <vector>

#include "elmfit/partition.hpp"

namespace elmfit {

// Raised-cosine partition-of-unity windows over regions dilated by
// `overlap` samples (Chebyshev metric). Raw windows are Shepard-normalized,
// so the weights sum to one exactly for any region geometry.
//
// Region edges sit on the half-sample cell boundary: a region covering
// samples [lo, hi] spans the continuous interval [lo-0.5, hi+0.5], so two
// abutting windows are mirror images and the raw pair sums to 1 across the
// seam. Rectangular regions use a product of per-axis tapers; irregular
// regions ramp the grid (Chebyshev) distance from the dilated-support edge.
// overlap = 0 gives crisp indicator windows.
struct PouField {
    struct Support {
        std::int64_t region_id = -1;
        bool rectangular = true;
        Box region_bbox;                 // undilated, pixel coords
        Box support_bbox;                // dilated and clipped
        std::vector<double> window;      // raw window at integer samples of support_bbox
        std::vector<double> depth;       // signed depth plane (irregular regions only)
    };

    std::int64_t overlap = 0;
    std::vector<std::int64_t> extent;    // domain shape
    int rank = 0;
    std::vector<Support> supports;       // same order as partition.regions

    // Raw (unnormalized) window of supports[i] at a continuous point given
    // in sample units; zero outside the dilated support.
    double raw_window_at(std::size_t support_index, const double* x) const;

    // Sample indices with positive window = the region's training set.
    std::vector<std::array<std::int64_t, 3>> support_samples(std::size_t support_index) const;
};

PouField build_pou(const Partition& p, std::int64_t overlap);

// Shepard-blended field: per-region prediction planes are given on the
// support boxes (row-major, channel-minor). Output is the full-domain
// tensor; at every sample the result is a convex combination of the
// overlapping local predictions (summed in ascending region order).
SignalTensor blend(const PouField& pou, const std::vector<std::vector<double>>& local_pred,
                   std::int64_t channels, int threads = 1);

}  // namespace elmfit
