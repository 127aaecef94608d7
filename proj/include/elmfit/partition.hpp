#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "elmfit/common.hpp"
#include "elmfit/tensor.hpp"

namespace elmfit {

// Atomic-cell geometry: per-axis nominal cell size; the last cell along an
// axis absorbs the remainder (sizes s..2s-1).
struct AtomicGrid {
    std::vector<std::int64_t> extent;     // signal sample counts per axis
    std::vector<std::int64_t> cell_size;  // nominal size per axis
    std::vector<std::int64_t> dims;       // cell counts per axis

    int rank() const { return static_cast<int>(extent.size()); }
    std::int64_t cell_count() const {
        std::int64_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
    // pixel range [lo, hi] (inclusive) of cell coordinate c along axis a
    std::int64_t cell_lo(int a, std::int64_t c) const { return c * cell_size[a]; }
    std::int64_t cell_hi(int a, std::int64_t c) const {
        return (c == dims[a] - 1) ? extent[a] - 1 : (c + 1) * cell_size[a] - 1;
    }
    std::int64_t cell_index(const std::array<std::int64_t, 3>& cc) const {
        std::int64_t idx = 0;
        for (int a = 0; a < rank(); ++a) idx = idx * dims[a] + cc[a];
        return idx;
    }
    std::array<std::int64_t, 3> cell_coords(std::int64_t idx) const {
        std::array<std::int64_t, 3> cc{{0, 0, 0}};
        for (int a = rank() - 1; a >= 0; --a) {
            cc[a] = idx % dims[a];
            idx /= dims[a];
        }
        return cc;
    }
    Box cell_box(std::int64_t idx) const {
        auto cc = cell_coords(idx);
        Box b;
        b.rank = rank();
        for (int a = 0; a < rank(); ++a) {
            b.lo[a] = cell_lo(a, cc[a]);
            b.hi[a] = cell_hi(a, cc[a]);
        }
        return b;
    }
};

struct Region {
    std::int64_t id = -1;
    std::vector<std::int64_t> cells;  // sorted atomic-cell indices
    Box bbox;                         // tight pixel bounding box
    double energy = 0.0;

    std::int64_t cell_count() const { return static_cast<std::int64_t>(cells.size()); }
};

struct MergeEvent {
    std::int64_t initiator = -1;
    std::int64_t absorbed = -1;
    std::int64_t result = -1;
    double energy = 0.0;
};

struct Partition {
    enum class Kind { regular, beam };

    AtomicGrid grid;
    Kind kind = Kind::regular;
    std::vector<Region> regions;           // ascending id
    std::vector<std::int64_t> cell_region; // cell index -> region id
    std::vector<MergeEvent> merge_log;     // beam construction trace

    std::int64_t region_count() const { return static_cast<std::int64_t>(regions.size()); }
    const Region& region_by_id(std::int64_t id) const;
    std::int64_t region_index(std::int64_t id) const;  // -1 if unknown
    void rebuild_cell_map();
    // pixel sample count of a region
    std::int64_t region_samples(const Region& r) const;
    // byte mask (1 inside) of the region over its bbox
    std::vector<std::uint8_t> region_mask(const Region& r) const;
};

// Axis-aligned tiling; every region is one atomic cell of side
// `subdomain_side` (temporal axes use `temporal_patch`). Energies are not
// computed; call compute_region_energies if needed.
Partition regular_mesh(const std::vector<std::int64_t>& signal_shape, std::int64_t subdomain_side,
                       std::optional<std::int64_t> temporal_patch = std::nullopt);

// Bottom-up merging: sweep regions in ascending energy order; each region
// below tau merges with the neighbor minimizing the union energy, provided
// that energy stays <= tau. Stops when a sweep performs no merge.
Partition beam_partition(const SignalTensor& signal, std::int64_t atomic_size, double tau,
                         std::optional<std::int64_t> temporal_patch = std::nullopt);

// Fixed-count variant: repeatedly merge the globally lowest-energy region
// with its best neighbor (no threshold gate) until target_n regions remain.
Partition beam_partition_to_count(const SignalTensor& signal, std::int64_t atomic_size,
                                  std::int64_t target_n,
                                  std::optional<std::int64_t> temporal_patch = std::nullopt);

// Regions sharing an atomic-cell face (4-connected in 2D, 6-connected in 3D).
std::vector<std::int64_t> neighbors(const Partition& p, std::int64_t region_id);

// Fills Region::energy from the signal (masked bounding-box content).
void compute_region_energies(Partition& p, const SignalTensor& signal, int threads = 1);

// RGB overlay: grayscale composite with 1-pixel region boundaries. For
// temporal volumes the first time slice is rendered.
SignalTensor render_partition(const Partition& p, const SignalTensor& signal);

// Text serialization: grid geometry plus one "id: cell,cell,..." line per
// region. Round-trip stable.
void save_partition(const Partition& p, const std::string& path);
Partition load_partition(const std::string& path);

}  // namespace elmfit
