#include "elmfit/partition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "elmfit/parallel.hpp"
#include "elmfit/spectral.hpp"

namespace elmfit {

const Region& Partition::region_by_id(std::int64_t id) const {
    auto idx = region_index(id);
    if (idx < 0) fail_usage("unknown region id " + std::to_string(id));
    return regions[static_cast<std::size_t>(idx)];
}

std::int64_t Partition::region_index(std::int64_t id) const {
    auto it = std::lower_bound(regions.begin(), regions.end(), id,
                               [](const Region& r, std::int64_t v) { return r.id < v; });
    if (it == regions.end() || it->id != id) return -1;
    return it - regions.begin();
}

void Partition::rebuild_cell_map() {
    cell_region.assign(static_cast<std::size_t>(grid.cell_count()), -1);
    for (const auto& r : regions)
        for (auto c : r.cells) cell_region[static_cast<std::size_t>(c)] = r.id;
}

std::int64_t Partition::region_samples(const Region& r) const {
    std::int64_t n = 0;
    for (auto c : r.cells) n += grid.cell_box(c).volume();
    return n;
}

std::vector<std::uint8_t> Partition::region_mask(const Region& r) const {
    const Box& bb = r.bbox;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(bb.volume()), 0);
    const int d = grid.rank();
    for (auto c : r.cells) {
        Box cb = grid.cell_box(c);
        std::array<std::int64_t, 3> idx{};
        for (int a = 0; a < d; ++a) idx[a] = cb.lo[a];
        for (;;) {
            std::int64_t off = 0;
            for (int a = 0; a < d; ++a) off = off * bb.extent(a) + (idx[a] - bb.lo[a]);
            mask[static_cast<std::size_t>(off)] = 1;
            int a = d - 1;
            for (; a >= 0; --a) {
                if (++idx[a] <= cb.hi[a]) break;
                idx[a] = cb.lo[a];
            }
            if (a < 0) break;
        }
    }
    return mask;
}

namespace {

AtomicGrid make_grid(const std::vector<std::int64_t>& shape, std::int64_t side,
                     std::optional<std::int64_t> temporal_patch) {
    if (shape.size() < 2 || shape.size() > 3) fail_usage("signal must have 2 or 3 axes");
    for (auto s : shape)
        if (s < 2) fail_usage("degenerate signal shape (axis < 2)");
    if (side < 2) fail_usage("subdomain side must be >= 2");

    AtomicGrid g;
    g.extent = shape;
    g.cell_size.resize(shape.size());
    g.dims.resize(shape.size());
    for (std::size_t a = 0; a < shape.size(); ++a) {
        std::int64_t s = side;
        if (a == 2) s = temporal_patch.value_or(shape[2]);  // time axis
        if (s < 1) fail_usage("temporal patch must be >= 1");
        if (shape[a] < s)
            fail_usage("axis " + std::to_string(a) + " (" + std::to_string(shape[a]) +
                       ") smaller than cell size " + std::to_string(s));
        g.cell_size[a] = s;
        g.dims[a] = shape[a] / s;  // last cell absorbs the remainder
    }
    return g;
}

// Extracts the patch of `signal` covered by `bb` (all channels).
SignalTensor extract_patch(const SignalTensor& signal, const Box& bb) {
    const int d = signal.rank();
    std::vector<std::int64_t> shape(d);
    for (int a = 0; a < d; ++a) shape[a] = bb.extent(a);
    SignalTensor patch(shape, signal.channels);
    std::array<std::int64_t, 3> idx{};
    for (int a = 0; a < d; ++a) idx[a] = bb.lo[a];
    std::int64_t out = 0;
    for (;;) {
        const std::int64_t src = signal.sample_offset(idx) * signal.channels;
        for (std::int64_t c = 0; c < signal.channels; ++c)
            patch.values[static_cast<std::size_t>(out++)] =
                signal.values[static_cast<std::size_t>(src + c)];
        int a = d - 1;
        for (; a >= 0; --a) {
            if (++idx[a] <= bb.hi[a]) break;
            idx[a] = bb.lo[a];
        }
        if (a < 0) break;
    }
    return patch;
}

double region_energy(const SignalTensor& signal, const Partition& p, const Region& r) {
    SignalTensor patch = extract_patch(signal, r.bbox);
    // full-rectangle regions need no mask
    if (p.region_samples(r) == r.bbox.volume()) return barron_energy(patch);
    return barron_energy(patch, p.region_mask(r));
}

Box cells_bbox(const AtomicGrid& g, const std::vector<std::int64_t>& cells) {
    Box bb = g.cell_box(cells[0]);
    for (std::size_t i = 1; i < cells.size(); ++i) bb.expand_to(g.cell_box(cells[i]));
    return bb;
}

// Neighbor region ids of a cell set, ascending, excluding self.
std::vector<std::int64_t> neighbor_ids(const AtomicGrid& g,
                                       const std::vector<std::int64_t>& cell_region,
                                       const std::vector<std::int64_t>& cells,
                                       std::int64_t self_id) {
    std::set<std::int64_t> out;
    const int d = g.rank();
    for (auto c : cells) {
        auto cc = g.cell_coords(c);
        for (int a = 0; a < d; ++a) {
            for (int dir = -1; dir <= 1; dir += 2) {
                auto nb = cc;
                nb[a] += dir;
                if (nb[a] < 0 || nb[a] >= g.dims[a]) continue;
                const std::int64_t nid = cell_region[static_cast<std::size_t>(g.cell_index(nb))];
                if (nid != self_id) out.insert(nid);
            }
        }
    }
    return {out.begin(), out.end()};
}

struct BeamState {
    const SignalTensor* signal = nullptr;
    Partition part;
    std::int64_t next_id = 0;

    // Energy of the union of two regions, evaluated on the union's masked
    // bounding box; recomputed from scratch (no incremental approximation).
    double union_energy(const Region& a, const Region& b) const {
        Region u;
        u.cells.resize(a.cells.size() + b.cells.size());
        std::merge(a.cells.begin(), a.cells.end(), b.cells.begin(), b.cells.end(),
                   u.cells.begin());
        u.bbox = cells_bbox(part.grid, u.cells);
        return region_energy(*signal, part, u);
    }

    // Best merge partner for region r: minimal union energy, ties broken by
    // lowest neighbor id (energies within 1e-12 count as tied).
    struct Candidate {
        std::int64_t id = -1;
        double energy = 0.0;
    };
    Candidate best_neighbor(const Region& r) const {
        auto ids = neighbor_ids(part.grid, part.cell_region, r.cells, r.id);
        Candidate best;
        std::vector<double> energies(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i)
            energies[i] = union_energy(r, part.region_by_id(ids[i]));
        double emin = 0.0;
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (i == 0 || energies[i] < emin) emin = energies[i];
        const double tol = 1e-12 * std::max(1.0, std::abs(emin)) + 1e-300;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (energies[i] <= emin + tol) {
                best.id = ids[i];
                best.energy = energies[i];
                break;  // ids ascending: first within tolerance is lowest id
            }
        }
        return best;
    }

    std::int64_t merge(std::int64_t ida, std::int64_t idb, double energy) {
        const auto ia = part.region_index(ida);
        const auto ib = part.region_index(idb);
        Region merged;
        merged.id = next_id++;
        const Region& a = part.regions[static_cast<std::size_t>(ia)];
        const Region& b = part.regions[static_cast<std::size_t>(ib)];
        merged.cells.resize(a.cells.size() + b.cells.size());
        std::merge(a.cells.begin(), a.cells.end(), b.cells.begin(), b.cells.end(),
                   merged.cells.begin());
        merged.bbox = cells_bbox(part.grid, merged.cells);
        merged.energy = energy;
        for (auto c : merged.cells) part.cell_region[static_cast<std::size_t>(c)] = merged.id;
        part.regions.erase(part.regions.begin() + std::max(ia, ib));
        part.regions.erase(part.regions.begin() + std::min(ia, ib));
        part.regions.push_back(merged);  // ids grow monotonically, order kept
        part.merge_log.push_back({ida, idb, merged.id, energy});
        return merged.id;
    }
};

BeamState beam_init(const SignalTensor& signal, std::int64_t atomic_size,
                    std::optional<std::int64_t> temporal_patch) {
    if (!signal.all_finite()) fail_usage("signal contains non-finite values");
    BeamState st;
    st.signal = &signal;
    st.part.grid = make_grid(signal.shape, atomic_size, temporal_patch);
    st.part.kind = Partition::Kind::beam;
    const std::int64_t n = st.part.grid.cell_count();
    st.part.regions.resize(static_cast<std::size_t>(n));
    st.part.cell_region.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        Region& r = st.part.regions[static_cast<std::size_t>(i)];
        r.id = i;
        r.cells = {i};
        r.bbox = st.part.grid.cell_box(i);
        r.energy = barron_energy(extract_patch(signal, r.bbox));
        st.part.cell_region[static_cast<std::size_t>(i)] = i;
    }
    st.next_id = n;
    return st;
}

// Ascending (energy, id) order of the current regions.
std::vector<std::int64_t> energy_order(const Partition& p) {
    std::vector<std::int64_t> ids;
    ids.reserve(p.regions.size());
    for (const auto& r : p.regions) ids.push_back(r.id);
    std::sort(ids.begin(), ids.end(), [&](std::int64_t a, std::int64_t b) {
        const double ea = p.region_by_id(a).energy;
        const double eb = p.region_by_id(b).energy;
        if (ea != eb) return ea < eb;
        return a < b;
    });
    return ids;
}

}  // namespace

Partition regular_mesh(const std::vector<std::int64_t>& signal_shape, std::int64_t subdomain_side,
                       std::optional<std::int64_t> temporal_patch) {
    Partition p;
    p.grid = make_grid(signal_shape, subdomain_side, temporal_patch);
    p.kind = Partition::Kind::regular;
    const std::int64_t n = p.grid.cell_count();
    p.regions.resize(static_cast<std::size_t>(n));
    p.cell_region.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        Region& r = p.regions[static_cast<std::size_t>(i)];
        r.id = i;
        r.cells = {i};
        r.bbox = p.grid.cell_box(i);
        p.cell_region[static_cast<std::size_t>(i)] = i;
    }
    return p;
}

Partition beam_partition(const SignalTensor& signal, std::int64_t atomic_size, double tau,
                         std::optional<std::int64_t> temporal_patch) {
    if (tau < 0.0) fail_usage("tau must be >= 0");
    BeamState st = beam_init(signal, atomic_size, temporal_patch);
    for (;;) {
        bool merged_any = false;
        const auto order = energy_order(st.part);  // snapshot for this sweep
        for (auto id : order) {
            const auto idx = st.part.region_index(id);
            if (idx < 0) continue;  // removed earlier in this sweep
            const Region& r = st.part.regions[static_cast<std::size_t>(idx)];
            if (!(r.energy < tau)) continue;
            auto cand = st.best_neighbor(r);
            if (cand.id < 0) continue;  // no neighbors (single region)
            if (cand.energy <= tau) {
                st.merge(id, cand.id, cand.energy);
                merged_any = true;
            }
        }
        if (!merged_any) break;
    }
    return std::move(st.part);
}

Partition beam_partition_to_count(const SignalTensor& signal, std::int64_t atomic_size,
                                  std::int64_t target_n,
                                  std::optional<std::int64_t> temporal_patch) {
    BeamState st = beam_init(signal, atomic_size, temporal_patch);
    const std::int64_t total = st.part.grid.cell_count();
    if (target_n < 1 || target_n > total)
        fail_usage("target_n must be in [1, " + std::to_string(total) + "]");
    while (st.part.region_count() > target_n) {
        const auto order = energy_order(st.part);
        const Region& r = st.part.region_by_id(order.front());
        auto cand = st.best_neighbor(r);
        if (cand.id < 0) break;
        st.merge(r.id, cand.id, cand.energy);
    }
    return std::move(st.part);
}

std::vector<std::int64_t> neighbors(const Partition& p, std::int64_t region_id) {
    const Region& r = p.region_by_id(region_id);
    return neighbor_ids(p.grid, p.cell_region, r.cells, r.id);
}

void compute_region_energies(Partition& p, const SignalTensor& signal, int threads) {
    parallel_for(p.region_count(), threads, [&](std::int64_t i) {
        Region& r = p.regions[static_cast<std::size_t>(i)];
        r.energy = region_energy(signal, p, r);
    });
}

SignalTensor render_partition(const Partition& p, const SignalTensor& signal) {
    if (signal.rank() < 2) fail_usage("render needs a 2- or 3-axis signal");
    const std::int64_t H = signal.shape[0];
    const std::int64_t W = signal.shape[1];
    SignalTensor out({H, W}, 3);

    const int d = p.grid.rank();
    auto region_at = [&](std::int64_t y, std::int64_t x) {
        std::array<std::int64_t, 3> cc{{0, 0, 0}};
        const std::int64_t coords[2] = {y, x};
        for (int a = 0; a < 2; ++a) {
            std::int64_t c = coords[a] / p.grid.cell_size[a];
            c = std::min(c, p.grid.dims[a] - 1);
            cc[a] = c;
        }
        // 3D partitions: take the first temporal slab
        for (int a = 2; a < d; ++a) cc[a] = 0;
        return p.cell_region[static_cast<std::size_t>(p.grid.cell_index(cc))];
    };

    for (std::int64_t y = 0; y < H; ++y) {
        for (std::int64_t x = 0; x < W; ++x) {
            double g = 0.0;
            std::array<std::int64_t, 3> idx{{y, x, 0}};
            const std::int64_t off = signal.sample_offset(idx) * signal.channels;
            for (std::int64_t c = 0; c < signal.channels; ++c)
                g += signal.values[static_cast<std::size_t>(off + c)];
            g /= static_cast<double>(signal.channels);
            g = std::min(1.0, std::max(0.0, g));

            const std::int64_t rid = region_at(y, x);
            bool boundary = (y == 0 || x == 0 || y == H - 1 || x == W - 1);
            if (!boundary && x + 1 < W && region_at(y, x + 1) != rid) boundary = true;
            if (!boundary && y + 1 < H && region_at(y + 1, x) != rid) boundary = true;

            const std::size_t o = static_cast<std::size_t>((y * W + x) * 3);
            if (boundary) {
                out.values[o] = 1.0;
                out.values[o + 1] = 0.15;
                out.values[o + 2] = 0.15;
            } else {
                out.values[o] = out.values[o + 1] = out.values[o + 2] = g;
            }
        }
    }
    out.record_range();
    return out;
}

void save_partition(const Partition& p, const std::string& path) {
    std::ofstream os(path);
    if (!os) fail_io("cannot write partition file: " + path);
    os << "elmfit-partition 1\n";
    os << "kind " << (p.kind == Partition::Kind::beam ? "beam" : "regular") << "\n";
    os << "extent";
    for (auto e : p.grid.extent) os << ' ' << e;
    os << "\ncell";
    for (auto s : p.grid.cell_size) os << ' ' << s;
    os << "\ndims";
    for (auto d : p.grid.dims) os << ' ' << d;
    os << "\n";
    for (const auto& r : p.regions) {
        os << r.id << ':';
        for (std::size_t i = 0; i < r.cells.size(); ++i) os << (i ? "," : " ") << r.cells[i];
        os << "\n";
    }
    if (!os) fail_io("write failed: " + path);
}

Partition load_partition(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail_io("cannot open partition file: " + path);
    std::string line;
    if (!std::getline(is, line) || line != "elmfit-partition 1")
        fail_io("not a partition file: " + path);

    Partition p;
    std::string kind_s;
    {
        std::string key;
        is >> key >> kind_s;
        if (key != "kind" || (kind_s != "beam" && kind_s != "regular"))
            fail_io("malformed partition header: " + path);
        p.kind = kind_s == "beam" ? Partition::Kind::beam : Partition::Kind::regular;
    }
    auto read_axis_list = [&](const char* expect) {
        std::string key;
        is >> key;
        if (key != expect) fail_io("malformed partition header: " + path);
        std::vector<std::int64_t> out;
        while (is.peek() != '\n' && is.peek() != EOF) {
            std::int64_t v;
            if (!(is >> v)) break;
            out.push_back(v);
        }
        return out;
    };
    p.grid.extent = read_axis_list("extent");
    p.grid.cell_size = read_axis_list("cell");
    p.grid.dims = read_axis_list("dims");
    if (p.grid.extent.empty() || p.grid.extent.size() != p.grid.cell_size.size() ||
        p.grid.extent.size() != p.grid.dims.size())
        fail_io("malformed partition header: " + path);
    is >> std::ws;

    const std::int64_t ncells = p.grid.cell_count();
    std::vector<bool> seen(static_cast<std::size_t>(ncells), false);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos) fail_io("malformed region line: " + line);
        Region r;
        r.id = std::stoll(line.substr(0, colon));
        std::stringstream cells(line.substr(colon + 1));
        std::string token;
        while (std::getline(cells, token, ',')) {
            const std::int64_t c = std::stoll(token);
            if (c < 0 || c >= ncells) fail_io("cell index out of range: " + token);
            if (seen[static_cast<std::size_t>(c)]) fail_io("cell listed twice: " + token);
            seen[static_cast<std::size_t>(c)] = true;
            r.cells.push_back(c);
        }
        if (r.cells.empty()) fail_io("empty region in " + path);
        std::sort(r.cells.begin(), r.cells.end());
        r.bbox = cells_bbox(p.grid, r.cells);
        p.regions.push_back(std::move(r));
    }
    for (bool s : seen)
        if (!s) fail_io("partition does not cover every cell: " + path);
    std::sort(p.regions.begin(), p.regions.end(),
              [](const Region& a, const Region& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < p.regions.size(); ++i)
        if (p.regions[i].id == p.regions[i - 1].id) fail_io("duplicate region id");
    p.rebuild_cell_map();
    return p;
}

}  // namespace elmfit
