#include "elmfit/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "elmfit/kernels.hpp"
#include "elmfit/parallel.hpp"
#include "elmfit/rng.hpp"
#include "elmfit/spectral.hpp"

namespace elmfit {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

constexpr double kPsnrEps = 1e-8;

double gt_absmax(const SignalTensor& gt) {
    double m = 0.0;
    for (double v : gt.values) m = std::max(m, std::abs(v));
    return m;
}

const char* mesh_kind_name(MeshSpec::Kind k) {
    switch (k) {
        case MeshSpec::Kind::regular: return "regular";
        case MeshSpec::Kind::beam_tau: return "beam-tau";
        case MeshSpec::Kind::beam_count: return "beam-count";
    }
    return "?";
}

}  // namespace

void FitConfig::validate() const {
    if (m < 1) fail_usage("m must be >= 1");
    if (use_rff) {
        if (rff_features < 1) fail_usage("F must be >= 1");
        if (!(sigma_rff > 0.0)) fail_usage("sigma_rff must be > 0");
    }
    if (ridge && (*ridge < 0.0 || !std::isfinite(*ridge)))
        fail_usage("ridge must be finite and >= 0");
    if (overlap < -1) fail_usage("overlap must be >= 0 (or -1 for the default)");
    if (threads < 0) fail_usage("threads must be >= 0");
    if (window != "raised_cosine") fail_usage("unknown window: " + window);
    if (rng_algorithm != "splitmix64") fail_usage("unknown rng_algorithm: " + rng_algorithm);
    switch (mesh.kind) {
        case MeshSpec::Kind::regular:
            if (mesh.side < 2) fail_usage("subdomain side must be >= 2");
            break;
        case MeshSpec::Kind::beam_tau:
            if (mesh.atomic < 2) fail_usage("atomic size must be >= 2");
            if (mesh.tau < 0.0) fail_usage("tau must be >= 0");
            break;
        case MeshSpec::Kind::beam_count:
            if (mesh.atomic < 2) fail_usage("atomic size must be >= 2");
            if (mesh.target_n < 1) fail_usage("target_n must be >= 1");
            break;
    }
    if (mesh.temporal_patch && *mesh.temporal_patch < 1)
        fail_usage("temporal patch must be >= 1");
}

std::int64_t FitConfig::resolve_overlap() const {
    if (overlap >= 0) return overlap;
    if (mesh.kind == MeshSpec::Kind::regular) return std::max<std::int64_t>(2, mesh.side / 8);
    return 2;
}

nlohmann::ordered_json FitConfig::to_json() const {
    nlohmann::ordered_json j;
    j["mesh"] = mesh_kind_name(mesh.kind);
    j["side"] = mesh.side;
    j["atomic"] = mesh.atomic;
    j["tau"] = mesh.tau;
    j["target_n"] = mesh.target_n;
    if (mesh.temporal_patch)
        j["temporal_patch"] = *mesh.temporal_patch;
    else
        j["temporal_patch"] = nullptr;
    j["m"] = m;
    j["F"] = rff_features;
    j["sigma_rff"] = sigma_rff;
    j["use_rff"] = use_rff;
    if (ridge)
        j["ridge"] = *ridge;
    else
        j["ridge"] = "auto";
    if (overlap >= 0)
        j["overlap"] = overlap;
    else
        j["overlap"] = "auto";
    j["bias_column"] = bias_column;
    j["solver_mode"] = solver_mode_name(solver_mode);
    j["window"] = window;
    j["rng_algorithm"] = rng_algorithm;
    j["global_seed"] = global_seed;
    j["threads"] = threads;
    return j;
}

FitConfig FitConfig::from_json(const nlohmann::ordered_json& j) {
    FitConfig c;
    if (j.contains("mesh")) {
        const std::string k = j.at("mesh").get<std::string>();
        if (k == "regular")
            c.mesh.kind = MeshSpec::Kind::regular;
        else if (k == "beam-tau")
            c.mesh.kind = MeshSpec::Kind::beam_tau;
        else if (k == "beam-count")
            c.mesh.kind = MeshSpec::Kind::beam_count;
        else
            fail_usage("unknown mesh kind: " + k);
    }
    if (j.contains("side")) c.mesh.side = j.at("side").get<std::int64_t>();
    if (j.contains("atomic")) c.mesh.atomic = j.at("atomic").get<std::int64_t>();
    if (j.contains("tau")) c.mesh.tau = j.at("tau").get<double>();
    if (j.contains("target_n")) c.mesh.target_n = j.at("target_n").get<std::int64_t>();
    if (j.contains("temporal_patch") && !j.at("temporal_patch").is_null())
        c.mesh.temporal_patch = j.at("temporal_patch").get<std::int64_t>();
    if (j.contains("m")) c.m = j.at("m").get<std::int64_t>();
    if (j.contains("F")) c.rff_features = j.at("F").get<std::int64_t>();
    if (j.contains("sigma_rff")) c.sigma_rff = j.at("sigma_rff").get<double>();
    if (j.contains("use_rff")) c.use_rff = j.at("use_rff").get<bool>();
    if (j.contains("ridge") && !j.at("ridge").is_string())
        c.ridge = j.at("ridge").get<double>();
    if (j.contains("overlap") && !j.at("overlap").is_string())
        c.overlap = j.at("overlap").get<std::int64_t>();
    if (j.contains("bias_column")) c.bias_column = j.at("bias_column").get<bool>();
    if (j.contains("solver_mode"))
        c.solver_mode = solver_mode_from_string(j.at("solver_mode").get<std::string>());
    if (j.contains("window")) c.window = j.at("window").get<std::string>();
    if (j.contains("rng_algorithm")) c.rng_algorithm = j.at("rng_algorithm").get<std::string>();
    if (j.contains("global_seed")) c.global_seed = j.at("global_seed").get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
    return c;
}

nlohmann::ordered_json FitReport::metrics_json() const {
    nlohmann::ordered_json j;
    j["psnr_db"] = psnr_db;
    j["per_channel_psnr_db"] = per_channel_psnr_db;
    j["mae"] = mae;
    j["mse"] = mse;
    j["region_count"] = region_count;
    nlohmann::ordered_json regs = nlohmann::ordered_json::array();
    for (const auto& r : regions) {
        nlohmann::ordered_json e;
        e["id"] = r.id;
        e["cells"] = r.cells;
        e["samples"] = r.samples;
        e["energy"] = r.energy;
        e["local_mse"] = r.local_mse;
        e["ridge_used"] = r.ridge_used;
        e["residual_rms"] = r.residual_rms;
        regs.push_back(std::move(e));
    }
    j["regions"] = std::move(regs);
    nlohmann::ordered_json cfg = config.to_json();
    cfg.erase("threads");
    j["config"] = std::move(cfg);
    return j;
}

nlohmann::ordered_json FitReport::to_json() const {
    nlohmann::ordered_json j = metrics_json();
    for (std::size_t i = 0; i < regions.size(); ++i)
        j["regions"][i]["solve_ms"] = regions[i].solve_ms;
    nlohmann::ordered_json t;
    t["partition"] = partition_ms;
    t["features"] = features_ms;
    t["solve"] = solve_ms;
    t["blend"] = blend_ms;
    t["total"] = total_ms;
    j["timings_ms"] = std::move(t);
    j["config"]["threads"] = config.threads;
    return j;
}

namespace {

Metrics metrics_impl(const SignalTensor& pred, const SignalTensor& gt) {
    if (pred.shape != gt.shape || pred.channels != gt.channels)
        fail_usage("metrics: shape mismatch");
    const double gmax = gt_absmax(gt);
    if (!(gmax > 0.0)) fail_usage("metrics: ground truth is all zeros");
    const std::int64_t S = gt.samples();
    const std::int64_t C = gt.channels;
    Metrics out;
    out.per_channel_psnr_db.resize(static_cast<std::size_t>(C));
    double mse_sum = 0.0, mae_sum = 0.0, psnr_sum = 0.0;
    for (std::int64_t c = 0; c < C; ++c) {
        double acc2 = 0.0, acc1 = 0.0;
        for (std::int64_t s = 0; s < S; ++s) {
            const double e = (pred.values[static_cast<std::size_t>(s * C + c)] -
                              gt.values[static_cast<std::size_t>(s * C + c)]) /
                             gmax;
            acc2 += e * e;
            acc1 += std::abs(e);
        }
        const double mse_c = acc2 / static_cast<double>(S);
        const double psnr_c = -10.0 * std::log10(mse_c + kPsnrEps);
        out.per_channel_psnr_db[static_cast<std::size_t>(c)] = psnr_c;
        mse_sum += mse_c;
        mae_sum += acc1 / static_cast<double>(S);
        psnr_sum += psnr_c;
    }
    out.mse = mse_sum / static_cast<double>(C);
    out.mae = mae_sum / static_cast<double>(C);
    out.psnr_db = psnr_sum / static_cast<double>(C);
    return out;
}

}  // namespace

Metrics compute_metrics(const SignalTensor& pred, const SignalTensor& gt) {
    return metrics_impl(pred, gt);
}
double psnr(const SignalTensor& pred, const SignalTensor& gt) {
    return metrics_impl(pred, gt).psnr_db;
}
double mae(const SignalTensor& pred, const SignalTensor& gt) { return metrics_impl(pred, gt).mae; }
double mse(const SignalTensor& pred, const SignalTensor& gt) { return metrics_impl(pred, gt).mse; }

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;  // average 1-based rank
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

SpearmanResult error_complexity_correlation(const FitReport& report) {
    const std::size_t n = report.regions.size();
    SpearmanResult out;
    if (n < 2) {
        out.degenerate = true;
        return out;
    }
    std::vector<double> e(n), err(n);
    for (std::size_t i = 0; i < n; ++i) {
        e[i] = report.regions[i].energy;
        err[i] = report.regions[i].local_mse;
    }
    const bool e_tied = std::all_of(e.begin(), e.end(), [&](double v) { return v == e[0]; });
    const bool r_tied = std::all_of(err.begin(), err.end(), [&](double v) { return v == err[0]; });
    if (e_tied || r_tied) {
        out.degenerate = true;
        return out;
    }
    const auto re = average_ranks(e);
    const auto rr = average_ranks(err);
    double me = 0.0, mr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        me += re[i];
        mr += rr[i];
    }
    me /= static_cast<double>(n);
    mr /= static_cast<double>(n);
    double num = 0.0, de = 0.0, dr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (re[i] - me) * (rr[i] - mr);
        de += (re[i] - me) * (re[i] - me);
        dr += (rr[i] - mr) * (rr[i] - mr);
    }
    if (de == 0.0 || dr == 0.0) {
        out.degenerate = true;
        return out;
    }
    out.rho = num / std::sqrt(de * dr);
    return out;
}

FitResult fit(const SignalTensor& signal, const FitConfig& cfg) {
    cfg.validate();
    if (signal.rank() < 2 || signal.rank() > 3) fail_usage("signal must have 2 or 3 axes");
    if (signal.channels < 1) fail_usage("signal must have at least one channel");
    if (signal.size() != static_cast<std::int64_t>(signal.values.size()))
        fail_usage("signal value count does not match shape");
    if (!signal.all_finite()) fail_usage("signal contains non-finite values");

    const auto t_total = Clock::now();
    const int threads = resolve_threads(cfg.threads);
    FitResult res;
    res.report.config = cfg;

    // mesh
    {
        const auto t0 = Clock::now();
        switch (cfg.mesh.kind) {
            case MeshSpec::Kind::regular:
                res.partition = regular_mesh(signal.shape, cfg.mesh.side, cfg.mesh.temporal_patch);
                compute_region_energies(res.partition, signal, threads);
                break;
            case MeshSpec::Kind::beam_tau:
                res.partition =
                    beam_partition(signal, cfg.mesh.atomic, cfg.mesh.tau, cfg.mesh.temporal_patch);
                break;
            case MeshSpec::Kind::beam_count:
                res.partition = beam_partition_to_count(signal, cfg.mesh.atomic, cfg.mesh.target_n,
                                                        cfg.mesh.temporal_patch);
                break;
        }
        res.report.partition_ms = ms_since(t0);
    }

    res.pou = build_pou(res.partition, cfg.resolve_overlap());

    const int d = signal.rank();
    if (cfg.use_rff) {
        res.encoder = RffEncoder::make(d, static_cast<int>(cfg.rff_features), cfg.sigma_rff,
                                       cfg.global_seed);
        res.has_encoder = true;
    }
    const RffEncoder* enc = res.has_encoder ? &res.encoder : nullptr;
    const int in_dim = res.has_encoder ? res.encoder.out_dim() : d;
    const std::int64_t C = signal.channels;
    const std::size_t cols = static_cast<std::size_t>(cfg.m) + (cfg.bias_column ? 1 : 0);
    const double gmax = gt_absmax(signal);
    if (!(gmax > 0.0)) fail_usage("signal is all zeros");

    const std::int64_t N = res.partition.region_count();
    res.models.resize(static_cast<std::size_t>(N));
    res.report.regions.resize(static_cast<std::size_t>(N));
    std::vector<std::vector<double>> planes(static_cast<std::size_t>(N));
    std::vector<double> feat_ms(static_cast<std::size_t>(N), 0.0);
    std::vector<double> sol_ms(static_cast<std::size_t>(N), 0.0);

    parallel_for(N, threads, [&](std::int64_t i) {
        const Region& region = res.partition.regions[static_cast<std::size_t>(i)];
        const auto samples = res.pou.support_samples(static_cast<std::size_t>(i));
        const std::size_t S = samples.size();
        if (S == 0) fail_numeric("region with no samples");

        const auto t_feat = Clock::now();
        LocalModel& model = res.models[static_cast<std::size_t>(i)];
        model.region_id = region.id;
        model.cmap = CoordMap::from_box(region.bbox);
        model.bias_column = cfg.bias_column;
        model.alpha_rows = cols;
        model.channels = static_cast<std::size_t>(C);
        model.hidden = HiddenLayer::make(cfg.global_seed, region.id, static_cast<int>(cfg.m),
                                         in_dim);

        std::vector<double> coords(S * static_cast<std::size_t>(d));
        for (std::size_t s = 0; s < S; ++s) {
            double raw[3];
            for (int a = 0; a < d; ++a) raw[a] = static_cast<double>(samples[s][a]);
            model.cmap.apply(raw, coords.data() + s * static_cast<std::size_t>(d));
        }
        std::vector<double> H(S * cols);
        hidden_activations(model.hidden, enc, coords.data(), S, d, H.data(), cols);
        if (cfg.bias_column)
            for (std::size_t s = 0; s < S; ++s) H[s * cols + cols - 1] = 1.0;
        std::vector<double> Y(S * static_cast<std::size_t>(C));
        for (std::size_t s = 0; s < S; ++s) {
            const std::int64_t off = signal.sample_offset(samples[s]) * C;
            for (std::int64_t c = 0; c < C; ++c)
                Y[s * static_cast<std::size_t>(C) + static_cast<std::size_t>(c)] =
                    signal.values[static_cast<std::size_t>(off + c)];
        }
        feat_ms[static_cast<std::size_t>(i)] = ms_since(t_feat);

        const auto t_solve = Clock::now();
        SolveResult sol = solve_local(H.data(), S, cols, Y.data(), static_cast<std::size_t>(C),
                                      cfg.ridge, cfg.solver_mode);
        sol_ms[static_cast<std::size_t>(i)] = ms_since(t_solve);
        model.alpha = std::move(sol.alpha);
        model.ridge_used = sol.ridge_used;
        model.residual_rms = sol.residual_rms;

        // local prediction on the support, laid out over the support bbox
        std::vector<double> pred(S * static_cast<std::size_t>(C));
        kern::a_x(H.data(), model.alpha.data(), S, cols, static_cast<std::size_t>(C), pred.data());
        const Box& sb = res.pou.supports[static_cast<std::size_t>(i)].support_bbox;
        auto& plane = planes[static_cast<std::size_t>(i)];
        plane.assign(static_cast<std::size_t>(sb.volume() * C), 0.0);
        for (std::size_t s = 0; s < S; ++s) {
            std::int64_t loc = 0;
            for (int a = 0; a < d; ++a)
                loc = loc * sb.extent(a) + (samples[s][a] - sb.lo[a]);
            for (std::int64_t c = 0; c < C; ++c)
                plane[static_cast<std::size_t>(loc * C + c)] =
                    pred[s * static_cast<std::size_t>(C) + static_cast<std::size_t>(c)];
        }

        // per-region error on the region's own (undilated) samples
        double acc = 0.0;
        std::int64_t count = 0;
        for (std::size_t s = 0; s < S; ++s) {
            bool inside = true;
            for (int a = 0; a < d && inside; ++a)
                inside = samples[s][a] >= region.bbox.lo[a] && samples[s][a] <= region.bbox.hi[a];
            if (!inside) continue;
            // bbox membership is not enough for irregular regions
            std::array<std::int64_t, 3> cc{{0, 0, 0}};
            for (int a = 0; a < d; ++a) {
                std::int64_t c = samples[s][a] / res.partition.grid.cell_size[a];
                cc[a] = std::min(c, res.partition.grid.dims[a] - 1);
            }
            if (res.partition.cell_region[static_cast<std::size_t>(
                    res.partition.grid.cell_index(cc))] != region.id)
                continue;
            ++count;
            for (std::int64_t c = 0; c < C; ++c) {
                const double e =
                    (pred[s * static_cast<std::size_t>(C) + static_cast<std::size_t>(c)] -
                     Y[s * static_cast<std::size_t>(C) + static_cast<std::size_t>(c)]) /
                    gmax;
                acc += e * e;
            }
        }

        RegionReport& rr = res.report.regions[static_cast<std::size_t>(i)];
        rr.id = region.id;
        rr.cells = region.cell_count();
        rr.samples = count;
        rr.energy = region.energy;
        rr.local_mse = acc / static_cast<double>(count * C);
        rr.ridge_used = model.ridge_used;
        rr.residual_rms = model.residual_rms;
        rr.solve_ms = sol_ms[static_cast<std::size_t>(i)];
    });

    {
        const auto t0 = Clock::now();
        res.reconstruction = blend(res.pou, planes, C, threads);
        res.report.blend_ms = ms_since(t0);
    }

    const Metrics mt = metrics_impl(res.reconstruction, signal);
    res.report.psnr_db = mt.psnr_db;
    res.report.per_channel_psnr_db = mt.per_channel_psnr_db;
    res.report.mae = mt.mae;
    res.report.mse = mt.mse;
    res.report.region_count = N;
    for (double v : feat_ms) res.report.features_ms += v;
    for (double v : sol_ms) res.report.solve_ms += v;
    res.report.total_ms = ms_since(t_total);
    return res;
}

SignalTensor reconstruct(const FitResult& r, const std::vector<std::int64_t>& query_shape,
                         int threads) {
    const int d = r.pou.rank;
    if (static_cast<int>(query_shape.size()) != d)
        fail_usage("query shape rank must match the fitted signal");
    for (auto q : query_shape)
        if (q < 1) fail_usage("query axis must be >= 1");

    const std::int64_t C = static_cast<std::int64_t>(r.models.empty() ? 1 : r.models[0].channels);
    SignalTensor out(query_shape, C);
    std::vector<double> den(static_cast<std::size_t>(out.samples()), 0.0);

    // query index q -> source-grid coordinate
    std::array<double, 3> step{{0.0, 0.0, 0.0}};
    std::array<double, 3> base{{0.0, 0.0, 0.0}};
    for (int a = 0; a < d; ++a) {
        const double n = static_cast<double>(r.pou.extent[a]);
        if (query_shape[a] > 1) {
            step[a] = (n - 1.0) / static_cast<double>(query_shape[a] - 1);
            base[a] = 0.0;
        } else {
            step[a] = 0.0;
            base[a] = (n - 1.0) / 2.0;
        }
    }

    struct Contribution {
        Box qbox;  // query-index box
        std::vector<double> num;
        std::vector<double> den;
    };
    std::vector<Contribution> contrib(r.models.size());

    const RffEncoder* enc = r.has_encoder ? &r.encoder : nullptr;
    parallel_for(static_cast<std::int64_t>(r.models.size()), threads, [&](std::int64_t i) {
        const auto& sup = r.pou.supports[static_cast<std::size_t>(i)];
        Contribution& ct = contrib[static_cast<std::size_t>(i)];
        ct.qbox.rank = d;
        for (int a = 0; a < d; ++a) {
            const double lo = static_cast<double>(sup.support_bbox.lo[a]) - 0.5;
            const double hi = static_cast<double>(sup.support_bbox.hi[a]) + 0.5;
            std::int64_t qlo, qhi;
            if (step[a] > 0.0) {
                qlo = static_cast<std::int64_t>(std::ceil(lo / step[a]));
                qhi = static_cast<std::int64_t>(std::floor(hi / step[a]));
            } else {
                qlo = 0;
                qhi = 0;
            }
            ct.qbox.lo[a] = std::max<std::int64_t>(0, qlo);
            ct.qbox.hi[a] = std::min(query_shape[a] - 1, qhi);
            if (ct.qbox.lo[a] > ct.qbox.hi[a]) return;  // no overlap with query grid
        }

        // gather query points with positive window
        std::vector<std::array<std::int64_t, 3>> pts;
        std::vector<double> ws;
        std::array<std::int64_t, 3> qi{};
        for (int a = 0; a < d; ++a) qi[a] = ct.qbox.lo[a];
        for (;;) {
            double x[3];
            for (int a = 0; a < d; ++a) x[a] = base[a] + step[a] * static_cast<double>(qi[a]);
            const double w = r.pou.raw_window_at(static_cast<std::size_t>(i), x);
            if (w > 0.0) {
                pts.push_back(qi);
                ws.push_back(w);
            }
            int a = d - 1;
            for (; a >= 0; --a) {
                if (++qi[a] <= ct.qbox.hi[a]) break;
                qi[a] = ct.qbox.lo[a];
            }
            if (a < 0) break;
        }
        if (pts.empty()) return;

        const LocalModel& model = r.models[static_cast<std::size_t>(i)];
        std::vector<double> coords(pts.size() * static_cast<std::size_t>(d));
        for (std::size_t s = 0; s < pts.size(); ++s) {
            double raw[3];
            for (int a = 0; a < d; ++a) raw[a] = base[a] + step[a] * static_cast<double>(pts[s][a]);
            model.cmap.apply(raw, coords.data() + s * static_cast<std::size_t>(d));
        }
        std::vector<double> pred(pts.size() * static_cast<std::size_t>(C));
        predict_local(model, enc, coords.data(), pts.size(), d, pred.data());

        ct.num.assign(static_cast<std::size_t>(ct.qbox.volume() * C), 0.0);
        ct.den.assign(static_cast<std::size_t>(ct.qbox.volume()), 0.0);
        for (std::size_t s = 0; s < pts.size(); ++s) {
            std::int64_t loc = 0;
            for (int a = 0; a < d; ++a) loc = loc * ct.qbox.extent(a) + (pts[s][a] - ct.qbox.lo[a]);
            ct.den[static_cast<std::size_t>(loc)] = ws[s];
            for (std::int64_t c = 0; c < C; ++c)
                ct.num[static_cast<std::size_t>(loc * C + c)] =
                    ws[s] * pred[s * static_cast<std::size_t>(C) + static_cast<std::size_t>(c)];
        }
    });

    // accumulate in ascending region order for deterministic summation
    for (const auto& ct : contrib) {
        if (ct.den.empty()) continue;
        std::array<std::int64_t, 3> qi{};
        for (int a = 0; a < d; ++a) qi[a] = ct.qbox.lo[a];
        std::int64_t loc = 0;
        for (;;) {
            if (ct.den[static_cast<std::size_t>(loc)] > 0.0) {
                std::int64_t glob = 0;
                for (int a = 0; a < d; ++a) glob = glob * query_shape[a] + qi[a];
                den[static_cast<std::size_t>(glob)] += ct.den[static_cast<std::size_t>(loc)];
                for (std::int64_t c = 0; c < C; ++c)
                    out.values[static_cast<std::size_t>(glob * C + c)] +=
                        ct.num[static_cast<std::size_t>(loc * C + c)];
            }
            ++loc;
            int a = d - 1;
            for (; a >= 0; --a) {
                if (++qi[a] <= ct.qbox.hi[a]) break;
                qi[a] = ct.qbox.lo[a];
            }
            if (a < 0) break;
        }
    }
    for (std::int64_t s = 0; s < out.samples(); ++s) {
        const double dv = den[static_cast<std::size_t>(s)];
        if (!(dv > 0.0)) fail_numeric("reconstruct: query sample not covered by any window");
        for (std::int64_t c = 0; c < C; ++c)
            out.values[static_cast<std::size_t>(s * C + c)] /= dv;
    }
    out.record_range();
    return out;
}

}  // namespace elmfit
