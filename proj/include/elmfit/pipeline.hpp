#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "elmfit/partition.hpp"
#include "elmfit/pou.hpp"
#include "elmfit/solver.hpp"
#include "elmfit/tensor.hpp"

namespace elmfit {

struct MeshSpec {
    enum class Kind { regular, beam_tau, beam_count };
    Kind kind = Kind::regular;
    std::int64_t side = 32;    // regular subdomain side
    std::int64_t atomic = 16;  // beam atomic cell side
    double tau = 0.0;
    std::int64_t target_n = 0;
    std::optional<std::int64_t> temporal_patch;
};

struct FitConfig {
    MeshSpec mesh;
    std::int64_t m = 1024;
    std::int64_t rff_features = 10;  // F
    double sigma_rff = 1.0;
    bool use_rff = true;
    std::optional<double> ridge;      // nullopt = relative floor
    std::int64_t overlap = -1;        // -1 = default (max(2, side/8) regular, 2 beam)
    bool bias_column = true;
    SolverMode solver_mode = SolverMode::automatic;
    std::string window = "raised_cosine";
    std::string rng_algorithm = "splitmix64";
    std::uint64_t global_seed = 0;
    int threads = 0;  // 0 = hardware concurrency

    void validate() const;
    std::int64_t resolve_overlap() const;
    nlohmann::ordered_json to_json() const;
    static FitConfig from_json(const nlohmann::ordered_json& j);
};

struct RegionReport {
    std::int64_t id = 0;
    std::int64_t cells = 0;
    std::int64_t samples = 0;  // undilated region samples
    double energy = 0.0;
    double local_mse = 0.0;  // on normalized values, region samples only
    double ridge_used = 0.0;
    std::vector<double> residual_rms;
    double solve_ms = 0.0;
};

struct FitReport {
    double psnr_db = 0.0;
    std::vector<double> per_channel_psnr_db;
    double mae = 0.0;
    double mse = 0.0;
    std::int64_t region_count = 0;
    std::vector<RegionReport> regions;
    double partition_ms = 0.0, features_ms = 0.0, solve_ms = 0.0, blend_ms = 0.0, total_ms = 0.0;
    FitConfig config;

    nlohmann::ordered_json to_json() const;
    // Deterministic subset: everything except wall-clock timings and the
    // thread count.
    nlohmann::ordered_json metrics_json() const;
};

struct FitResult {
    Partition partition;
    PouField pou;
    bool has_encoder = false;
    RffEncoder encoder;
    std::vector<LocalModel> models;  // aligned with partition.regions
    SignalTensor reconstruction;     // training resolution
    FitReport report;
};

FitResult fit(const SignalTensor& signal, const FitConfig& cfg);

// Samples the blended field on a different grid spanning the same domain
// (sample-center convention: query q maps to q * (n-1) / (Q-1)).
SignalTensor reconstruct(const FitResult& r, const std::vector<std::int64_t>& query_shape,
                         int threads = 0);

// Metrics: pred and gt are both normalized by max(gt); MSE over all
// samples of a channel; PSNR = -10 log10(MSE + 1e-8) per channel, averaged
// across channels.
struct Metrics {
    double psnr_db = 0.0;
    std::vector<double> per_channel_psnr_db;
    double mae = 0.0;
    double mse = 0.0;
};
Metrics compute_metrics(const SignalTensor& pred, const SignalTensor& gt);
double psnr(const SignalTensor& pred, const SignalTensor& gt);
double mae(const SignalTensor& pred, const SignalTensor& gt);
double mse(const SignalTensor& pred, const SignalTensor& gt);

// Spearman rank correlation between per-region energy and per-region local
// error. Degenerate rankings (all tied, or fewer than two regions) report 0.
struct SpearmanResult {
    double rho = 0.0;
    bool degenerate = false;
};
SpearmanResult error_complexity_correlation(const FitReport& report);

}  // namespace elmfit
