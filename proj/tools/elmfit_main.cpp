// elmfit: fit gridded signals with closed-form local models blended by a
// partition of unity; build adaptive meshes; evaluate and visualize.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "elmfit/pipeline.hpp"
#include "elmfit/tensor.hpp"

namespace fs = std::filesystem;
using elmfit::Error;
using elmfit::FitConfig;
using elmfit::MeshSpec;
using elmfit::SignalTensor;

namespace {

SignalTensor load_input(const std::string& path) {
    if (!fs::exists(path)) elmfit::fail_usage("input not found: " + path);
    const std::string ext = fs::path(path).extension().string();
    if (ext == ".png") return elmfit::load_image(path);
    if (ext == ".etns") return elmfit::load_tensor(path);
    elmfit::fail_usage("unsupported input extension (want .png or .etns): " + path);
}

struct FitFlags {
    std::string config_path;
    std::int64_t side = 32;
    std::int64_t atomic = 16;
    double tau = -1.0;
    std::int64_t target_n = -1;
    std::int64_t temporal_patch = -1;
    std::int64_t m = 1024;
    std::int64_t F = 10;
    double sigma_rff = 1.0;
    bool no_rff = false;
    std::string ridge = "auto";
    std::int64_t overlap = -1;
    bool no_bias = false;
    std::string solver_mode = "auto";
    std::uint64_t seed = 0;
    int threads = 0;
};

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file; flags override its keys");
    cmd->add_option("--side", f.side, "regular mesh subdomain side (samples)")
        ->capture_default_str();
    cmd->add_option("--atomic", f.atomic, "adaptive mesh atomic cell side")->capture_default_str();
    cmd->add_option("--tau", f.tau, "adaptive mesh energy threshold (enables beam-tau mesh)");
    cmd->add_option("--target-n", f.target_n,
                    "adaptive mesh region count (enables beam-count mesh)");
    cmd->add_option("--temporal-patch", f.temporal_patch, "cell length along the time axis");
    cmd->add_option("--m", f.m, "hidden width per region")->capture_default_str();
    cmd->add_option("--F,--rff-f", f.F, "random Fourier feature count")->capture_default_str();
    cmd->add_option("--sigma-rff", f.sigma_rff, "random Fourier frequency scale")
        ->capture_default_str();
    cmd->add_flag("--no-rff", f.no_rff, "feed raw coordinates instead of Fourier features");
    cmd->add_option("--ridge", f.ridge, "ridge value, or 'auto' for the relative floor")
        ->capture_default_str();
    cmd->add_option("--overlap", f.overlap, "overlap margin in samples (-1 = default)")
        ->capture_default_str();
    cmd->add_flag("--no-bias", f.no_bias, "drop the constant bias column");
    cmd->add_option("--solver-mode", f.solver_mode, "auto | normal | orthogonal | svd")
        ->capture_default_str();
    cmd->add_option("--seed", f.seed, "global seed")->capture_default_str();
    cmd->add_option("--threads", f.threads, "worker threads (0 = hardware)")
        ->capture_default_str();
}

FitConfig resolve_config(CLI::App* cmd, const FitFlags& f) {
    FitConfig cfg;
    if (!f.config_path.empty()) {
        std::ifstream is(f.config_path);
        if (!is) elmfit::fail_usage("cannot open config: " + f.config_path);
        nlohmann::ordered_json j;
        try {
            is >> j;
        } catch (const std::exception& e) {
            elmfit::fail_usage(std::string("malformed config JSON: ") + e.what());
        }
        cfg = FitConfig::from_json(j);
    }
    const bool have_tau = cmd->count("--tau") > 0;
    const bool have_n = cmd->count("--target-n") > 0;
    if (have_tau && have_n) elmfit::fail_usage("--tau and --target-n are mutually exclusive");
    if (have_tau) {
        cfg.mesh.kind = MeshSpec::Kind::beam_tau;
        cfg.mesh.tau = f.tau;
    } else if (have_n) {
        cfg.mesh.kind = MeshSpec::Kind::beam_count;
        cfg.mesh.target_n = f.target_n;
    } else if (cmd->count("--side")) {
        cfg.mesh.kind = MeshSpec::Kind::regular;
    }
    if (cmd->count("--side")) cfg.mesh.side = f.side;
    if (cmd->count("--atomic")) cfg.mesh.atomic = f.atomic;
    if (cmd->count("--temporal-patch")) cfg.mesh.temporal_patch = f.temporal_patch;
    if (cmd->count("--m")) cfg.m = f.m;
    if (cmd->count("--F") || cmd->count("--rff-f")) cfg.rff_features = f.F;
    if (cmd->count("--sigma-rff")) cfg.sigma_rff = f.sigma_rff;
    if (cmd->count("--no-rff")) cfg.use_rff = false;
    if (cmd->count("--ridge")) {
        if (f.ridge == "auto") {
            cfg.ridge.reset();
        } else {
            try {
                cfg.ridge = std::stod(f.ridge);
            } catch (const std::exception&) {
                elmfit::fail_usage("--ridge expects a number or 'auto'");
            }
        }
    }
    if (cmd->count("--overlap")) cfg.overlap = f.overlap;
    if (cmd->count("--no-bias")) cfg.bias_column = false;
    if (cmd->count("--solver-mode")) cfg.solver_mode = elmfit::solver_mode_from_string(f.solver_mode);
    if (cmd->count("--seed")) cfg.global_seed = f.seed;
    if (cmd->count("--threads")) cfg.threads = f.threads;
    return cfg;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream os(p, std::ios::binary);
    if (!os) elmfit::fail_io("cannot write " + p.string());
    os << s;
}

int cmd_fit(const std::string& input, const std::string& outdir, CLI::App* cmd,
            const FitFlags& flags) {
    SignalTensor signal = load_input(input);
    FitConfig cfg = resolve_config(cmd, flags);
    fs::create_directories(outdir);

    elmfit::FitResult res = elmfit::fit(signal, cfg);

    write_text(fs::path(outdir) / "report.json", res.report.to_json().dump(2) + "\n");
    elmfit::save_tensor(res.reconstruction, (fs::path(outdir) / "recon.etns").string());
    if (res.reconstruction.rank() == 2 &&
        (res.reconstruction.channels == 1 || res.reconstruction.channels == 3))
        elmfit::save_image(res.reconstruction, (fs::path(outdir) / "recon.png").string());
    elmfit::save_partition(res.partition, (fs::path(outdir) / "partition.txt").string());
    if (signal.rank() == 2 || signal.rank() == 3)
        elmfit::save_image(elmfit::render_partition(res.partition, signal),
                           (fs::path(outdir) / "partition.png").string());

    std::printf("psnr_db %.6f  regions %lld  total_ms %.1f\n", res.report.psnr_db,
                static_cast<long long>(res.report.region_count), res.report.total_ms);
    return 0;
}

int cmd_beam(const std::string& input, const std::string& outdir, CLI::App* cmd,
             std::int64_t atomic, double tau, std::int64_t target_n,
             std::int64_t temporal_patch) {
    SignalTensor signal = load_input(input);
    const bool have_tau = cmd->count("--tau") > 0;
    const bool have_n = cmd->count("--target-n") > 0;
    if (have_tau && have_n) elmfit::fail_usage("--tau and --target-n are mutually exclusive");
    if (!have_tau && !have_n) elmfit::fail_usage("one of --tau or --target-n is required");
    std::optional<std::int64_t> tp;
    if (cmd->count("--temporal-patch")) tp = temporal_patch;

    elmfit::Partition part = have_tau ? elmfit::beam_partition(signal, atomic, tau, tp)
                                      : elmfit::beam_partition_to_count(signal, atomic, target_n, tp);
    fs::create_directories(outdir);
    elmfit::save_partition(part, (fs::path(outdir) / "partition.txt").string());
    elmfit::save_image(elmfit::render_partition(part, signal),
                       (fs::path(outdir) / "partition.png").string());
    std::printf("regions %lld  merges %zu\n", static_cast<long long>(part.region_count()),
                part.merge_log.size());
    return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path) {
    SignalTensor pred = load_input(pred_path);
    SignalTensor gt = load_input(gt_path);
    elmfit::Metrics m = elmfit::compute_metrics(pred, gt);
    nlohmann::ordered_json j;
    j["psnr_db"] = m.psnr_db;
    j["per_channel_psnr_db"] = m.per_channel_psnr_db;
    j["mae"] = m.mae;
    j["mse"] = m.mse;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_render(const std::string& input, const std::string& partition_path,
               const std::string& out) {
    SignalTensor signal = load_input(input);
    if (!fs::exists(partition_path)) elmfit::fail_usage("partition not found: " + partition_path);
    elmfit::Partition part = elmfit::load_partition(partition_path);
    elmfit::save_image(elmfit::render_partition(part, signal), out);
    return 0;
}

struct MeshToken {
    std::string token;
    MeshSpec spec;
};

MeshToken parse_mesh_token(const std::string& tok) {
    MeshToken out;
    out.token = tok;
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos <= tok.size()) {
        const auto next = tok.find(':', pos);
        parts.push_back(tok.substr(pos, next == std::string::npos ? next : next - pos));
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    try {
        if (parts.size() == 2 && parts[0] == "regular") {
            out.spec.kind = MeshSpec::Kind::regular;
            out.spec.side = std::stoll(parts[1]);
            return out;
        }
        if (parts.size() == 3 && parts[0] == "beam") {
            out.spec.kind = MeshSpec::Kind::beam_count;
            out.spec.atomic = std::stoll(parts[1]);
            out.spec.target_n = std::stoll(parts[2]);
            return out;
        }
    } catch (const std::exception&) {
    }
    elmfit::fail_usage("bad mesh token '" + tok + "' (want regular:<side> or beam:<atomic>:<N>)");
}

int cmd_ablate(const std::string& input, const std::vector<std::int64_t>& m_list,
               const std::vector<std::string>& mesh_list, int seeds, CLI::App* cmd,
               const FitFlags& flags, const std::string& out_path) {
    if (m_list.empty()) elmfit::fail_usage("--m-list must not be empty");
    if (mesh_list.empty()) elmfit::fail_usage("--mesh-list must not be empty");
    if (seeds < 1) elmfit::fail_usage("--seeds must be >= 1");
    SignalTensor signal = load_input(input);
    FitConfig base = resolve_config(cmd, flags);

    std::string csv = "m,mesh,N,seed,psnr_db,fit_ms\n";
    for (const auto& tok : mesh_list) {
        MeshToken mesh = parse_mesh_token(tok);
        for (std::int64_t m : m_list) {
            for (int s = 0; s < seeds; ++s) {
                FitConfig cfg = base;
                cfg.mesh = mesh.spec;
                cfg.m = m;
                cfg.global_seed = base.global_seed + static_cast<std::uint64_t>(s);
                elmfit::FitResult res = elmfit::fit(signal, cfg);
                char line[256];
                std::snprintf(line, sizeof(line), "%lld,%s,%lld,%llu,%.6f,%.3f\n",
                              static_cast<long long>(m), mesh.token.c_str(),
                              static_cast<long long>(res.report.region_count),
                              static_cast<unsigned long long>(cfg.global_seed),
                              res.report.psnr_db, res.report.total_ms);
                csv += line;
            }
        }
    }
    if (out_path.empty() || out_path == "-")
        std::cout << csv;
    else
        write_text(out_path, csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"local closed-form signal fitting with adaptive meshes"};
    app.require_subcommand(1);

    std::string input, outdir = ".", gt_path, partition_path, render_out = "partition.png";
    std::string ablate_out;
    FitFlags fit_flags, ablate_flags;
    std::vector<std::int64_t> m_list;
    std::vector<std::string> mesh_list;
    int seeds = 1;
    std::int64_t beam_atomic = 16, beam_target_n = -1, beam_tp = -1;
    double beam_tau = -1.0;

    CLI::App* c_fit = app.add_subcommand("fit", "fit a signal and write the reconstruction");
    c_fit->add_option("input", input, "PNG or ETNS input")->required();
    c_fit->add_option("--out", outdir, "output directory")->capture_default_str();
    add_fit_flags(c_fit, fit_flags);

    CLI::App* c_beam = app.add_subcommand("beam", "build an adaptive partition");
    c_beam->add_option("input", input, "PNG or ETNS input")->required();
    c_beam->add_option("--out", outdir, "output directory")->capture_default_str();
    c_beam->add_option("--atomic", beam_atomic, "atomic cell side")->capture_default_str();
    c_beam->add_option("--tau", beam_tau, "energy threshold");
    c_beam->add_option("--target-n", beam_target_n, "target region count");
    c_beam->add_option("--temporal-patch", beam_tp, "cell length along the time axis");

    CLI::App* c_eval = app.add_subcommand("eval", "compare a prediction against ground truth");
    c_eval->add_option("pred", input, "prediction (PNG or ETNS)")->required();
    c_eval->add_option("gt", gt_path, "ground truth (PNG or ETNS)")->required();

    CLI::App* c_render = app.add_subcommand("render-partition", "draw partition boundaries");
    c_render->add_option("input", input, "PNG or ETNS input")->required();
    c_render->add_option("partition", partition_path, "partition file")->required();
    c_render->add_option("--out", render_out, "output PNG")->capture_default_str();

    CLI::App* c_ablate = app.add_subcommand("ablate", "PSNR sweep over capacity and meshes");
    c_ablate->add_option("input", input, "PNG or ETNS input")->required();
    c_ablate->add_option("--m-list", m_list, "hidden widths")->delimiter(',')->required();
    c_ablate->add_option("--mesh-list", mesh_list, "regular:<side> or beam:<atomic>:<N> tokens")
        ->delimiter(',')
        ->required();
    c_ablate->add_option("--seeds", seeds, "seeds per configuration")->capture_default_str();
    c_ablate->add_option("--out", ablate_out, "CSV path ('-' = stdout)")->capture_default_str();
    add_fit_flags(c_ablate, ablate_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(c_fit)) return cmd_fit(input, outdir, c_fit, fit_flags);
        if (app.got_subcommand(c_beam))
            return cmd_beam(input, outdir, c_beam, beam_atomic, beam_tau, beam_target_n, beam_tp);
        if (app.got_subcommand(c_eval)) return cmd_eval(input, gt_path);
        if (app.got_subcommand(c_render)) return cmd_render(input, partition_path, render_out);
        if (app.got_subcommand(c_ablate))
            return cmd_ablate(input, m_list, mesh_list, seeds, c_ablate, ablate_flags, ablate_out);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.kind() == Error::Kind::numeric ? 3 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 2;
}
