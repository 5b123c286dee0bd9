// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

// Command-line front end: synthesize instances, run the solver, certify the
// matrix-free step against the explicit-matrix reference, and benchmark.
//
// Exit codes: 0 success, 1 numerical failure (certify FAIL, degenerate
// iterate), 2 usage or validation error.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sfseg/bench.hpp"
#include "sfseg/engine.hpp"
#include "sfseg/parallel.hpp"
#include "sfseg/metrics.hpp"
#include "sfseg/oracle.hpp"
#include "sfseg/rng.hpp"
#include "sfseg/synth.hpp"
#include "sfseg/volume.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitUsage = 2;

std::array<int, 3> parse_triple_int(const std::string& text, const char* what) {
    std::array<int, 3> out{};
    char c1 = 0, c2 = 0;
    std::istringstream in(text);
    if (!(in >> out[0] >> c1 >> out[1] >> c2 >> out[2]) || c1 != ',' || c2 != ',')
        throw sfseg::ParameterError(std::string(what) + " must look like t,y,x");
    return out;
}

std::array<double, 3> parse_triple_double(const std::string& text, const char* what) {
    std::array<double, 3> out{};
    char c1 = 0, c2 = 0;
    std::istringstream in(text);
    if (!(in >> out[0] >> c1 >> out[1] >> c2 >> out[2]) || c1 != ',' || c2 != ',')
        throw sfseg::ParameterError(std::string(what) + " must look like t,y,x");
    return out;
}

std::vector<sfseg::VolumeShape> parse_sizes(const std::string& text) {
    std::vector<sfseg::VolumeShape> sizes;
    std::istringstream list(text);
    std::string item;
    while (std::getline(list, item, ',')) {
        unsigned t = 0, h = 0, w = 0;
        char x1 = 0, x2 = 0;
        std::istringstream in(item);
        if (!(in >> t >> x1 >> h >> x2 >> w) || x1 != 'x' || x2 != 'x')
            throw sfseg::ParameterError("sizes must look like TxHxW[,TxHxW...]");
        sizes.push_back({t, h, w});
    }
    if (sizes.empty()) throw sfseg::ParameterError("no benchmark sizes given");
    return sizes;
}

sfseg::SynthSpec spec_from_json(const json& j) {
    sfseg::SynthSpec spec;
    try {
        spec.shape.frames = j.at("frames").get<std::uint32_t>();
        spec.shape.height = j.at("height").get<std::uint32_t>();
        spec.shape.width = j.at("width").get<std::uint32_t>();

        const json& obj = j.at("object");
        const std::string kind = obj.at("kind").get<std::string>();
        if (kind == "box")
            spec.object = sfseg::ObjectKind::box;
        else if (kind == "ball")
            spec.object = sfseg::ObjectKind::ball;
        else
            throw sfseg::ValidationError("object.kind must be \"box\" or \"ball\"");
        spec.center_y = obj.at("center").at(0).get<double>();
        spec.center_x = obj.at("center").at(1).get<double>();
        if (obj.contains("velocity")) {
            spec.velocity_y = obj.at("velocity").at(0).get<double>();
            spec.velocity_x = obj.at("velocity").at(1).get<double>();
        }
        spec.half_size = obj.at("half_size").get<double>();

        if (j.contains("noise")) {
            const json& noise = j.at("noise");
            const std::string nk = noise.at("kind").get<std::string>();
            if (nk == "flip")
                spec.noise = sfseg::NoiseKind::flip;
            else if (nk == "gaussian")
                spec.noise = sfseg::NoiseKind::gaussian;
            else
                throw sfseg::ValidationError("noise.kind must be \"flip\" or \"gaussian\"");
            spec.noise_level = noise.at("level").get<double>();
        }
        if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw sfseg::ValidationError(std::string("bad instance spec: ") + e.what());
    }
    return spec;
}

json spec_to_json(const sfseg::SynthSpec& spec) {
    json j;
    j["frames"] = spec.shape.frames;
    j["height"] = spec.shape.height;
    j["width"] = spec.shape.width;
    j["object"] = {
        {"kind", spec.object == sfseg::ObjectKind::box ? "box" : "ball"},
        {"center", {spec.center_y, spec.center_x}},
        {"velocity", {spec.velocity_y, spec.velocity_x}},
        {"half_size", spec.half_size},
    };
    j["noise"] = {
        {"kind", spec.noise == sfseg::NoiseKind::flip ? "flip" : "gaussian"},
        {"level", spec.noise_level},
    };
    j["seed"] = spec.seed;
    return j;
}

struct EngineFlags {
    double alpha = 1.0;
    double p = 0.1;
    std::string radii = "1,3,3";
    std::string sigmas = "0.5,1.5,1.5";
    int iters = 5;
    int binarize_start = 3;
    double sigmoid_slope = 10.0;
    double slope_growth = 2.0;
    double threshold_frac = 0.5;
    double final_threshold = 0.5;
    int temporal_window = -1;
    bool allow_negative = false;
    int threads = 0;
};

void add_engine_flags(CLI::App* cmd, EngineFlags& ef, bool with_schedule) {
    cmd->add_option("--alpha", ef.alpha, "feature-distance weight (default 1)");
    cmd->add_option("--p", ef.p, "unary exponent (default 0.1)");
    cmd->add_option("--kernel-radii", ef.radii, "kernel radii t,y,x (default 1,3,3)");
    cmd->add_option("--kernel-sigmas", ef.sigmas,
                    "kernel sigmas t,y,x (default 0.5,1.5,1.5)");
    cmd->add_option("--threads", ef.threads, "worker threads, 0 = hardware");
    if (with_schedule) {
        cmd->add_option("--iters", ef.iters, "solver iterations (default 5)");
        cmd->add_option("--binarize-start", ef.binarize_start,
                        "first iteration with soft binarization; above --iters disables");
        cmd->add_option("--sigmoid-slope", ef.sigmoid_slope, "initial sigmoid slope");
        cmd->add_option("--slope-growth", ef.slope_growth, "slope multiplier per iteration");
        cmd->add_option("--threshold-frac", ef.threshold_frac,
                        "sigmoid midpoint as a fraction of max");
        cmd->add_option("--final-threshold", ef.final_threshold,
                        "final hard-mask threshold as a fraction of max");
        cmd->add_option("--temporal-window", ef.temporal_window,
                        "temporal half-window; -1 = kernel time radius");
        cmd->add_flag("--allow-negative-affinity", ef.allow_negative,
                      "skip the [0,1] feature guard and the alpha <= 1 check");
    }
}

sfseg::SfsegConfig config_from_flags(const EngineFlags& ef) {
    sfseg::SfsegConfig cfg;
    cfg.alpha = ef.alpha;
    cfg.p = ef.p;
    cfg.kernel.radii = parse_triple_int(ef.radii, "--kernel-radii");
    cfg.kernel.sigmas = parse_triple_double(ef.sigmas, "--kernel-sigmas");
    cfg.iterations = ef.iters;
    cfg.binarize_start = ef.binarize_start;
    cfg.sigmoid_slope0 = ef.sigmoid_slope;
    cfg.slope_growth = ef.slope_growth;
    cfg.threshold_frac = ef.threshold_frac;
    cfg.final_threshold = ef.final_threshold;
    cfg.temporal_window = ef.temporal_window;
    cfg.allow_negative_affinity = ef.allow_negative;
    cfg.threads = ef.threads;
    return cfg;
}

sfseg::FeatureSet load_features(const std::string& s_path,
                                const std::vector<std::string>& f_paths) {
    sfseg::FeatureSet features;
    features.unary = sfseg::load_volume(s_path);
    features.unary.set_role(sfseg::VolumeRole::unary);
    for (const auto& fp : f_paths) {
        sfseg::FeatureVolume f = sfseg::load_volume(fp);
        f.set_role(sfseg::VolumeRole::pairwise);
        features.pairwise.push_back(std::move(f));
    }
    features.validate();
    return features;
}

// --- subcommand bodies ---------------------------------------------------------

int cmd_synth(const std::string& spec_path, const std::string& out_dir,
              std::uint64_t seed, bool seed_given) {
    std::ifstream in(spec_path);
    if (!in) throw sfseg::IoError("cannot open spec: " + spec_path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw sfseg::ValidationError(std::string("spec is not valid JSON: ") + e.what());
    }

    sfseg::SynthSpec spec = spec_from_json(j);
    if (seed_given) spec.seed = seed;
    const sfseg::SynthInstance inst = sfseg::generate(spec);

    fs::create_directories(out_dir);
    sfseg::save_volume(inst.features.unary, fs::path(out_dir) / "S.sfsv");
    for (std::size_t c = 0; c < inst.features.pairwise.size(); ++c)
        sfseg::save_volume(inst.features.pairwise[c],
                           fs::path(out_dir) / ("F_" + std::to_string(c) + ".sfsv"));
    sfseg::save_volume(inst.ground_truth.to_volume(), fs::path(out_dir) / "gt.sfsv");

    std::ofstream sidecar(fs::path(out_dir) / "spec.json", std::ios::trunc);
    sidecar << spec_to_json(spec).dump(2) << "\n";
    if (!sidecar) throw sfseg::IoError("cannot write spec sidecar");

    std::cout << "synth: wrote " << inst.features.pairwise.size() + 2 << " volumes ("
              << spec.shape.frames << "x" << spec.shape.height << "x" << spec.shape.width
              << ", " << inst.ground_truth.count() << " object voxels) to " << out_dir
              << "\n";
    return kExitOk;
}

int cmd_run(const std::string& s_path, const std::vector<std::string>& f_paths,
            const std::string& x0_path, const std::string& out_dir,
            const std::string& trace_path, const std::string& gt_path,
            const std::string& ref_path, const EngineFlags& ef) {
    const sfseg::FeatureSet features = load_features(s_path, f_paths);
    const sfseg::SfsegConfig cfg = config_from_flags(ef);

    sfseg::FeatureVolume x0;
    const bool have_x0 = !x0_path.empty();
    if (have_x0) x0 = sfseg::load_volume(x0_path);

    sfseg::FeatureVolume reference;
    const bool have_ref = !ref_path.empty();
    if (have_ref) reference = sfseg::load_volume(ref_path);

    sfseg::BinaryMask gt;
    const bool have_gt = !gt_path.empty();
    if (have_gt) gt = sfseg::mask_from_volume(sfseg::load_volume(gt_path), 0.5f);

    const sfseg::RunResult result =
        sfseg::run(features, cfg, have_x0 ? &x0 : nullptr, have_ref ? &reference : nullptr,
                   have_gt ? &gt : nullptr);

    fs::create_directories(out_dir);
    sfseg::save_volume(result.soft, fs::path(out_dir) / "soft.sfsv");
    sfseg::save_volume(result.mask.to_volume(), fs::path(out_dir) / "mask.sfsv");
    if (!trace_path.empty()) sfseg::write_trace_csv(result.trace, fs::path(trace_path));

    std::cout << "run: " << cfg.iterations << " iterations, final mask "
              << result.mask.count() << " voxels";
    if (have_gt) {
        const double input_iou =
            sfseg::jaccard(sfseg::mask_from_volume(features.unary, 0.5f), gt);
        const double final_iou = sfseg::jaccard(result.mask, gt);
        std::cout << ", input IoU " << input_iou << ", final IoU " << final_iou;
    }
    std::cout << "\n";
    return kExitOk;
}

int cmd_certify(const std::string& s_path, const std::vector<std::string>& f_paths,
                const EngineFlags& ef, double tol, double angle_tol, int power_iters,
                int engine_iters, std::uint64_t seed, double kernel_scale) {
    const sfseg::FeatureSet features = load_features(s_path, f_paths);

    sfseg::SfsegConfig cfg = config_from_flags(ef);
    cfg.allow_negative_affinity = true; // compare on the features exactly as given
    cfg.iterations = 1;
    cfg.binarize_start = 2; // never reached; certification never binarizes
    cfg.validate();

    sfseg::SparseAffinity m = sfseg::build_affinity_taylor_channel_sum(features, cfg);
    if (kernel_scale != 1.0) {
        // deliberate mismatch knob for negative-control tests
        std::vector<std::tuple<std::size_t, std::size_t, double>> triples;
        triples.reserve(m.entry_count());
        m.for_each_entry([&](std::size_t i, std::size_t j, double w) {
            triples.emplace_back(i, j, w * kernel_scale);
        });
        m = sfseg::SparseAffinity::from_triplets(m.size(), std::move(triples));
    }

    // check 1: one matrix-free step against the explicit matrix on random inputs
    sfseg::Xoshiro256StarStar rng(seed);
    double max_diff = 0.0;
    for (int draw = 0; draw < 3; ++draw) {
        sfseg::FeatureVolume x(features.shape(), sfseg::VolumeRole::solution);
        for (auto& v : x.values()) v = static_cast<float>(rng.next_double());
        const sfseg::FeatureVolume stepped = sfseg::sfseg_step(x, features, cfg);

        std::vector<double> flat(x.values().begin(), x.values().end());
        const std::vector<double> mx = sfseg::matvec(m, flat, 1);
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double want = mx[i] / cfg.alpha;
            max_diff = std::max(max_diff,
                                std::abs(static_cast<double>(stepped.data()[i]) - want));
        }
    }
    const bool matvec_ok = max_diff <= tol;
    std::cout << "certify: step vs matrix, max abs diff = " << max_diff << " (tol " << tol
              << "): " << (matvec_ok ? "PASS" : "FAIL") << "\n";

    // check 2: converged direction against the dominant eigenvector
    const sfseg::PowerIterationResult pi = sfseg::power_iteration(
        m, std::vector<double>(m.size(), 1.0), power_iters, 1e-12, 1);

    sfseg::SfsegConfig run_cfg = cfg;
    run_cfg.iterations = engine_iters;
    run_cfg.binarize_start = engine_iters + 1; // pure power iteration
    const sfseg::RunResult res = sfseg::run(features, run_cfg);
    const double angle = sfseg::angle_degrees(res.soft, pi.eigenvector);
    const bool angle_ok = angle < angle_tol;
    std::cout << "certify: eigenvector angle = " << angle << " deg (tol " << angle_tol
              << " deg, eigenvalue " << pi.eigenvalue << "): "
              << (angle_ok ? "PASS" : "FAIL") << "\n";

    if (matvec_ok && angle_ok) {
        std::cout << "certify: PASS\n";
        return kExitOk;
    }
    std::cout << "certify: FAIL\n";
    return kExitNumerical;
}

int cmd_bench(const std::string& sizes, int iters, int repeats, int warmup,
              const std::string& out_path, int threads, std::uint64_t seed,
              std::size_t oracle_max_nodes, bool no_gate) {
    sfseg::BenchOptions opts;
    opts.sizes = parse_sizes(sizes);
    opts.iterations = iters;
    opts.repeats = repeats;
    opts.warmup = warmup;
    opts.threads = threads <= 0 ? sfseg::resolve_threads(0) : threads;
    opts.seed = seed;
    opts.oracle_max_nodes = oracle_max_nodes;
    opts.correctness_gate = !no_gate;

    const std::vector<sfseg::BenchRecord> records =
        sfseg::run_scaling_benchmark(opts, &std::cerr);

    if (out_path.empty()) {
        sfseg::write_bench_csv(records, std::cout);
    } else {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) throw sfseg::IoError("cannot open for writing: " + out_path);
        sfseg::write_bench_csv(records, out);
        std::cout << "bench: wrote " << records.size() << " records to " << out_path
                  << "\n";
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"space-time spectral segmentation via separable convolutions"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic instance");
    std::string synth_spec, synth_out;
    std::uint64_t synth_seed = 0;
    synth->add_option("--spec", synth_spec, "instance spec (JSON)")->required();
    synth->add_option("--out", synth_out, "output directory")->required();
    auto* seed_opt = synth->add_option("--seed", synth_seed, "override the spec's seed");

    // run
    auto* runc = app.add_subcommand("run", "run the solver on stored volumes");
    std::string run_s, run_x0, run_out, run_trace, run_gt, run_ref;
    std::vector<std::string> run_f;
    EngineFlags run_flags;
    runc->add_option("--s", run_s, "unary volume S (SFSV)")->required();
    runc->add_option("--f", run_f, "pairwise feature channel(s), repeatable")->required();
    runc->add_option("--x0", run_x0, "initial solution (defaults to S)");
    runc->add_option("--out", run_out, "output directory")->required();
    runc->add_option("--trace", run_trace, "write per-iteration CSV here");
    runc->add_option("--gt", run_gt, "ground-truth volume for IoU reporting");
    runc->add_option("--reference", run_ref, "reference eigenvector for angle tracing");
    add_engine_flags(runc, run_flags, true);

    // certify
    auto* cert = app.add_subcommand(
        "certify", "check the matrix-free step against the explicit matrix");
    std::string cert_s;
    std::vector<std::string> cert_f;
    EngineFlags cert_flags;
    double cert_tol = 1e-4, cert_angle_tol = 1.0, cert_kernel_scale = 1.0;
    int cert_power_iters = 2000, cert_engine_iters = 200;
    std::uint64_t cert_seed = 11;
    cert->add_option("--s", cert_s, "unary volume S (SFSV)")->required();
    cert->add_option("--f", cert_f, "pairwise feature channel(s), repeatable")->required();
    cert->add_option("--tol", cert_tol, "max abs step-vs-matrix difference");
    cert->add_option("--angle-tol", cert_angle_tol, "max eigenvector angle, degrees");
    cert->add_option("--power-iters", cert_power_iters, "oracle power-iteration cap");
    cert->add_option("--engine-iters", cert_engine_iters, "solver iterations");
    cert->add_option("--seed", cert_seed, "seed for the random probe vectors");
    cert->add_option("--oracle-kernel-scale", cert_kernel_scale,
                     "scale oracle weights (negative-control knob, default 1)");
    add_engine_flags(cert, cert_flags, false);

    // bench
    auto* bench = app.add_subcommand("bench", "wall-clock scaling comparison");
    std::string bench_sizes = "10x10x10,10x14x14,10x20x20", bench_out;
    int bench_iters = 100, bench_repeats = 5, bench_warmup = 1, bench_threads = 0;
    std::uint64_t bench_seed = 42;
    std::size_t bench_cap = sfseg::kOracleMaxNodes;
    bool bench_no_gate = false;
    bench->add_option("--sizes", bench_sizes, "comma list of TxHxW");
    bench->add_option("--iters", bench_iters, "iterations timed per repeat");
    bench->add_option("--repeats", bench_repeats, "timing repeats (median reported)");
    bench->add_option("--warmup", bench_warmup, "untimed warmup repeats");
    bench->add_option("--out", bench_out, "CSV output path (stdout if omitted)");
    bench->add_option("--threads", bench_threads, "worker threads, 0 = hardware");
    bench->add_option("--seed", bench_seed, "instance seed");
    bench->add_option("--oracle-max-nodes", bench_cap,
                      "skip explicit-matrix modes above this node count");
    bench->add_flag("--no-gate", bench_no_gate, "skip the cross-mode correctness gate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (synth->parsed())
            return cmd_synth(synth_spec, synth_out, synth_seed, seed_opt->count() > 0);
        if (runc->parsed())
            return cmd_run(run_s, run_f, run_x0, run_out, run_trace, run_gt, run_ref,
                           run_flags);
        if (cert->parsed())
            return cmd_certify(cert_s, cert_f, cert_flags, cert_tol, cert_angle_tol,
                               cert_power_iters, cert_engine_iters, cert_seed,
                               cert_kernel_scale);
        if (bench->parsed())
            return cmd_bench(bench_sizes, bench_iters, bench_repeats, bench_warmup,
                             bench_out, bench_threads, bench_seed, bench_cap,
                             bench_no_gate);
    } catch (const sfseg::DegenerateSolutionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const sfseg::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
