// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "sfseg/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "sfseg/engine.hpp"
#include "sfseg/synth.hpp"

namespace sfseg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// One synthetic instance per size: a clean box covering roughly a third of
/// the frame, drifting one pixel per frame when there is room.
SynthInstance bench_instance(const VolumeShape& shape, std::uint64_t seed) {
    SynthSpec spec;
    spec.shape = shape;
    spec.object = ObjectKind::box;
    spec.half_size = std::max(1.0, std::floor(std::min(shape.height, shape.width) / 5.0));
    spec.center_y = (shape.height - 1) / 2.0;
    spec.center_x = (shape.width - 1) / 2.0;
    const double room =
        (shape.width - 1) / 2.0 - spec.half_size; // frames-1 steps must fit
    spec.velocity_x = (shape.frames > 1 && room >= 1.0)
                          ? std::min(1.0, room / (shape.frames - 1))
                          : 0.0;
    spec.noise = NoiseKind::flip;
    spec.noise_level = 0.0; // clean: all modes must land on the same mask
    spec.seed = seed;
    return generate(spec);
}

SfsegConfig bench_config(int threads) {
    SfsegConfig cfg;
    cfg.alpha = 1.0;
    cfg.p = 0.1;
    cfg.threads = threads;
    return cfg;
}

std::vector<double> flatten(const FeatureVolume& v) {
    return std::vector<double>(v.values().begin(), v.values().end());
}

// Converged solution of each mode, as a unit vector.
std::vector<double> converged_matrix(const SparseAffinity& m, const FeatureVolume& s) {
    return power_iteration(m, flatten(s), 500, 1e-10, 1).eigenvector;
}

std::vector<double> converged_conv(const FeatureSet& features, const SfsegConfig& cfg) {
    FeatureVolume x = features.unary;
    x.set_role(VolumeRole::solution);
    for (int k = 0; k < 500; ++k) {
        auto [xn, norm] = normalize_l2(sfseg_step(x, features, cfg));
        const double delta = angle_degrees(xn, x);
        x = std::move(xn);
        if (delta < 1e-7) break;
    }
    return flatten(x);
}

// Mask agreement at the half-max cut, ignoring voxels whose value sits within
// `band * max` of the cut in either solution. Voxels exactly at a model's
// boundary may legitimately land on different sides; everything else must
// match bit for bit.
bool masks_agree_outside_band(const std::vector<double>& a, const std::vector<double>& b,
                              double band) {
    const double ma = *std::max_element(a.begin(), a.end());
    const double mb = *std::max_element(b.begin(), b.end());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::abs(a[i] - 0.5 * ma) <= band * ma) continue;
        if (std::abs(b[i] - 0.5 * mb) <= band * mb) continue;
        if ((a[i] > 0.5 * ma) != (b[i] > 0.5 * mb)) return false;
    }
    return true;
}

} // namespace

std::vector<BenchRecord> run_scaling_benchmark(const BenchOptions& opts, std::ostream* log) {
    if (opts.iterations < 1) throw ParameterError("bench iterations must be at least 1");
    if (opts.repeats < 1) throw ParameterError("bench repeats must be at least 1");
    if (opts.repeats < 5 && log)
        *log << "warning: repeats=" << opts.repeats
             << " gives unstable medians; 5 or more are recommended\n";

    std::vector<BenchRecord> records;
    const SfsegConfig cfg = bench_config(opts.threads);

    for (const VolumeShape& shape : opts.sizes) {
        const std::size_t nodes = shape.voxels();
        const SynthInstance inst = bench_instance(shape, opts.seed);
        const bool with_matrix = nodes <= opts.oracle_max_nodes;

        if (!with_matrix && log)
            *log << "notice: " << nodes
                 << " nodes exceeds the explicit-matrix cap; timing conv mode only\n";

        if (with_matrix && opts.correctness_gate) {
            const SparseAffinity exact = build_affinity_exact(inst.features, cfg);
            const SparseAffinity taylor = build_affinity_taylor(inst.features, cfg);
            const std::vector<double> x_exact = converged_matrix(exact, inst.features.unary);
            const std::vector<double> x_taylor =
                converged_matrix(taylor, inst.features.unary);
            const std::vector<double> x_conv = converged_conv(inst.features, cfg);

            // conv iterates the linearized operator, so it must reproduce the
            // taylor_pi segmentation up to float-vs-double rounding; the exact
            // model is allowed to differ only for voxels at the mask boundary.
            const bool same_model_ok =
                angle_degrees(x_taylor, x_conv) < 0.01 &&
                masks_agree_outside_band(x_taylor, x_conv, 1e-4);
            const bool cross_model_ok =
                angle_degrees(x_exact, x_taylor) < 0.5 &&
                masks_agree_outside_band(x_exact, x_taylor, 0.01);
            if (!same_model_ok || !cross_model_ok)
                throw ValidationError(
                    "benchmark correctness gate failed: modes disagree on the "
                    "converged segmentation");
            if (log)
                *log << "gate: all modes agree on the converged segmentation at " << nodes
                     << " nodes\n";
        }

        // conv mode: per-iteration = one matrix-free step + renormalization
        {
            std::vector<double> times;
            FeatureVolume x = inst.features.unary;
            x.set_role(VolumeRole::solution);
            for (int r = 0; r < opts.warmup + opts.repeats; ++r) {
                const auto t0 = Clock::now();
                for (int k = 0; k < opts.iterations; ++k)
                    x = normalize_l2(sfseg_step(x, inst.features, cfg)).first;
                const double dt = seconds_since(t0);
                if (r >= opts.warmup) times.push_back(dt / opts.iterations);
            }
            BenchRecord rec;
            rec.mode = "conv";
            rec.shape = shape;
            rec.nodes = nodes;
            rec.build_s = 0.0;
            rec.per_iter_s = median(times);
            rec.total_s = rec.per_iter_s * opts.iterations;
            rec.threads = opts.threads;
            records.push_back(rec);
        }

        if (!with_matrix) continue;

        // explicit-matrix modes: exact and linearized weights share the loop
        for (const bool exact : {true, false}) {
            std::vector<double> build_times, iter_times;
            for (int r = 0; r < opts.warmup + opts.repeats; ++r) {
                const auto tb = Clock::now();
                const SparseAffinity m = exact ? build_affinity_exact(inst.features, cfg)
                                               : build_affinity_taylor(inst.features, cfg);
                const double bt = seconds_since(tb);

                std::vector<double> x = flatten(inst.features.unary);
                {
                    double n0 = 0.0;
                    for (double v : x) n0 += v * v;
                    n0 = std::sqrt(n0);
                    for (auto& v : x) v /= n0;
                }
                const auto ti = Clock::now();
                for (int k = 0; k < opts.iterations; ++k) {
                    std::vector<double> y = matvec(m, x, opts.threads);
                    double ny = 0.0;
                    for (double v : y) ny += v * v;
                    ny = std::sqrt(ny);
                    for (auto& v : y) v /= ny;
                    x = std::move(y);
                }
                const double it = seconds_since(ti);
                if (r >= opts.warmup) {
                    build_times.push_back(bt);
                    iter_times.push_back(it / opts.iterations);
                }
            }
            BenchRecord rec;
            rec.mode = exact ? "exact_pi" : "taylor_pi";
            rec.shape = shape;
            rec.nodes = nodes;
            rec.build_s = median(build_times);
            rec.per_iter_s = median(iter_times);
            rec.total_s = rec.build_s + rec.per_iter_s * opts.iterations;
            rec.threads = opts.threads;
            records.push_back(rec);
        }
    }
    return records;
}

void write_bench_csv(const std::vector<BenchRecord>& records, std::ostream& out) {
    out << "mode,frames,height,width,nodes,build_s,per_iter_s,total_s,threads\n";
    char buf[160];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%s,%u,%u,%u,%zu,%.9g,%.9g,%.9g,%d\n",
                      r.mode.c_str(), r.shape.frames, r.shape.height, r.shape.width,
                      r.nodes, r.build_s, r.per_iter_s, r.total_s, r.threads);
        out << buf;
    }
}

} // namespace sfseg
