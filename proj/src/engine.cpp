// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "sfseg/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <string>

#include "sfseg/parallel.hpp"

namespace sfseg {

void SfsegConfig::validate() const {
    if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
    if (p < 0.0) throw ParameterError("p must be nonnegative");
    if (iterations < 1) throw ParameterError("iterations must be at least 1");
    if (binarize_start < 1) throw ParameterError("binarize_start must be at least 1");
    if (!(sigmoid_slope0 > 0.0)) throw ParameterError("sigmoid_slope0 must be positive");
    if (!(slope_growth >= 1.0)) throw ParameterError("slope_growth must be >= 1");
    if (!(threshold_frac > 0.0 && threshold_frac < 1.0))
        throw ParameterError("threshold_frac must lie in (0,1)");
    if (!(final_threshold > 0.0 && final_threshold < 1.0))
        throw ParameterError("final_threshold must lie in (0,1)");
    for (double s : kernel.sigmas)
        if (!(s > 0.0)) throw ParameterError("kernel sigma must be positive");
    for (int r : kernel.radii)
        if (r < 0) throw ParameterError("kernel radius must be nonnegative");
    if (temporal_window >= 0 && temporal_window < kernel.radii[0])
        throw ParameterError("temporal_window must cover the kernel time radius");
    if (!allow_negative_affinity && alpha > 1.0)
        throw ParameterError(
            "alpha > 1 can produce negative affinities; enable allow_negative_affinity "
            "or reduce alpha");
}

namespace {

constexpr std::size_t kMinParallelVoxels = 32768;

int eff_threads(std::size_t n, int threads) {
    return n < kMinParallelVoxels ? 1 : threads;
}

FeatureVolume pow_volume(const FeatureVolume& s, double p, int threads) {
    FeatureVolume out(s.shape());
    const float* in = s.data();
    float* dst = out.data();
    if (p == 0.0) {
        std::fill(dst, dst + out.size(), 1.0f); // includes 0^0 == 1
        return out;
    }
    if (p == 1.0) {
        std::memcpy(dst, in, sizeof(float) * out.size());
        return out;
    }
    parallel_for(out.size(), eff_threads(out.size(), threads),
                 [&](std::size_t a, std::size_t b) {
                     for (std::size_t i = a; i < b; ++i)
                         dst[i] = static_cast<float>(
                             std::pow(static_cast<double>(in[i]), p));
                 }, 1);
    return out;
}

// Core of Eq-style step with S^p precomputed. Exactly three convolutions.
FeatureVolume step_channel_core(const FeatureVolume& x, const FeatureVolume& sp,
                                const FeatureVolume& f, double alpha,
                                const SeparableKernel3D& kernel, int threads) {
    const std::size_t n = x.size();
    const int t = eff_threads(n, threads);
    const float inv_alpha = static_cast<float>(1.0 / alpha);

    const float* xp = x.data();
    const float* spp = sp.data();
    const float* fp = f.data();

    FeatureVolume spx(x.shape());   // S^p X
    FeatureVolume f_spx(x.shape()); // F S^p X
    FeatureVolume f2spx(x.shape()); // F^2 S^p X
    {
        float* a = spx.data();
        float* b = f_spx.data();
        float* c = f2spx.data();
        parallel_for(n, t, [&](std::size_t i0, std::size_t i1) {
            for (std::size_t i = i0; i < i1; ++i) {
                const float sx = spp[i] * xp[i];
                const float fi = fp[i];
                a[i] = sx;
                b[i] = fi * sx;
                c[i] = fi * fi * sx;
            }
        }, 1);
    }

    const FeatureVolume conv_a = convolve_separable(spx, kernel, threads);
    const FeatureVolume conv_b = convolve_separable(f2spx, kernel, threads);
    const FeatureVolume conv_c = convolve_separable(f_spx, kernel, threads);

    FeatureVolume out(x.shape(), VolumeRole::solution);
    {
        const float* ca = conv_a.data();
        const float* cb = conv_b.data();
        const float* cc = conv_c.data();
        float* dst = out.data();
        parallel_for(n, t, [&](std::size_t i0, std::size_t i1) {
            for (std::size_t i = i0; i < i1; ++i) {
                const float fi = fp[i];
                dst[i] = spp[i] * ((inv_alpha - fi * fi) * ca[i] - cb[i] +
                                   2.0f * fi * cc[i]);
            }
        }, 1);
    }
    return out;
}

void check_same_shape(const FeatureVolume& a, const FeatureVolume& b, const char* what) {
    if (!(a.shape() == b.shape()))
        throw ShapeError(std::string("shape mismatch: ") + what);
}

} // namespace

FeatureVolume sfseg_step_channel(const FeatureVolume& x, const FeatureVolume& s,
                                 const FeatureVolume& f, const SfsegConfig& cfg) {
    cfg.validate();
    check_same_shape(x, s, "solution vs unary");
    check_same_shape(x, f, "solution vs pairwise");
    const auto kernel = make_gaussian_kernel(cfg.kernel);
    const FeatureVolume sp = pow_volume(s, cfg.p, cfg.threads);
    return step_channel_core(x, sp, f, cfg.alpha, kernel, cfg.threads);
}

FeatureVolume sfseg_step(const FeatureVolume& x, const FeatureSet& features,
                         const SfsegConfig& cfg) {
    cfg.validate();
    if (features.pairwise.empty())
        throw ParameterError("sfseg_step needs at least one pairwise channel");
    check_same_shape(x, features.unary, "solution vs unary");
    const auto kernel = make_gaussian_kernel(cfg.kernel);
    const FeatureVolume sp = pow_volume(features.unary, cfg.p, cfg.threads);

    FeatureVolume acc;
    for (const auto& f : features.pairwise) {
        check_same_shape(x, f, "solution vs pairwise");
        FeatureVolume term = step_channel_core(x, sp, f, cfg.alpha, kernel, cfg.threads);
        if (acc.size() == 0) {
            acc = std::move(term);
        } else {
            float* a = acc.data();
            const float* b = term.data();
            parallel_for(acc.size(), eff_threads(acc.size(), cfg.threads),
                         [&](std::size_t i0, std::size_t i1) {
                             for (std::size_t i = i0; i < i1; ++i) a[i] += b[i];
                         }, 1);
        }
    }
    return acc;
}

std::pair<FeatureVolume, double> normalize_l2(const FeatureVolume& x) {
    double sumsq = 0.0; // serial double accumulation: one answer per input
    const float* p = x.data();
    for (std::size_t i = 0; i < x.size(); ++i)
        sumsq += static_cast<double>(p[i]) * static_cast<double>(p[i]);
    const double norm = std::sqrt(sumsq);
    if (norm == 0.0)
        throw DegenerateSolutionError("iterate collapsed to the zero vector");

    FeatureVolume out(x.shape(), x.role());
    const double inv = 1.0 / norm;
    float* dst = out.data();
    for (std::size_t i = 0; i < x.size(); ++i)
        dst[i] = static_cast<float>(static_cast<double>(p[i]) * inv);
    return {std::move(out), norm};
}

FeatureVolume project_binary(const FeatureVolume& x, int iter, const SfsegConfig& cfg) {
    if (iter < cfg.binarize_start) return x;

    const float* p = x.data();
    float maxv = 0.0f;
    for (std::size_t i = 0; i < x.size(); ++i) maxv = std::max(maxv, p[i]);
    const double theta = cfg.threshold_frac * static_cast<double>(maxv);
    const double lambda =
        cfg.sigmoid_slope0 * std::pow(cfg.slope_growth, iter - cfg.binarize_start);

    FeatureVolume out(x.shape(), x.role());
    float* dst = out.data();
    parallel_for(x.size(), eff_threads(x.size(), cfg.threads),
                 [&](std::size_t i0, std::size_t i1) {
                     for (std::size_t i = i0; i < i1; ++i) {
                         const double z = lambda * (static_cast<double>(p[i]) - theta);
                         dst[i] = static_cast<float>(1.0 / (1.0 + std::exp(-z)));
                     }
                 }, 1);
    return out;
}

BinaryMask threshold_final(const FeatureVolume& x, double frac) {
    const float* p = x.data();
    float maxv = 0.0f;
    for (std::size_t i = 0; i < x.size(); ++i) maxv = std::max(maxv, p[i]);
    // all-zero (or all-negative) input has nothing above any positive threshold
    const float cut = static_cast<float>(frac * static_cast<double>(maxv));
    return mask_from_volume(x, cut);
}

namespace {

FeatureVolume slice_frames(const FeatureVolume& v, std::uint32_t t0, std::uint32_t t1) {
    const auto& s = v.shape();
    const std::size_t plane = static_cast<std::size_t>(s.height) * s.width;
    VolumeShape out_shape{t1 - t0 + 1, s.height, s.width};
    FeatureVolume out(out_shape, v.role());
    std::memcpy(out.data(), v.data() + static_cast<std::size_t>(t0) * plane,
                sizeof(float) * out.size());
    return out;
}

void scale_channel_into_unit_range(FeatureVolume& f) {
    float lo = f.data()[0], hi = f.data()[0];
    for (float v : f.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo >= 0.0f && hi <= 1.0f) return; // already safe, leave the bits alone
    float* p = f.data();
    if (hi > lo) {
        const float span = hi - lo;
        for (std::size_t i = 0; i < f.size(); ++i) p[i] = (p[i] - lo) / span;
    } else {
        const float c = std::clamp(lo, 0.0f, 1.0f);
        for (std::size_t i = 0; i < f.size(); ++i) p[i] = c;
    }
}

} // namespace

RunResult run(const FeatureSet& features, const SfsegConfig& cfg, const FeatureVolume* x0,
              const FeatureVolume* reference, const BinaryMask* ground_truth,
              const FrameTransform& transform, const IterationObserver& observer) {
    cfg.validate();
    features.validate();
    const VolumeShape shape = features.shape();

    FeatureSet work = features;
    if (!cfg.allow_negative_affinity) {
        // alpha <= 1 is enforced by cfg.validate(); with channels in [0,1]
        // every pairwise term 1 - alpha (f_i - f_j)^2 stays nonnegative.
        for (auto& f : work.pairwise) scale_channel_into_unit_range(f);
    }

    FeatureVolume x;
    if (x0 != nullptr) {
        if (!(x0->shape() == shape)) throw ShapeError("x0 shape differs from features");
        x = *x0;
        x.set_role(VolumeRole::solution);
        x.validate();
    } else {
        x = work.unary;
        x.set_role(VolumeRole::solution);
    }
    if (reference != nullptr && !(reference->shape() == shape))
        throw ShapeError("reference shape differs from features");
    if (ground_truth != nullptr && !(ground_truth->shape == shape))
        throw ShapeError("ground truth shape differs from features");

    const auto kernel = make_gaussian_kernel(cfg.kernel);
    const int w = cfg.resolved_temporal_window();
    const FeatureVolume sp_full = pow_volume(work.unary, cfg.p, cfg.threads);
    const std::size_t plane = static_cast<std::size_t>(shape.height) * shape.width;

    RunTrace trace;
    trace.iterations.reserve(static_cast<std::size_t>(cfg.iterations));

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        const auto tick = std::chrono::steady_clock::now();

        // Jacobi-style sweep: every frame is recomputed from the previous
        // iterate restricted to its temporal window.
        FeatureVolume x_next(shape, VolumeRole::solution);
        for (std::uint32_t i = 0; i < shape.frames; ++i) {
            const std::uint32_t t0 =
                i >= static_cast<std::uint32_t>(w) ? i - static_cast<std::uint32_t>(w) : 0;
            const std::uint32_t t1 =
                std::min<std::uint32_t>(shape.frames - 1, i + static_cast<std::uint32_t>(w));

            FeatureVolume x_w = slice_frames(x, t0, t1);
            std::vector<FeatureVolume> f_w;
            f_w.reserve(work.pairwise.size());
            for (const auto& f : work.pairwise) f_w.push_back(slice_frames(f, t0, t1));

            FeatureVolume sp_w;
            if (transform) {
                FeatureVolume s_w = slice_frames(work.unary, t0, t1);
                transform(s_w, f_w, x_w, i);
                sp_w = pow_volume(s_w, cfg.p, cfg.threads);
            } else {
                sp_w = slice_frames(sp_full, t0, t1);
            }

            FeatureVolume acc;
            for (const auto& f : f_w) {
                FeatureVolume term =
                    step_channel_core(x_w, sp_w, f, cfg.alpha, kernel, cfg.threads);
                if (acc.size() == 0) {
                    acc = std::move(term);
                } else {
                    float* a = acc.data();
                    const float* b = term.data();
                    for (std::size_t k = 0; k < acc.size(); ++k) a[k] += b[k];
                }
            }
            std::memcpy(x_next.data() + static_cast<std::size_t>(i) * plane,
                        acc.data() + static_cast<std::size_t>(i - t0) * plane,
                        sizeof(float) * plane);
        }

        auto [x_unit, norm] = normalize_l2(x_next);
        x = project_binary(x_unit, iter, cfg);

        IterationRecord rec;
        rec.iter = iter;
        rec.l2_norm_pre_normalize = norm;
        rec.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - tick).count();
        if (reference != nullptr) rec.angle_deg = angle_degrees(x, *reference);
        if (ground_truth != nullptr)
            rec.iou = jaccard(threshold_final(x, cfg.threshold_frac), *ground_truth);
        trace.iterations.push_back(rec);

        if (observer) observer(iter, x);
    }

    RunResult result;
    result.mask = threshold_final(x, cfg.final_threshold);
    result.soft = std::move(x);
    result.trace = std::move(trace);
    return result;
}

} // namespace sfseg
