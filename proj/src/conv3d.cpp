// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "sfseg/conv3d.hpp"

#include <atomic>
#include <cmath>
#include <cstring>

#include "sfseg/parallel.hpp"

namespace sfseg {

namespace {

std::atomic<std::uint64_t> g_separable_calls{0};

std::vector<double> raw_gaussian_taps(double sigma, int radius) {
    std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int i = -radius; i <= radius; ++i)
        taps[static_cast<std::size_t>(i + radius)] =
            std::exp(-static_cast<double>(i) * static_cast<double>(i) * inv);
    return taps;
}

double tap_sum(const std::vector<double>& taps) {
    double s = 0.0;
    for (double t : taps) s += t;
    return s;
}

} // namespace

SeparableKernel3D make_gaussian_kernel(const std::array<double, 3>& sigmas,
                                       const std::array<int, 3>& radii) {
    for (double s : sigmas)
        if (!(s > 0.0)) throw ParameterError("kernel sigma must be positive");
    for (int r : radii)
        if (r < 0) throw ParameterError("kernel radius must be nonnegative");

    SeparableKernel3D k;
    k.sigmas = sigmas;
    k.radii = radii;
    k.taps_t = raw_gaussian_taps(sigmas[0], radii[0]);
    k.taps_y = raw_gaussian_taps(sigmas[1], radii[1]);
    k.taps_x = raw_gaussian_taps(sigmas[2], radii[2]);

    // Unit total mass for the product kernel, folded into the time taps.
    const double total = tap_sum(k.taps_t) * tap_sum(k.taps_y) * tap_sum(k.taps_x);
    for (double& t : k.taps_t) t /= total;
    return k;
}

SeparableKernel3D make_gaussian_kernel(const KernelConfig& cfg) {
    return make_gaussian_kernel(cfg.sigmas, cfg.radii);
}

std::uint64_t separable_convolution_count() {
    return g_separable_calls.load(std::memory_order_relaxed);
}

namespace {

// Below this voxel count, thread spawn cost dwarfs the convolution itself.
constexpr std::size_t kMinParallelVoxels = 32768;

int effective_threads(std::size_t voxels, int threads) {
    return voxels < kMinParallelVoxels ? 1 : threads;
}

// One 1D pass per axis: zero padding, float accumulation, tap order fixed, so
// every thread count produces the same bits.

void axis_pass_x(const float* src, float* dst, std::uint32_t frames, std::uint32_t height,
                 std::uint32_t width, const std::vector<double>& taps, int radius,
                 int threads) {
    const std::size_t rows = static_cast<std::size_t>(frames) * height;
    std::vector<float> ftaps(taps.size());
    for (std::size_t i = 0; i < taps.size(); ++i) ftaps[i] = static_cast<float>(taps[i]);

    parallel_for(rows, threads, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t r = r0; r < r1; ++r) {
            const float* in = src + r * width;
            float* out = dst + r * width;
            for (std::uint32_t x = 0; x < width; ++x) {
                float acc = 0.0f;
                const int d_lo = -std::min<int>(radius, static_cast<int>(x));
                const int d_hi =
                    std::min<int>(radius, static_cast<int>(width - 1 - x));
                for (int d = d_lo; d <= d_hi; ++d)
                    acc += ftaps[static_cast<std::size_t>(d + radius)] *
                           in[static_cast<std::size_t>(static_cast<int>(x) + d)];
                out[x] = acc;
            }
        }
    }, 1);
}

void axis_pass_y(const float* src, float* dst, std::uint32_t frames, std::uint32_t height,
                 std::uint32_t width, const std::vector<double>& taps, int radius,
                 int threads) {
    std::vector<float> ftaps(taps.size());
    for (std::size_t i = 0; i < taps.size(); ++i) ftaps[i] = static_cast<float>(taps[i]);
    const std::size_t plane = static_cast<std::size_t>(height) * width;

    parallel_for(frames, threads, [&](std::size_t t0, std::size_t t1) {
        for (std::size_t t = t0; t < t1; ++t) {
            const float* in = src + t * plane;
            float* out = dst + t * plane;
            for (std::uint32_t y = 0; y < height; ++y) {
                float* orow = out + static_cast<std::size_t>(y) * width;
                const int d_lo = -std::min<int>(radius, static_cast<int>(y));
                const int d_hi =
                    std::min<int>(radius, static_cast<int>(height - 1 - y));
                bool first = true;
                for (int d = d_lo; d <= d_hi; ++d) {
                    const float w = ftaps[static_cast<std::size_t>(d + radius)];
                    const float* irow =
                        in + static_cast<std::size_t>(static_cast<int>(y) + d) * width;
                    if (first) {
                        for (std::uint32_t x = 0; x < width; ++x) orow[x] = w * irow[x];
                        first = false;
                    } else {
                        for (std::uint32_t x = 0; x < width; ++x) orow[x] += w * irow[x];
                    }
                }
                if (first) std::memset(orow, 0, sizeof(float) * width);
            }
        }
    }, 1);
}

void axis_pass_t(const float* src, float* dst, std::uint32_t frames, std::uint32_t height,
                 std::uint32_t width, const std::vector<double>& taps, int radius,
                 int threads) {
    std::vector<float> ftaps(taps.size());
    for (std::size_t i = 0; i < taps.size(); ++i) ftaps[i] = static_cast<float>(taps[i]);
    const std::size_t plane = static_cast<std::size_t>(height) * width;

    parallel_for(frames, threads, [&](std::size_t t0, std::size_t t1) {
        for (std::size_t t = t0; t < t1; ++t) {
            float* out = dst + t * plane;
            const int d_lo = -std::min<int>(radius, static_cast<int>(t));
            const int d_hi =
                std::min<int>(radius, static_cast<int>(frames - 1 - t));
            bool first = true;
            for (int d = d_lo; d <= d_hi; ++d) {
                const float w = ftaps[static_cast<std::size_t>(d + radius)];
                const float* in =
                    src + static_cast<std::size_t>(static_cast<long>(t) + d) * plane;
                if (first) {
                    for (std::size_t i = 0; i < plane; ++i) out[i] = w * in[i];
                    first = false;
                } else {
                    for (std::size_t i = 0; i < plane; ++i) out[i] += w * in[i];
                }
            }
            if (first) std::memset(out, 0, sizeof(float) * plane);
        }
    }, 1);
}

} // namespace

FeatureVolume convolve_separable(const FeatureVolume& v, const SeparableKernel3D& k,
                                 int threads) {
    g_separable_calls.fetch_add(1, std::memory_order_relaxed);
    const auto& s = v.shape();
    s.validate();

    const int t = effective_threads(s.voxels(), threads);
    FeatureVolume a(s);
    FeatureVolume b(s);
    axis_pass_x(v.data(), a.data(), s.frames, s.height, s.width, k.taps_x, k.radii[2], t);
    axis_pass_y(a.data(), b.data(), s.frames, s.height, s.width, k.taps_y, k.radii[1], t);
    axis_pass_t(b.data(), a.data(), s.frames, s.height, s.width, k.taps_t, k.radii[0], t);
    a.set_role(v.role());
    return a;
}

FeatureVolume convolve_direct(const FeatureVolume& v, const SeparableKernel3D& k,
                              int threads) {
    const auto& s = v.shape();
    s.validate();

    // Materialize the dense weight block once; this is the cost the separable
    // path exists to avoid.
    const int rt = k.radii[0], ry = k.radii[1], rx = k.radii[2];
    const std::size_t wt = k.taps_t.size(), wy = k.taps_y.size(), wx = k.taps_x.size();
    std::vector<double> w(wt * wy * wx);
    for (std::size_t a = 0; a < wt; ++a)
        for (std::size_t b = 0; b < wy; ++b)
            for (std::size_t c = 0; c < wx; ++c)
                w[(a * wy + b) * wx + c] = k.taps_t[a] * k.taps_y[b] * k.taps_x[c];

    FeatureVolume out(s);
    out.set_role(v.role());
    const float* src = v.data();
    float* dst = out.data();
    const std::size_t plane = static_cast<std::size_t>(s.height) * s.width;

    parallel_for(static_cast<std::size_t>(s.frames),
                 effective_threads(s.voxels(), threads),
                 [&](std::size_t t0, std::size_t t1) {
        for (std::size_t t = t0; t < t1; ++t) {
            for (std::uint32_t y = 0; y < s.height; ++y) {
                for (std::uint32_t x = 0; x < s.width; ++x) {
                    double acc = 0.0;
                    for (int dt = -rt; dt <= rt; ++dt) {
                        const long tt = static_cast<long>(t) + dt;
                        if (tt < 0 || tt >= static_cast<long>(s.frames)) continue;
                        for (int dy = -ry; dy <= ry; ++dy) {
                            const long yy = static_cast<long>(y) + dy;
                            if (yy < 0 || yy >= static_cast<long>(s.height)) continue;
                            for (int dx = -rx; dx <= rx; ++dx) {
                                const long xx = static_cast<long>(x) + dx;
                                if (xx < 0 || xx >= static_cast<long>(s.width)) continue;
                                const double wk =
                                    w[((static_cast<std::size_t>(dt + rt)) * wy +
                                       static_cast<std::size_t>(dy + ry)) *
                                          wx +
                                      static_cast<std::size_t>(dx + rx)];
                                acc += wk * src[(static_cast<std::size_t>(tt) * s.height +
                                                 static_cast<std::size_t>(yy)) *
                                                    s.width +
                                                static_cast<std::size_t>(xx)];
                            }
                        }
                    }
                    dst[t * plane + static_cast<std::size_t>(y) * s.width + x] =
                        static_cast<float>(acc);
                }
            }
        }
    }, 1);
    return out;
}

} // namespace sfseg
