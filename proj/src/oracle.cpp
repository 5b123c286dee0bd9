// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "sfseg/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "sfseg/conv3d.hpp"
#include "sfseg/parallel.hpp"

namespace sfseg {

std::size_t node_index(const VolumeShape& shape, std::uint32_t t, std::uint32_t y,
                       std::uint32_t x) {
    return shape.index(t, y, x);
}

SparseAffinity SparseAffinity::from_triplets(
    std::size_t n, std::vector<std::tuple<std::size_t, std::size_t, double>> entries) {
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
        return std::get<1>(a) < std::get<1>(b);
    });
    SparseAffinity m;
    m.n_ = n;
    m.row_ptr_.assign(n + 1, 0);
    m.cols_.reserve(entries.size());
    m.weights_.reserve(entries.size());
    for (const auto& [i, j, w] : entries) {
        if (i >= n || j >= n) throw ParameterError("triplet index out of range");
        m.row_ptr_[i + 1]++;
        m.cols_.push_back(static_cast<std::uint32_t>(j));
        m.weights_.push_back(w);
        if (w < 0.0) m.negative_entries_++;
    }
    for (std::size_t i = 0; i < n; ++i) m.row_ptr_[i + 1] += m.row_ptr_[i];
    return m;
}

double SparseAffinity::weight_at(std::size_t i, std::size_t j) const {
    if (i >= n_ || j >= n_) throw ParameterError("index out of range");
    const auto begin = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
    const auto end = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
    const auto it = std::lower_bound(begin, end, static_cast<std::uint32_t>(j));
    if (it == end || *it != j) return 0.0;
    return weights_[static_cast<std::size_t>(it - cols_.begin())];
}

void SparseAffinity::for_each_entry(
    const std::function<void(std::size_t, std::size_t, double)>& fn) const {
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e)
            fn(i, cols_[e], weights_[e]);
}

// Shared assembly for the exact and linearized builders. `exact` selects the
// exponential pair factor; otherwise the factor is (base - alpha * u) with
// u the summed squared feature difference.
SparseAffinity build_affinity_impl(const FeatureSet& features, const SfsegConfig& cfg,
                                   bool exact, double base) {
    cfg.validate();
    features.validate();
    if (!cfg.allow_negative_affinity) {
        // alpha <= 1 is already enforced; unit-range features complete the
        // argument that no affinity entry can go negative
        for (std::size_t c = 0; c < features.pairwise.size(); ++c)
            for (const float v : features.pairwise[c].values())
                if (v < 0.0f || v > 1.0f)
                    throw ValidationError(
                        "pairwise channel " + std::to_string(c) +
                        " leaves [0,1]; prescale it or enable allow_negative_affinity");
    }
    const VolumeShape shape = features.shape();
    const std::size_t n = shape.voxels();
    if (n > kOracleMaxNodes)
        throw CapacityError("instance too large for the explicit-matrix oracle (" +
                            std::to_string(n) + " nodes, cap " +
                            std::to_string(kOracleMaxNodes) + ")");

    const auto kernel = make_gaussian_kernel(cfg.kernel);
    const int rt = kernel.radii[0], ry = kernel.radii[1], rx = kernel.radii[2];

    // unary factors in double
    std::vector<double> sp(n);
    {
        const float* s = features.unary.data();
        for (std::size_t i = 0; i < n; ++i)
            sp[i] = cfg.p == 0.0 ? 1.0 : std::pow(static_cast<double>(s[i]), cfg.p);
    }

    const std::size_t channels = features.pairwise.size();
    std::vector<const float*> f(channels);
    for (std::size_t c = 0; c < channels; ++c) f[c] = features.pairwise[c].data();

    const auto T = static_cast<int>(shape.frames);
    const auto H = static_cast<int>(shape.height);
    const auto W = static_cast<int>(shape.width);

    SparseAffinity m;
    m.n_ = n;
    m.grid_ = shape;
    m.radii_ = {rt, ry, rx};
    m.row_ptr_.assign(n + 1, 0);

    // pass 1: row sizes are the product of per-axis in-bounds offset counts
    auto axis_count = [](int pos, int len, int r) {
        const int lo = std::max(-r, -pos);
        const int hi = std::min(r, len - 1 - pos);
        return static_cast<std::size_t>(hi - lo + 1);
    };
    {
        std::size_t row = 0;
        for (int t = 0; t < T; ++t) {
            const std::size_t ct = axis_count(t, T, rt);
            for (int y = 0; y < H; ++y) {
                const std::size_t cy = axis_count(y, H, ry);
                for (int x = 0; x < W; ++x, ++row)
                    m.row_ptr_[row + 1] = ct * cy * axis_count(x, W, rx);
            }
        }
        for (std::size_t i = 0; i < n; ++i) m.row_ptr_[i + 1] += m.row_ptr_[i];
    }
    m.cols_.resize(m.row_ptr_[n]);
    m.weights_.resize(m.row_ptr_[n]);

    // pass 2: fill, ascending (dt, dy, dx) which is ascending column order
    std::size_t negatives = 0;
    std::size_t e = 0;
    for (int t = 0; t < T; ++t) {
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const std::size_t i =
                    (static_cast<std::size_t>(t) * static_cast<std::size_t>(H) +
                     static_cast<std::size_t>(y)) *
                        static_cast<std::size_t>(W) +
                    static_cast<std::size_t>(x);
                for (int dt = std::max(-rt, -t); dt <= std::min(rt, T - 1 - t); ++dt) {
                    for (int dy = std::max(-ry, -y); dy <= std::min(ry, H - 1 - y); ++dy) {
                        for (int dx = std::max(-rx, -x); dx <= std::min(rx, W - 1 - x);
                             ++dx) {
                            const std::ptrdiff_t off =
                                (static_cast<std::ptrdiff_t>(dt) * H + dy) * W + dx;
                            const std::size_t j = static_cast<std::size_t>(
                                static_cast<std::ptrdiff_t>(i) + off);
                            double u = 0.0;
                            for (std::size_t c = 0; c < channels; ++c) {
                                const double d = static_cast<double>(f[c][i]) -
                                                 static_cast<double>(f[c][j]);
                                u += d * d;
                            }
                            const double pair_factor =
                                exact ? std::exp(-cfg.alpha * u) : (base - cfg.alpha * u);
                            const double w =
                                sp[i] * sp[j] * pair_factor * kernel.weight(dt, dy, dx);
                            m.cols_[e] = static_cast<std::uint32_t>(j);
                            m.weights_[e] = w;
                            if (w < 0.0) ++negatives;
                            ++e;
                        }
                    }
                }
            }
        }
    }
    m.negative_entries_ = negatives;
    return m;
}

SparseAffinity build_affinity_exact(const FeatureSet& features, const SfsegConfig& cfg) {
    return build_affinity_impl(features, cfg, true, 1.0);
}

SparseAffinity build_affinity_taylor(const FeatureSet& features, const SfsegConfig& cfg) {
    return build_affinity_impl(features, cfg, false, 1.0);
}

SparseAffinity build_affinity_taylor_channel_sum(const FeatureSet& features,
                                                 const SfsegConfig& cfg) {
    return build_affinity_impl(features, cfg, false,
                               static_cast<double>(features.pairwise.size()));
}

std::vector<double> matvec(const SparseAffinity& m, std::span<const double> x,
                           int threads) {
    if (x.size() != m.size()) throw ShapeError("matvec operand length mismatch");
    std::vector<double> y(m.size(), 0.0);
    const auto row_ptr = m.row_offsets();
    const auto cols = m.columns();
    const auto w = m.weights();
    parallel_for(m.size(), threads, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t i = r0; i < r1; ++i) {
            double acc = 0.0; // fixed ascending-column order per row
            for (std::size_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e)
                acc += w[e] * x[cols[e]];
            y[i] = acc;
        }
    });
    return y;
}

namespace {

double vec_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

} // namespace

PowerIterationResult power_iteration(const SparseAffinity& m, std::vector<double> x0,
                                     int max_iters, double tol, int threads) {
    if (x0.size() != m.size()) throw ShapeError("x0 length does not match matrix size");
    if (max_iters < 1) throw ParameterError("max_iters must be at least 1");
    const double n0 = vec_norm(x0);
    if (n0 == 0.0) throw ParameterError("power iteration needs a nonzero start vector");
    for (auto& v : x0) v /= n0;

    PowerIterationResult res;
    std::vector<double> x = std::move(x0);
    for (int k = 1; k <= max_iters; ++k) {
        std::vector<double> y = matvec(m, x, threads);
        const double ny = vec_norm(y);
        if (ny == 0.0)
            throw DegenerateSolutionError("power iteration mapped the iterate to zero");
        double diff_sq = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] /= ny;
            const double d = y[i] - x[i];
            diff_sq += d * d;
        }
        x = std::move(y);
        res.iterations_used = k;
        if (std::sqrt(diff_sq) < tol) break;
    }
    res.eigenvalue = cluster_score(m, x);
    res.eigenvector = std::move(x);
    return res;
}

double cluster_score(const SparseAffinity& m, std::span<const double> x) {
    if (x.size() != m.size()) throw ShapeError("operand length does not match matrix");
    double xx = 0.0;
    for (double v : x) xx += v * v;
    if (xx == 0.0) throw ParameterError("cluster score is undefined for the zero vector");
    const std::vector<double> y = matvec(m, x, 1);
    double xy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) xy += x[i] * y[i];
    return xy / xx;
}

void export_affinity_triples(const SparseAffinity& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    char buf[80];
    m.for_each_entry([&](std::size_t i, std::size_t j, double w) {
        std::snprintf(buf, sizeof(buf), "%zu %zu %.17g\n", i, j, w);
        out << buf;
    });
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace sfseg
