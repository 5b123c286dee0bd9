// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "sfseg/metrics.hpp"
#include "sfseg/oracle.hpp"
#include "sfseg/rng.hpp"
#include "sfseg/synth.hpp"
#include "test_util.hpp"

using namespace sfseg;
using sfseg_test::TempDir;

namespace {

// 1x2x2 grid, one feature channel taking value 0 on row 0 and 1 on row 1.
// Small enough to enumerate every affinity entry by hand.
FeatureSet quad_features(float s0 = 1.0f, float s1 = 1.0f, float s2 = 1.0f,
                         float s3 = 1.0f) {
    FeatureSet fs;
    fs.unary = FeatureVolume({1, 2, 2}, VolumeRole::unary);
    fs.unary.data()[0] = s0;
    fs.unary.data()[1] = s1;
    fs.unary.data()[2] = s2;
    fs.unary.data()[3] = s3;
    FeatureVolume f({1, 2, 2}, VolumeRole::pairwise);
    f.data()[2] = 1.0f;
    f.data()[3] = 1.0f;
    fs.pairwise.push_back(std::move(f));
    return fs;
}

SfsegConfig quad_config() {
    SfsegConfig cfg;
    cfg.alpha = 1.0;
    cfg.p = 1.0;
    cfg.kernel.radii = {0, 1, 1};
    cfg.kernel.sigmas = {1.0, 1.5, 1.5};
    return cfg;
}

} // namespace

TEST_CASE("node ids follow the linear voxel order") {
    CHECK(node_index({2, 3, 4}, 0, 0, 0) == 0);
    CHECK(node_index({2, 3, 4}, 1, 2, 3) == 23);
    CHECK(node_index({2, 3, 4}, 0, 2, 1) == 9);
}

TEST_CASE("hand-enumerated 2x2 affinity, exact and linearized") {
    const FeatureSet fs = quad_features();
    const SfsegConfig cfg = quad_config();
    const auto k = make_gaussian_kernel(cfg.kernel);

    const SparseAffinity exact = build_affinity_exact(fs, cfg);
    const SparseAffinity taylor = build_affinity_taylor(fs, cfg);

    REQUIRE(exact.size() == 4);
    REQUIRE(exact.entry_count() == 16); // radius 1 reaches every node
    CHECK(exact.grid() == VolumeShape{1, 2, 2});
    CHECK(exact.neighborhood_radii() == std::array<int, 3>{0, 1, 1});

    const auto offsets = exact.row_offsets();
    REQUIRE(offsets.size() == 5);
    CHECK(offsets[0] == 0);
    CHECK(offsets[1] == 4);
    CHECK(offsets[2] == 8);
    CHECK(offsets[3] == 12);
    CHECK(offsets[4] == 16);

    const double e1 = std::exp(-1.0);
    // same-feature pairs carry the bare kernel weight
    CHECK(exact.weight_at(0, 0) == doctest::Approx(k.weight(0, 0, 0)).epsilon(1e-14));
    CHECK(exact.weight_at(0, 1) == doctest::Approx(k.weight(0, 0, 1)).epsilon(1e-14));
    CHECK(exact.weight_at(2, 3) == doctest::Approx(k.weight(0, 0, 1)).epsilon(1e-14));
    // cross pairs pay exp(-1) exactly, or vanish under the linearization
    CHECK(exact.weight_at(0, 2) ==
          doctest::Approx(e1 * k.weight(0, 1, 0)).epsilon(1e-14));
    CHECK(exact.weight_at(0, 3) ==
          doctest::Approx(e1 * k.weight(0, 1, 1)).epsilon(1e-14));
    CHECK(exact.weight_at(1, 2) ==
          doctest::Approx(e1 * k.weight(0, 1, 1)).epsilon(1e-14));
    CHECK(taylor.weight_at(0, 2) == 0.0);
    CHECK(taylor.weight_at(0, 3) == 0.0);
    CHECK(taylor.weight_at(0, 1) == doctest::Approx(k.weight(0, 0, 1)).epsilon(1e-14));

    // symmetry
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(exact.weight_at(i, j) == doctest::Approx(exact.weight_at(j, i)));
            CHECK(taylor.weight_at(i, j) == doctest::Approx(taylor.weight_at(j, i)));
        }

    CHECK(exact.negative_entry_count() == 0);
    CHECK(taylor.negative_entry_count() == 0); // alpha = 1: factor bottoms out at 0
}

TEST_CASE("unary factors enter as s^p on both sides of each entry") {
    SfsegConfig cfg = quad_config();
    cfg.p = 0.5;
    const auto k = make_gaussian_kernel(cfg.kernel);

    // s^0.5 = {0.5, 1, 1, 0.4}; f = 0 everywhere so only s^p and G remain
    FeatureSet fs = quad_features(0.25f, 1.0f, 1.0f, 0.16f);
    fs.pairwise[0] = FeatureVolume({1, 2, 2}, VolumeRole::pairwise, 0.0f);

    const SparseAffinity m = build_affinity_exact(fs, cfg);
    CHECK(m.weight_at(0, 3) == doctest::Approx(0.5 * 0.4 * k.weight(0, 1, 1)).epsilon(2e-7));
    CHECK(m.weight_at(0, 0) == doctest::Approx(0.25 * k.weight(0, 0, 0)).epsilon(2e-7));
    CHECK(m.weight_at(1, 2) == doctest::Approx(k.weight(0, 1, 1)).epsilon(1e-14));

    // p = 0 turns every unary factor into 1, including s = 0
    cfg.p = 0.0;
    FeatureSet zs = quad_features(0.0f, 0.0f, 0.0f, 0.0f);
    zs.pairwise[0] = FeatureVolume({1, 2, 2}, VolumeRole::pairwise, 0.0f);
    const SparseAffinity mz = build_affinity_exact(zs, cfg);
    CHECK(mz.weight_at(0, 3) == doctest::Approx(k.weight(0, 1, 1)).epsilon(1e-14));

    // while p > 0 keeps dead unaries dead
    cfg.p = 0.5;
    const SparseAffinity md = build_affinity_exact(zs, cfg);
    CHECK(md.weight_at(0, 3) == 0.0);
}

TEST_CASE("linearization gap matches the scalar expansion") {
    // alpha (f_i - f_j)^2 = 0.4 * 0.25 = 0.1 on cross pairs
    SfsegConfig cfg = quad_config();
    cfg.alpha = 0.4;
    FeatureSet fs = quad_features();
    fs.pairwise[0].data()[2] = 0.5f;
    fs.pairwise[0].data()[3] = 0.5f;

    const SparseAffinity exact = build_affinity_exact(fs, cfg);
    const SparseAffinity taylor = build_affinity_taylor(fs, cfg);

    const double ratio = 0.9 / std::exp(-0.1);
    CHECK(taylor.weight_at(0, 2) ==
          doctest::Approx(ratio * exact.weight_at(0, 2)).epsilon(1e-9));
    // remainder bound: |exp(-u) - (1 - u)| <= u^2 / 2 for u >= 0
    const double u = 0.1;
    const auto k = make_gaussian_kernel(cfg.kernel);
    const double gap = std::abs(exact.weight_at(0, 2) - taylor.weight_at(0, 2));
    CHECK(gap <= 0.5 * u * u * k.weight(0, 1, 0) + 1e-12);
}

TEST_CASE("negative entries appear exactly when alpha exceeds the guard") {
    SfsegConfig cfg = quad_config();
    cfg.alpha = 1.5;

    const FeatureSet fs = quad_features();
    CHECK_THROWS_AS(build_affinity_taylor(fs, cfg), ParameterError); // guard on

    cfg.allow_negative_affinity = true;
    const SparseAffinity m = build_affinity_taylor(fs, cfg);
    // factor 1 - 1.5 on the 8 cross pairs
    CHECK(m.negative_entry_count() == 8);
    CHECK(m.weight_at(0, 2) < 0.0);

    const SparseAffinity ex = build_affinity_exact(fs, cfg);
    CHECK(ex.negative_entry_count() == 0); // the exponential never goes negative
}

TEST_CASE("guarded builders reject out-of-range pairwise channels") {
    SfsegConfig cfg = quad_config();
    FeatureSet fs = quad_features();
    fs.pairwise[0].data()[0] = -0.25f;
    CHECK_THROWS_AS(build_affinity_taylor(fs, cfg), ValidationError);
    CHECK_THROWS_AS(build_affinity_exact(fs, cfg), ValidationError);

    cfg.allow_negative_affinity = true;
    CHECK_NOTHROW(build_affinity_exact(fs, cfg));
}

TEST_CASE("channel-sum builder equals per-channel sums") {
    SfsegConfig cfg = quad_config();

    // one channel: channel-sum and plain linearization coincide bit for bit
    const FeatureSet one = quad_features();
    const SparseAffinity a = build_affinity_taylor(one, cfg);
    const SparseAffinity b = build_affinity_taylor_channel_sum(one, cfg);
    REQUIRE(a.entry_count() == b.entry_count());
    a.for_each_entry([&](std::size_t i, std::size_t j, double w) {
        CHECK(b.weight_at(i, j) == w);
    });

    // duplicated channel: every entry doubles
    FeatureSet two = one;
    two.pairwise.push_back(two.pairwise[0]);
    const SparseAffinity c = build_affinity_taylor_channel_sum(two, cfg);
    a.for_each_entry([&](std::size_t i, std::size_t j, double w) {
        CHECK(c.weight_at(i, j) == doctest::Approx(2.0 * w).epsilon(1e-14));
    });
}

TEST_CASE("entry count follows the separable in-bounds formula") {
    SynthSpec spec;
    spec.shape = {4, 10, 10};
    spec.center_y = 5.0;
    spec.center_x = 5.0;
    spec.half_size = 2.0;
    const SynthInstance inst = generate(spec);

    SfsegConfig cfg;
    cfg.kernel.radii = {1, 2, 2};
    cfg.kernel.sigmas = {0.5, 1.5, 1.5};
    const SparseAffinity m = build_affinity_exact(inst.features, cfg);

    // per axis: sum_v #valid offsets = L(2r+1) - r(r+1); product over axes
    // t: 4*3 - 2 = 10, y and x: 10*5 - 6 = 44
    CHECK(m.size() == 400);
    CHECK(m.entry_count() == 10 * 44 * 44);

    // columns ascend within each row
    const auto offs = m.row_offsets();
    const auto cols = m.columns();
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t e = offs[i] + 1; e < offs[i + 1]; ++e)
            REQUIRE(cols[e - 1] < cols[e]);
}

TEST_CASE("oracle refuses instances beyond its node cap") {
    FeatureSet fs;
    fs.unary = FeatureVolume({101, 100, 100}, VolumeRole::unary, 0.5f);
    fs.pairwise.emplace_back(VolumeShape{101, 100, 100}, VolumeRole::pairwise, 0.5f);
    SfsegConfig cfg;
    CHECK_THROWS_AS(build_affinity_exact(fs, cfg), CapacityError);
}

TEST_CASE("triplet assembly, matvec, and scores on a known 2x2 matrix") {
    // [[2, 1], [1, 2]]: dominant eigenpair (3, (1,1)/sqrt(2))
    const SparseAffinity m = SparseAffinity::from_triplets(
        2, {{0, 0, 2.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 2.0}});
    CHECK(m.entry_count() == 4);
    CHECK(m.weight_at(0, 1) == 1.0);
    CHECK(m.weight_at(1, 1) == 2.0);

    const std::vector<double> x{1.0, 2.0};
    const std::vector<double> y = matvec(m, x);
    CHECK(y[0] == 4.0);
    CHECK(y[1] == 5.0);

    CHECK(cluster_score(m, std::vector<double>{1.0, 1.0}) == doctest::Approx(3.0));
    CHECK(cluster_score(m, std::vector<double>{1.0, 0.0}) == doctest::Approx(2.0));

    const PowerIterationResult pi =
        power_iteration(m, std::vector<double>{1.0, 0.0}, 200, 1e-13);
    CHECK(pi.eigenvalue == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(pi.eigenvector[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
    CHECK(pi.eigenvector[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
    CHECK(pi.iterations_used <= 200);

    CHECK_THROWS_AS(SparseAffinity::from_triplets(2, {{0, 5, 1.0}}), ParameterError);
    CHECK_THROWS_AS(matvec(m, std::vector<double>{1.0, 2.0, 3.0}), ShapeError);
    CHECK_THROWS_AS(cluster_score(m, std::vector<double>{0.0, 0.0}), ParameterError);
}

TEST_CASE("power iteration validates inputs and detects collapse") {
    const SparseAffinity m = SparseAffinity::from_triplets(2, {});
    CHECK_THROWS_AS(power_iteration(m, std::vector<double>{1.0, 1.0}, 10, 1e-9),
                    DegenerateSolutionError);

    const SparseAffinity id =
        SparseAffinity::from_triplets(2, {{0, 0, 1.0}, {1, 1, 1.0}});
    CHECK_THROWS_AS(power_iteration(id, std::vector<double>{0.0, 0.0}, 10, 1e-9),
                    ParameterError);
    CHECK_THROWS_AS(power_iteration(id, std::vector<double>{1.0, 1.0}, 0, 1e-9),
                    ParameterError);
    CHECK_THROWS_AS(power_iteration(id, std::vector<double>{1.0}, 10, 1e-9), ShapeError);
}

TEST_CASE("dominant eigenvector of a real instance is nonnegative with small residual") {
    SynthSpec spec;
    spec.shape = {3, 8, 8};
    spec.center_y = 4.0;
    spec.center_x = 4.0;
    spec.half_size = 2.0;
    spec.noise = NoiseKind::flip;
    spec.noise_level = 0.2;
    spec.seed = 3;
    const SynthInstance inst = generate(spec);

    SfsegConfig cfg;
    cfg.kernel.radii = {1, 2, 2};
    cfg.kernel.sigmas = {0.5, 1.0, 1.0};
    const SparseAffinity m = build_affinity_exact(inst.features, cfg);

    const PowerIterationResult pi =
        power_iteration(m, std::vector<double>(m.size(), 1.0), 2000, 1e-12);
    CHECK(pi.eigenvalue > 0.0);

    double min_entry = 1.0;
    for (double v : pi.eigenvector) min_entry = std::min(min_entry, v);
    CHECK(min_entry >= -1e-12);

    const std::vector<double> mx = matvec(m, pi.eigenvector);
    double resid = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double d = mx[i] - pi.eigenvalue * pi.eigenvector[i];
        resid += d * d;
    }
    CHECK(std::sqrt(resid) <= 1e-8 * pi.eigenvalue);
}

TEST_CASE("matvec and power iteration are thread-count invariant") {
    SynthSpec spec;
    spec.shape = {3, 10, 10};
    spec.center_y = 5.0;
    spec.center_x = 5.0;
    spec.half_size = 2.0;
    spec.noise_level = 0.1;
    const SynthInstance inst = generate(spec);

    SfsegConfig cfg;
    cfg.kernel.radii = {1, 2, 2};
    const SparseAffinity m = build_affinity_exact(inst.features, cfg);

    Xoshiro256StarStar rng(17);
    std::vector<double> x(m.size());
    for (auto& v : x) v = rng.next_double();

    const std::vector<double> y1 = matvec(m, x, 1);
    const std::vector<double> y4 = matvec(m, x, 4);
    REQUIRE(y1.size() == y4.size());
    for (std::size_t i = 0; i < y1.size(); ++i) REQUIRE(y1[i] == y4[i]);

    const auto p1 = power_iteration(m, x, 50, 0.0, 1);
    const auto p4 = power_iteration(m, x, 50, 0.0, 4);
    CHECK(p1.eigenvalue == p4.eigenvalue);
    for (std::size_t i = 0; i < p1.eigenvector.size(); ++i)
        REQUIRE(p1.eigenvector[i] == p4.eigenvector[i]);
}

TEST_CASE("affinity export writes one parsable line per entry") {
    TempDir tmp;
    const SparseAffinity m = SparseAffinity::from_triplets(
        2, {{0, 0, 0.125}, {0, 1, 1.0 / 3.0}, {1, 0, 1.0 / 3.0}, {1, 1, 0.5}});
    const auto file = tmp.path / "m.txt";
    export_affinity_triples(m, file);

    std::ifstream in(file);
    std::size_t lines = 0;
    std::size_t i = 0, j = 0;
    double w = 0.0;
    std::vector<double> seen;
    while (in >> i >> j >> w) {
        ++lines;
        seen.push_back(w);
    }
    CHECK(lines == m.entry_count());
    // 17 significant digits round-trip doubles exactly
    CHECK(seen[1] == 1.0 / 3.0);
    CHECK(seen[0] == 0.125);
}
