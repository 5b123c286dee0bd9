// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "sfseg/volume.hpp"
#include "test_util.hpp"

using namespace sfseg;
using sfseg_test::TempDir;

namespace {

FeatureVolume sample_volume() {
    // 2x3x4, values chosen to exercise exact and non-representable fractions
    FeatureVolume v({2, 3, 4}, VolumeRole::generic);
    for (std::size_t i = 0; i < v.size(); ++i)
        v.data()[i] = static_cast<float>(std::sin(0.7 * static_cast<double>(i)) * 0.5 + 0.5);
    v.data()[0] = 0.25f;
    v.data()[1] = 0.0f;
    v.data()[2] = 1.0f;
    v.data()[3] = 1.1754944e-38f; // smallest normal f32
    return v;
}

} // namespace

TEST_CASE("linear voxel order is x fastest, then y, then t") {
    const VolumeShape s{2, 3, 4};
    CHECK(s.voxels() == 24);
    CHECK(s.index(0, 0, 0) == 0);
    CHECK(s.index(0, 0, 1) == 1);
    CHECK(s.index(0, 1, 0) == 4);
    CHECK(s.index(1, 0, 0) == 12);
    CHECK(s.index(1, 2, 3) == 23);
}

TEST_CASE("volume validation catches bad shapes and payloads") {
    CHECK_THROWS_AS(FeatureVolume({0, 3, 4}, VolumeRole::generic), ValidationError);
    CHECK_THROWS_AS(FeatureVolume::from_data({1, 2, 2}, {1.0f, 2.0f, 3.0f}), ShapeError);

    FeatureVolume neg({1, 1, 2}, VolumeRole::generic);
    neg.data()[0] = -0.5f;
    CHECK_NOTHROW(neg.validate()); // pairwise features may be signed
    neg.set_role(VolumeRole::unary);
    CHECK_THROWS_AS(neg.validate(), ValidationError);
    neg.set_role(VolumeRole::solution);
    CHECK_THROWS_AS(neg.validate(), ValidationError);

    FeatureVolume inf({1, 1, 2}, VolumeRole::generic);
    inf.data()[1] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(inf.validate(), ValidationError);
}

TEST_CASE("feature sets require one unary and at least one matching pairwise channel") {
    FeatureSet fs;
    fs.unary = FeatureVolume({2, 3, 3}, VolumeRole::unary, 0.5f);
    CHECK_THROWS_AS(fs.validate(), ValidationError);

    fs.pairwise.emplace_back(VolumeShape{2, 3, 3}, VolumeRole::pairwise, 0.2f);
    CHECK_NOTHROW(fs.validate());

    fs.pairwise.emplace_back(VolumeShape{2, 3, 4}, VolumeRole::pairwise, 0.2f);
    CHECK_THROWS_AS(fs.validate(), ShapeError);
}

TEST_CASE("masks count, convert, and compare") {
    BinaryMask m;
    m.shape = {1, 2, 2};
    m.values = {1, 0, 0, 1};
    CHECK(m.count() == 2);

    const FeatureVolume v = m.to_volume();
    CHECK(v.data()[0] == 1.0f);
    CHECK(v.data()[1] == 0.0f);
    CHECK(mask_from_volume(v, 0.5f) == m);
}

TEST_CASE("mask threshold is strict") {
    FeatureVolume v({1, 1, 3}, VolumeRole::generic);
    v.data()[0] = 0.2f;
    v.data()[1] = 0.5f; // exactly at the threshold: excluded
    v.data()[2] = 0.7f;
    const BinaryMask m = mask_from_volume(v, 0.5f);
    CHECK(m.values == std::vector<std::uint8_t>{0, 0, 1});
}

TEST_CASE("container round-trip is bit-exact and the layout is frozen") {
    TempDir tmp;
    const auto file = tmp.path / "v.sfsv";
    const FeatureVolume v = sample_volume();
    save_volume(v, file);

    // 32-byte header + 4 bytes per voxel
    const auto bytes = sfseg_test::read_bytes(file);
    REQUIRE(bytes.size() == 32 + 24 * 4);

    const std::vector<std::uint8_t> want_prefix = {
        0x53, 0x46, 0x53, 0x56, // magic "SFSV"
        0x01, 0x00, 0x00, 0x00, // version 1
        0x02, 0x00, 0x00, 0x00, // frames
        0x03, 0x00, 0x00, 0x00, // height
        0x04, 0x00, 0x00, 0x00, // width
        0x01, 0x00, 0x00, 0x00, // channels
        0x01,                   // dtype f32
        0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, // reserved
    };
    CHECK(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 32) == want_prefix);

    // first voxel 0.25f, little-endian IEEE-754
    CHECK(bytes[32] == 0x00);
    CHECK(bytes[33] == 0x00);
    CHECK(bytes[34] == 0x80);
    CHECK(bytes[35] == 0x3e);

    const FeatureVolume back = load_volume(file);
    REQUIRE(back.shape() == v.shape());
    for (std::size_t i = 0; i < v.size(); ++i)
        CHECK(std::bit_cast<std::uint32_t>(back.data()[i]) ==
              std::bit_cast<std::uint32_t>(v.data()[i]));
}

TEST_CASE("container loader rejects malformed files with typed errors") {
    TempDir tmp;
    const auto good_file = tmp.path / "good.sfsv";
    save_volume(sample_volume(), good_file);
    const auto good = sfseg_test::read_bytes(good_file);

    const auto patched = [&](std::size_t offset, std::uint8_t value) {
        auto bytes = good;
        bytes[offset] = value;
        const auto f = tmp.path / "patched.sfsv";
        sfseg_test::write_bytes(f, bytes);
        return f;
    };

    CHECK_THROWS_AS(load_volume(tmp.path / "missing.sfsv"), IoError);
    CHECK_THROWS_AS(load_volume(patched(0, 'X')), FormatError);   // magic
    CHECK_THROWS_AS(load_volume(patched(4, 2)), FormatError);     // version
    CHECK_THROWS_AS(load_volume(patched(20, 3)), FormatError);    // channels
    CHECK_THROWS_AS(load_volume(patched(24, 0x02)), FormatError); // dtype
    CHECK_THROWS_AS(load_volume(patched(30, 1)), FormatError);    // reserved

    // truncation, in the header and in the payload
    const auto short_header = tmp.path / "short_header.sfsv";
    sfseg_test::write_bytes(short_header,
                            std::vector<std::uint8_t>(good.begin(), good.begin() + 16));
    CHECK_THROWS_AS(load_volume(short_header), CorruptionError);

    const auto short_payload = tmp.path / "short_payload.sfsv";
    sfseg_test::write_bytes(short_payload,
                            std::vector<std::uint8_t>(good.begin(), good.end() - 2));
    CHECK_THROWS_AS(load_volume(short_payload), CorruptionError);

    // NaN smuggled into the payload: quiet NaN is 0x7fc00000
    auto nan_bytes = good;
    nan_bytes[32] = 0x00;
    nan_bytes[33] = 0x00;
    nan_bytes[34] = 0xc0;
    nan_bytes[35] = 0x7f;
    const auto nan_file = tmp.path / "nan.sfsv";
    sfseg_test::write_bytes(nan_file, nan_bytes);
    CHECK_THROWS_AS(load_volume(nan_file), ValidationError);
}

TEST_CASE("saving never writes a file for an invalid volume") {
    TempDir tmp;
    FeatureVolume v({1, 1, 2}, VolumeRole::unary);
    v.data()[0] = std::numeric_limits<float>::quiet_NaN();
    const auto file = tmp.path / "bad.sfsv";
    CHECK_THROWS_AS(save_volume(v, file), ValidationError);
    CHECK(!std::filesystem::exists(file));
}

TEST_CASE("pgm export and import round-trip within 16-bit quantization") {
    TempDir tmp;
    FeatureVolume v({2, 3, 5}, VolumeRole::generic);
    for (std::size_t i = 0; i < v.size(); ++i)
        v.data()[i] = static_cast<float>(i) / static_cast<float>(v.size() - 1);
    export_pgm_sequence(v, tmp.path / "seq");

    CHECK(std::filesystem::exists(tmp.path / "seq" / "frame_000000.pgm"));
    CHECK(std::filesystem::exists(tmp.path / "seq" / "frame_000001.pgm"));

    const FeatureVolume back = import_pgm_sequence(tmp.path / "seq", VolumeRole::generic);
    REQUIRE(back.shape() == v.shape());
    for (std::size_t i = 0; i < v.size(); ++i)
        CHECK(std::abs(back.data()[i] - v.data()[i]) <= 1.0f / 65535.0f);
    // endpoints survive exactly
    CHECK(back.data()[0] == 0.0f);
    CHECK(back.data()[v.size() - 1] == 1.0f);
}

TEST_CASE("pgm import handles 8-bit frames, comments, and filename order") {
    TempDir tmp;
    const auto dir = tmp.path / "frames";
    std::filesystem::create_directories(dir);

    const auto write_pgm = [&](const char* name, std::uint8_t fill) {
        std::vector<std::uint8_t> bytes;
        const char* header = "P5\n# a comment\n2 2\n255\n";
        for (const char* p = header; *p; ++p) bytes.push_back(static_cast<std::uint8_t>(*p));
        bytes.insert(bytes.end(), {fill, fill, fill, fill});
        sfseg_test::write_bytes(dir / name, bytes);
    };
    // created out of order on purpose; import must sort by filename
    write_pgm("c.pgm", 255);
    write_pgm("a.pgm", 0);
    write_pgm("b.pgm", 128);

    const FeatureVolume v = import_pgm_sequence(dir, VolumeRole::generic);
    REQUIRE(v.shape() == VolumeShape{3, 2, 2});
    CHECK(v.data()[0] == 0.0f);
    CHECK(v.data()[4] == doctest::Approx(128.0 / 255.0).epsilon(1e-6));
    CHECK(v.data()[8] == 1.0f);
}

TEST_CASE("pgm import rejects empty directories and mismatched frames") {
    TempDir tmp;
    const auto dir = tmp.path / "frames";
    std::filesystem::create_directories(dir);
    CHECK_THROWS_AS(import_pgm_sequence(dir, VolumeRole::generic), ShapeError);
    CHECK_THROWS_AS(import_pgm_sequence(tmp.path / "nope", VolumeRole::generic), IoError);

    FeatureVolume a({1, 2, 2}, VolumeRole::generic, 0.5f);
    FeatureVolume b({1, 3, 3}, VolumeRole::generic, 0.5f);
    export_pgm_sequence(a, dir);
    export_pgm_sequence(b, dir / "sub");
    std::filesystem::rename(dir / "sub" / "frame_000000.pgm", dir / "frame_000001.pgm");
    CHECK_THROWS_AS(import_pgm_sequence(dir, VolumeRole::generic), ShapeError);
}

TEST_CASE("pgm export refuses values outside the unit interval") {
    TempDir tmp;
    FeatureVolume v({1, 1, 2}, VolumeRole::generic, 0.5f);
    v.data()[1] = 1.5f;
    CHECK_THROWS_AS(export_pgm_sequence(v, tmp.path / "seq"), ValidationError);
}
