// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sfseg/errors.hpp"

namespace sfseg {

/// Dimensions of a dense space-time volume: frames x height x width.
struct VolumeShape {
    std::uint32_t frames = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;

    bool operator==(const VolumeShape&) const = default;

    std::size_t voxels() const {
        return static_cast<std::size_t>(frames) * height * width;
    }

    /// Linear index of voxel (t, y, x). This ordering is the one contract
    /// shared between volumes, flattened solution vectors and affinity rows.
    std::size_t index(std::uint32_t t, std::uint32_t y, std::uint32_t x) const {
        return (static_cast<std::size_t>(t) * height + y) * width + x;
    }

    /// Throws ValidationError on empty axes or a voxel count that cannot be addressed.
    void validate() const;
};

/// What a volume holds; unary and solution volumes must be nonnegative.
enum class VolumeRole : std::uint8_t {
    generic = 0,
    unary = 1,    // per-voxel segmentation confidence S
    pairwise = 2, // one feature channel F
    solution = 3, // solution iterate X
};

/// Dense single-channel f32 volume, frame-major then row-major.
/// Treated as immutable once handed to the engine; copies are cheap enough
/// at the scales the oracle permits.
class FeatureVolume {
public:
    FeatureVolume() = default;
    FeatureVolume(VolumeShape shape, VolumeRole role = VolumeRole::generic, float fill = 0.0f);
    static FeatureVolume from_data(VolumeShape shape, std::vector<float> data,
                                   VolumeRole role = VolumeRole::generic);

    const VolumeShape& shape() const { return shape_; }
    VolumeRole role() const { return role_; }
    void set_role(VolumeRole r) { role_ = r; }

    std::size_t size() const { return data_.size(); }

    float& at(std::uint32_t t, std::uint32_t y, std::uint32_t x) {
        return data_[shape_.index(t, y, x)];
    }
    float at(std::uint32_t t, std::uint32_t y, std::uint32_t x) const {
        return data_[shape_.index(t, y, x)];
    }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::span<const float> values() const { return data_; }
    std::span<float> values() { return data_; }

    /// Checks payload-level invariants: all values finite, and nonnegative
    /// when the role demands it.
    void validate() const;

private:
    VolumeShape shape_{};
    VolumeRole role_ = VolumeRole::generic;
    std::vector<float> data_;
};

/// One segmentation problem instance: a unary volume S plus >= 1 pairwise
/// feature channels F_c, all with identical shapes.
struct FeatureSet {
    FeatureVolume unary;
    std::vector<FeatureVolume> pairwise;

    const VolumeShape& shape() const { return unary.shape(); }
    void validate() const;
};

/// Hard segmentation mask over a volume's voxel grid.
struct BinaryMask {
    VolumeShape shape{};
    std::vector<std::uint8_t> values; // 0 or 1, same linear order as FeatureVolume

    bool operator==(const BinaryMask&) const = default;

    std::size_t count() const; // number of set voxels
    FeatureVolume to_volume() const;
};

BinaryMask mask_from_volume(const FeatureVolume& v, float threshold);

// --- binary volume container -------------------------------------------------
//
// Fixed 32-byte header, little-endian:
//   bytes  0-3   magic "SFSV"
//   bytes  4-7   container version, u32, currently 1
//   bytes  8-23  frames, height, width, channels as u32
//   byte   24    payload dtype, 0x01 = float32 little-endian
//   bytes  25-31 reserved, must be zero
// Payload: channels * frames * height * width f32 values, channel-major.

inline constexpr std::size_t kVolumeHeaderBytes = 32;
inline constexpr std::uint32_t kVolumeContainerVersion = 1;

/// Writes a single-channel container. Validates the volume first; nothing is
/// written if validation fails.
void save_volume(const FeatureVolume& v, const std::filesystem::path& path);

/// Reads a single-channel container back. Throws FormatError for bad
/// magic/version/dtype, CorruptionError for truncated payloads and
/// ValidationError for non-finite values.
FeatureVolume load_volume(const std::filesystem::path& path);

// --- PGM interchange ----------------------------------------------------------

/// Loads every *.pgm file in a directory (lexicographic filename order) as the
/// frames of one volume. 8- and 16-bit binary PGM are accepted and scaled to
/// [0,1] by each file's maxval.
FeatureVolume import_pgm_sequence(const std::filesystem::path& dir,
                                  VolumeRole role = VolumeRole::generic);

/// Writes one 16-bit binary PGM per frame (frame_000000.pgm, ...). Values must
/// already be in [0,1]; they are quantized as round(v * 65535).
void export_pgm_sequence(const FeatureVolume& v, const std::filesystem::path& dir);

} // namespace sfseg
