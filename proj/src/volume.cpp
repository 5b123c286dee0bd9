// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "sfseg/volume.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

namespace sfseg {

namespace {

constexpr char kMagic[4] = {'S', 'F', 'S', 'V'};
constexpr std::uint8_t kDtypeF32 = 0x01;

void put_u32_le(std::uint8_t* dst, std::uint32_t v) {
    dst[0] = static_cast<std::uint8_t>(v & 0xff);
    dst[1] = static_cast<std::uint8_t>((v >> 8) & 0xff);
    dst[2] = static_cast<std::uint8_t>((v >> 16) & 0xff);
    dst[3] = static_cast<std::uint8_t>((v >> 24) & 0xff);
}

std::uint32_t get_u32_le(const std::uint8_t* src) {
    return static_cast<std::uint32_t>(src[0]) | (static_cast<std::uint32_t>(src[1]) << 8) |
           (static_cast<std::uint32_t>(src[2]) << 16) |
           (static_cast<std::uint32_t>(src[3]) << 24);
}

std::string path_str(const std::filesystem::path& p) { return p.string(); }

} // namespace

void VolumeShape::validate() const {
    if (frames == 0 || height == 0 || width == 0)
        throw ValidationError("volume shape has an empty axis");
    // guard the product before trusting voxels()
    const std::uint64_t v64 =
        static_cast<std::uint64_t>(frames) * height * static_cast<std::uint64_t>(width);
    if (v64 > std::numeric_limits<std::size_t>::max() / sizeof(float))
        throw ValidationError("volume shape exceeds addressable memory");
}

FeatureVolume::FeatureVolume(VolumeShape shape, VolumeRole role, float fill)
    : shape_(shape), role_(role) {
    shape_.validate();
    data_.assign(shape_.voxels(), fill);
}

FeatureVolume FeatureVolume::from_data(VolumeShape shape, std::vector<float> data,
                                       VolumeRole role) {
    shape.validate();
    if (data.size() != shape.voxels())
        throw ShapeError("payload size does not match volume shape");
    FeatureVolume v;
    v.shape_ = shape;
    v.role_ = role;
    v.data_ = std::move(data);
    return v;
}

void FeatureVolume::validate() const {
    shape_.validate();
    if (data_.size() != shape_.voxels())
        throw ShapeError("payload size does not match volume shape");
    const bool need_nonneg = role_ == VolumeRole::unary || role_ == VolumeRole::solution;
    for (float v : data_) {
        if (!std::isfinite(v)) throw ValidationError("volume contains a non-finite value");
        if (need_nonneg && v < 0.0f)
            throw ValidationError("unary/solution volume contains a negative value");
    }
}

void FeatureSet::validate() const {
    unary.validate();
    if (pairwise.empty())
        throw ValidationError("feature set needs at least one pairwise channel");
    for (const auto& f : pairwise) {
        f.validate();
        if (!(f.shape() == unary.shape()))
            throw ShapeError("pairwise channel shape differs from unary shape");
    }
}

std::size_t BinaryMask::count() const {
    std::size_t c = 0;
    for (auto v : values) c += (v != 0);
    return c;
}

FeatureVolume BinaryMask::to_volume() const {
    FeatureVolume v(shape, VolumeRole::generic);
    for (std::size_t i = 0; i < values.size(); ++i) v.data()[i] = values[i] ? 1.0f : 0.0f;
    return v;
}

BinaryMask mask_from_volume(const FeatureVolume& v, float threshold) {
    BinaryMask m;
    m.shape = v.shape();
    m.values.resize(v.size());
    const float* p = v.data();
    for (std::size_t i = 0; i < v.size(); ++i) m.values[i] = p[i] > threshold ? 1 : 0;
    return m;
}

// --- SFSV container -----------------------------------------------------------

void save_volume(const FeatureVolume& v, const std::filesystem::path& path) {
    v.validate(); // nothing may be written when the payload is bad

    std::uint8_t header[kVolumeHeaderBytes] = {};
    std::memcpy(header, kMagic, 4);
    put_u32_le(header + 4, kVolumeContainerVersion);
    put_u32_le(header + 8, v.shape().frames);
    put_u32_le(header + 12, v.shape().height);
    put_u32_le(header + 16, v.shape().width);
    put_u32_le(header + 20, 1); // channels
    header[24] = kDtypeF32;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path_str(path));
    out.write(reinterpret_cast<const char*>(header), sizeof(header));

    std::vector<std::uint8_t> payload(v.size() * 4);
    for (std::size_t i = 0; i < v.size(); ++i)
        put_u32_le(payload.data() + i * 4, std::bit_cast<std::uint32_t>(v.data()[i]));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("write failed: " + path_str(path));
}

FeatureVolume load_volume(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path_str(path));

    std::uint8_t header[kVolumeHeaderBytes];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(header)))
        throw CorruptionError("file shorter than the container header: " + path_str(path));

    if (std::memcmp(header, kMagic, 4) != 0)
        throw FormatError("bad magic, not a volume container: " + path_str(path));
    if (get_u32_le(header + 4) != kVolumeContainerVersion)
        throw FormatError("unsupported container version in " + path_str(path));

    VolumeShape shape{get_u32_le(header + 8), get_u32_le(header + 12),
                      get_u32_le(header + 16)};
    const std::uint32_t channels = get_u32_le(header + 20);
    if (header[24] != kDtypeF32)
        throw FormatError("unsupported payload dtype in " + path_str(path));
    for (int i = 25; i < 32; ++i)
        if (header[i] != 0) throw FormatError("reserved header bytes set in " + path_str(path));
    if (channels != 1)
        throw FormatError("expected a single-channel container, got " +
                          std::to_string(channels) + " channels in " + path_str(path));
    shape.validate();

    const std::size_t n = shape.voxels();
    std::vector<std::uint8_t> payload(n * 4);
    in.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
    if (in.gcount() != static_cast<std::streamsize>(payload.size()))
        throw CorruptionError("payload truncated in " + path_str(path));

    std::vector<float> data(n);
    for (std::size_t i = 0; i < n; ++i)
        data[i] = std::bit_cast<float>(get_u32_le(payload.data() + i * 4));

    FeatureVolume v = FeatureVolume::from_data(shape, std::move(data));
    for (float x : v.values())
        if (!std::isfinite(x))
            throw ValidationError("non-finite value in payload of " + path_str(path));
    return v;
}

// --- PGM ---------------------------------------------------------------------

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

struct PgmFrame {
    std::uint32_t width = 0, height = 0;
    std::uint32_t maxval = 0;
    std::vector<float> values; // already scaled to [0,1]
};

PgmFrame read_pgm(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + file.string());

    const std::string magic = pgm_token(in);
    if (magic != "P5")
        throw FormatError("not a binary PGM (expected P5): " + file.string());

    PgmFrame frame;
    try {
        frame.width = static_cast<std::uint32_t>(std::stoul(pgm_token(in)));
        frame.height = static_cast<std::uint32_t>(std::stoul(pgm_token(in)));
        frame.maxval = static_cast<std::uint32_t>(std::stoul(pgm_token(in)));
    } catch (const std::exception&) {
        throw FormatError("unparsable PGM header in " + file.string());
    }
    if (frame.width == 0 || frame.height == 0 || frame.maxval == 0 || frame.maxval > 65535)
        throw FormatError("PGM header out of range in " + file.string());

    const std::size_t n = static_cast<std::size_t>(frame.width) * frame.height;
    const bool wide = frame.maxval > 255;
    std::vector<std::uint8_t> raw(n * (wide ? 2 : 1));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw CorruptionError("PGM pixel data truncated in " + file.string());

    frame.values.resize(n);
    const double scale = 1.0 / frame.maxval;
    if (wide) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t u = (static_cast<std::uint32_t>(raw[2 * i]) << 8) | raw[2 * i + 1];
            frame.values[i] = static_cast<float>(u * scale);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i)
            frame.values[i] = static_cast<float>(raw[i] * scale);
    }
    return frame;
}

} // namespace

FeatureVolume import_pgm_sequence(const std::filesystem::path& dir, VolumeRole role) {
    if (!std::filesystem::is_directory(dir))
        throw IoError("not a directory: " + dir.string());

    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pgm")
            files.push_back(entry.path());
    }
    if (files.empty())
        throw ShapeError("no .pgm frames found in " + dir.string());
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.filename() < b.filename(); });

    std::vector<float> data;
    std::uint32_t w = 0, h = 0;
    for (const auto& file : files) {
        PgmFrame frame = read_pgm(file);
        if (w == 0) {
            w = frame.width;
            h = frame.height;
            data.reserve(static_cast<std::size_t>(w) * h * files.size());
        } else if (frame.width != w || frame.height != h) {
            throw ShapeError("frame size mismatch at " + file.string());
        }
        data.insert(data.end(), frame.values.begin(), frame.values.end());
    }

    VolumeShape shape{static_cast<std::uint32_t>(files.size()), h, w};
    return FeatureVolume::from_data(shape, std::move(data), role);
}

void export_pgm_sequence(const FeatureVolume& v, const std::filesystem::path& dir) {
    v.validate();
    for (float x : v.values())
        if (x < 0.0f || x > 1.0f)
            throw ValidationError("values must lie in [0,1] before PGM export");

    std::filesystem::create_directories(dir);
    const auto& s = v.shape();
    const std::size_t frame_px = static_cast<std::size_t>(s.height) * s.width;

    for (std::uint32_t t = 0; t < s.frames; ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%06u.pgm", t);
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + (dir / name).string());
        out << "P5\n" << s.width << " " << s.height << "\n65535\n";
        std::vector<std::uint8_t> raw(frame_px * 2);
        const float* src = v.data() + static_cast<std::size_t>(t) * frame_px;
        for (std::size_t i = 0; i < frame_px; ++i) {
            const auto q = static_cast<std::uint32_t>(std::lround(src[i] * 65535.0));
            raw[2 * i] = static_cast<std::uint8_t>((q >> 8) & 0xff);
            raw[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
        }
        out.write(reinterpret_cast<const char*>(raw.data()),
                  static_cast<std::streamsize>(raw.size()));
        if (!out) throw IoError("write failed: " + (dir / name).string());
    }
}

} // namespace sfseg
