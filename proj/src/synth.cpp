// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "sfseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sfseg/conv3d.hpp"
#include "sfseg/rng.hpp"

namespace sfseg {

namespace {

struct Center {
    double y, x;
};

Center center_at(const SynthSpec& spec, std::uint32_t t) {
    return {spec.center_y + spec.velocity_y * t, spec.center_x + spec.velocity_x * t};
}

bool inside_object(const SynthSpec& spec, const Center& c, std::uint32_t y,
                   std::uint32_t x) {
    const double dy = static_cast<double>(y) - c.y;
    const double dx = static_cast<double>(x) - c.x;
    if (spec.object == ObjectKind::box)
        return std::abs(dy) <= spec.half_size && std::abs(dx) <= spec.half_size;
    return dy * dy + dx * dx <= spec.half_size * spec.half_size;
}

} // namespace

void SynthSpec::validate() const {
    shape.validate();
    if (half_size <= 0.0) throw ValidationError("object half_size must be positive");
    if (noise_level < 0.0 || noise_level > 1.0)
        throw ValidationError("noise_level must lie in [0,1]");
    for (std::uint32_t t = 0; t < shape.frames; ++t) {
        const Center c = center_at(*this, t);
        if (c.y - half_size < 0.0 || c.y + half_size > shape.height - 1 ||
            c.x - half_size < 0.0 || c.x + half_size > shape.width - 1)
            throw ValidationError("object escapes frame bounds at frame " +
                                  std::to_string(t));
    }
}

SynthInstance generate(const SynthSpec& spec) {
    spec.validate();
    const VolumeShape& shape = spec.shape;
    const std::size_t n = shape.voxels();

    // clean object indicator
    BinaryMask gt;
    gt.shape = shape;
    gt.values.assign(n, 0);
    for (std::uint32_t t = 0; t < shape.frames; ++t) {
        const Center c = center_at(spec, t);
        for (std::uint32_t y = 0; y < shape.height; ++y)
            for (std::uint32_t x = 0; x < shape.width; ++x)
                if (inside_object(spec, c, y, x)) gt.values[shape.index(t, y, x)] = 1;
    }

    // unary: ground truth corrupted by the requested noise, one draw per voxel
    // in linear order so the stream layout is part of the format
    FeatureVolume s(shape, VolumeRole::unary);
    Xoshiro256StarStar rng(spec.seed);
    if (spec.noise == NoiseKind::flip) {
        for (std::size_t i = 0; i < n; ++i) {
            const bool flip = rng.next_bernoulli(spec.noise_level);
            const float clean = gt.values[i] ? 1.0f : 0.0f;
            s.data()[i] = flip ? 1.0f - clean : clean;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double noise = spec.noise_level * rng.next_gaussian();
            const double v = static_cast<double>(gt.values[i]) + noise;
            s.data()[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }

    // pairwise: clean rendering with a light spatial blur, so feature
    // similarity carries information the corrupted unary lost
    FeatureVolume f = gt.to_volume();
    f.set_role(VolumeRole::pairwise);
    const SeparableKernel3D blur =
        make_gaussian_kernel({1.0, 0.8, 0.8}, {0, 1, 1});
    f = convolve_separable(f, blur, 1);
    f.set_role(VolumeRole::pairwise);

    SynthInstance inst;
    inst.features.unary = std::move(s);
    inst.features.pairwise.push_back(std::move(f));
    inst.ground_truth = std::move(gt);
    return inst;
}

} // namespace sfseg
