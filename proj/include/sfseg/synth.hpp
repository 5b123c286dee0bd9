// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#pragma once

#include <cstdint>

#include "sfseg/volume.hpp"

namespace sfseg {

enum class ObjectKind : std::uint8_t { box, ball };
enum class NoiseKind : std::uint8_t { flip, gaussian };

/// Parameters of one synthetic instance: a rigid primitive translating with
/// constant velocity over a static background, plus a corruption model.
struct SynthSpec {
    VolumeShape shape{6, 16, 16};

    ObjectKind object = ObjectKind::box;
    double center_y = 8.0; // center at frame 0
    double center_x = 8.0;
    double velocity_y = 0.0; // per-frame displacement
    double velocity_x = 0.0;
    double half_size = 3.0; // box half-extent or ball radius, in voxels

    NoiseKind noise = NoiseKind::flip;
    double noise_level = 0.0;

    std::uint64_t seed = 1;

    /// Object must stay fully inside every frame; throws ValidationError
    /// naming the first frame where it escapes.
    void validate() const;
};

struct SynthInstance {
    FeatureSet features;     // unary S (corrupted) + one pairwise channel F (clean)
    BinaryMask ground_truth; // uncorrupted object indicator
};

/// Builds the instance deterministically from spec.seed:
///   gt = object indicator per frame,
///   S  = gt corrupted by the requested noise,
///   F  = lightly blurred clean rendering of gt (values stay in [0,1]).
SynthInstance generate(const SynthSpec& spec);

} // namespace sfseg
