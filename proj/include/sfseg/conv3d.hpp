// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "sfseg/volume.hpp"

namespace sfseg {

/// Per-axis parameters of the separable space-time Gaussian.
struct KernelConfig {
    std::array<int, 3> radii{1, 3, 3};          // t, y, x
    std::array<double, 3> sigmas{0.5, 1.5, 1.5}; // t, y, x
};

/// A 3D Gaussian stored as three 1D tap vectors (outer product structure).
/// The full product kernel sums to exactly one; the normalization constant is
/// folded into taps_t, so taps_y / taps_x keep their raw unit-peak profile.
struct SeparableKernel3D {
    std::vector<double> taps_t;
    std::vector<double> taps_y;
    std::vector<double> taps_x;
    std::array<int, 3> radii{0, 0, 0};
    std::array<double, 3> sigmas{1.0, 1.0, 1.0};

    /// Taps actually stored: (2*rt+1) + (2*ry+1) + (2*rx+1).
    std::size_t tap_count() const {
        return taps_t.size() + taps_y.size() + taps_x.size();
    }

    /// Weights a dense 3D kernel of the same support would materialize.
    std::size_t support_volume() const {
        return taps_t.size() * taps_y.size() * taps_x.size();
    }

    /// Product weight at offset (dt, dy, dx), each in [-radius, radius].
    double weight(int dt, int dy, int dx) const {
        return taps_t[static_cast<std::size_t>(dt + radii[0])] *
               taps_y[static_cast<std::size_t>(dy + radii[1])] *
               taps_x[static_cast<std::size_t>(dx + radii[2])];
    }
};

/// Builds the kernel from per-axis sigmas and radii. sigma_a <= 0 or a
/// negative radius throws ParameterError.
SeparableKernel3D make_gaussian_kernel(const std::array<double, 3>& sigmas,
                                       const std::array<int, 3>& radii);
SeparableKernel3D make_gaussian_kernel(const KernelConfig& cfg);

/// Three sequential 1D passes (x, then y, then t) with zero padding outside
/// the volume. Accumulation is float; per-voxel tap order is fixed, so the
/// result is bit-identical for every thread count.
FeatureVolume convolve_separable(const FeatureVolume& v, const SeparableKernel3D& k,
                                 int threads = 1);

/// Reference path: materializes the full 3D weight block and evaluates the
/// triple sum per voxel with double accumulation. Slow on purpose.
FeatureVolume convolve_direct(const FeatureVolume& v, const SeparableKernel3D& k,
                              int threads = 1);

/// Number of convolve_separable invocations since process start. Lets tests
/// pin down how many convolutions a pipeline step actually spends.
std::uint64_t separable_convolution_count();

} // namespace sfseg
