// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "sfseg/volume.hpp"

namespace sfseg {

/// Angle in degrees between two vectors, computed with double accumulation.
/// Throws ParameterError if either vector is zero, ShapeError on length mismatch.
double angle_degrees(std::span<const double> a, std::span<const double> b);
double angle_degrees(std::span<const float> a, std::span<const float> b);
double angle_degrees(std::span<const float> a, std::span<const double> b);
double angle_degrees(const FeatureVolume& a, const FeatureVolume& b);
double angle_degrees(const FeatureVolume& a, std::span<const double> b);

/// Intersection-over-union of two masks on the same grid.
/// Both masks empty counts as perfect agreement (1.0).
double jaccard(const BinaryMask& a, const BinaryMask& b);

/// Scalars recorded for one solver iteration.
struct IterationRecord {
    int iter = 0;                       // 1-based
    double l2_norm_pre_normalize = 0.0; // ||X_crt|| before renormalization
    std::optional<double> angle_deg;    // vs the reference eigenvector, if given
    std::optional<double> iou;          // vs ground truth, if given
    double wall_time_s = 0.0;
};

struct RunTrace {
    std::vector<IterationRecord> iterations;
};

/// Writes the convergence trace as CSV with header "iter,angle_deg,iou",
/// one row per iteration, 9 significant digits. Missing values are "nan".
void write_trace_csv(const RunTrace& trace, std::ostream& out);
void write_trace_csv(const RunTrace& trace, const std::filesystem::path& path);

} // namespace sfseg
