// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#pragma once

#include <functional>
#include <utility>

#include "sfseg/conv3d.hpp"
#include "sfseg/metrics.hpp"
#include "sfseg/volume.hpp"

namespace sfseg {

/// Solver configuration. Defaults correspond to the unsupervised setting:
/// alpha = 1, p = 0.1, 5 iterations, 3x7x7 kernel support.
struct SfsegConfig {
    double alpha = 1.0; // feature-distance weight in the affinity
    double p = 0.1;     // exponent on the unary term S

    KernelConfig kernel{};

    int iterations = 5;

    /// Temporal half-window for the per-frame update. Negative means "use the
    /// kernel time radius", the smallest window that changes nothing.
    int temporal_window = -1;

    /// First 1-based iteration that applies the soft binarization. A value
    /// above `iterations` disables binarization entirely.
    int binarize_start = 3;
    double sigmoid_slope0 = 10.0; // slope at iteration binarize_start
    double slope_growth = 2.0;    // slope multiplier per later iteration
    double threshold_frac = 0.5;  // theta = threshold_frac * max(X)

    /// Fraction of max used for the final hard mask.
    double final_threshold = 0.5;

    /// Off (default): pairwise channels are forced into [0,1] and alpha must
    /// stay <= 1 so every affinity stays nonnegative. On: features and alpha
    /// pass through untouched and the affinity may go negative.
    bool allow_negative_affinity = false;

    int threads = 0; // 0 = hardware parallelism

    int resolved_temporal_window() const {
        return temporal_window < 0 ? kernel.radii[0] : temporal_window;
    }

    /// Throws ParameterError on out-of-range fields.
    void validate() const;
};

/// One power-iteration step for a single feature channel (no normalization).
/// Spends exactly three separable convolutions:
///   X_crt = S^p (alpha^-1 - F^2) (G * S^p X) - S^p (G * F^2 S^p X)
///           + 2 S^p F (G * F S^p X)
FeatureVolume sfseg_step_channel(const FeatureVolume& x, const FeatureVolume& s,
                                 const FeatureVolume& f, const SfsegConfig& cfg);

/// Multi-channel step: the sum of per-channel steps.
FeatureVolume sfseg_step(const FeatureVolume& x, const FeatureSet& features,
                         const SfsegConfig& cfg);

/// Divides by the L2 norm (double accumulation) and returns {unit volume, norm}.
/// An all-zero input throws DegenerateSolutionError.
std::pair<FeatureVolume, double> normalize_l2(const FeatureVolume& x);

/// Soft binarization schedule. Returns x unchanged while iter < binarize_start;
/// afterwards applies sigmoid(lambda_k (x - theta)) with
/// lambda_k = sigmoid_slope0 * slope_growth^(iter - binarize_start) and
/// theta = threshold_frac * max(x).
FeatureVolume project_binary(const FeatureVolume& x, int iter, const SfsegConfig& cfg);

/// Hard mask {v : x(v) > frac * max(x)}; ties and an all-zero input both
/// resolve to background.
BinaryMask threshold_final(const FeatureVolume& x, double frac);

/// Optional per-frame hook applied to the temporal working slice before the
/// update; receives the slice copies of S, F channels and X plus the global
/// index of the frame being recomputed. Identity when empty.
using FrameTransform = std::function<void(FeatureVolume& s_slice,
                                          std::vector<FeatureVolume>& f_slices,
                                          FeatureVolume& x_slice,
                                          std::uint32_t center_frame)>;

/// Observer invoked with the iterate after each full iteration.
using IterationObserver = std::function<void(int iter, const FeatureVolume& x)>;

struct RunResult {
    FeatureVolume soft; // final iterate
    BinaryMask mask;    // threshold_final(soft, cfg.final_threshold)
    RunTrace trace;
};

/// Full solver: X starts at S (or x0 when given); every iteration recomputes
/// each frame from its temporal window using the previous iterate, then
/// normalizes globally and applies the binarization schedule.
RunResult run(const FeatureSet& features, const SfsegConfig& cfg,
              const FeatureVolume* x0 = nullptr,
              const FeatureVolume* reference = nullptr,
              const BinaryMask* ground_truth = nullptr,
              const FrameTransform& transform = {},
              const IterationObserver& observer = {});

} // namespace sfseg
