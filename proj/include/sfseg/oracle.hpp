// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <tuple>
#include <vector>

#include "sfseg/engine.hpp"
#include "sfseg/volume.hpp"

namespace sfseg {

/// Largest voxel count the explicit-matrix path will materialize.
inline constexpr std::size_t kOracleMaxNodes = 1'000'000;

/// Explicit sparse affinity matrix in CSR form with 64-bit weights.
/// Symmetric by construction; rows follow the volume's linear voxel order and
/// columns within a row are ascending.
class SparseAffinity {
public:
    SparseAffinity() = default;

    /// Test helper: assemble from (i, j, w) triples. The caller is responsible
    /// for supplying a symmetric entry set.
    static SparseAffinity from_triplets(
        std::size_t n, std::vector<std::tuple<std::size_t, std::size_t, double>> entries);

    std::size_t size() const { return n_; }
    std::size_t entry_count() const { return weights_.size(); }

    const VolumeShape& grid() const { return grid_; }
    const std::array<int, 3>& neighborhood_radii() const { return radii_; }

    /// Entries with a strictly negative weight (possible for the linearized
    /// affinity when the feature-distance guard is off).
    std::size_t negative_entry_count() const { return negative_entries_; }

    /// Stored weight at (i, j); 0 when the pair is outside the sparsity set.
    double weight_at(std::size_t i, std::size_t j) const;

    void for_each_entry(
        const std::function<void(std::size_t, std::size_t, double)>& fn) const;

    std::span<const std::size_t> row_offsets() const { return row_ptr_; }
    std::span<const std::uint32_t> columns() const { return cols_; }
    std::span<const double> weights() const { return weights_; }

private:
    friend SparseAffinity build_affinity_impl(const FeatureSet&, const SfsegConfig&, bool,
                                              double);
    std::size_t n_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::uint32_t> cols_;
    std::vector<double> weights_;
    VolumeShape grid_{};
    std::array<int, 3> radii_{0, 0, 0};
    std::size_t negative_entries_ = 0;
};

/// Node id of voxel (t, y, x): identical to VolumeShape::index.
std::size_t node_index(const VolumeShape& shape, std::uint32_t t, std::uint32_t y,
                       std::uint32_t x);

/// Exact affinity:
///   M_ij = s_i^p s_j^p exp(-alpha * sum_c (f_ci - f_cj)^2) * G(j - i)
/// over the neighborhood |dt|<=rt, |dy|<=ry, |dx|<=rx (diagonal included).
/// G uses the same normalized separable kernel weights as the engine.
SparseAffinity build_affinity_exact(const FeatureSet& features, const SfsegConfig& cfg);

/// First-order surrogate: the exponential is replaced by
/// 1 - alpha * sum_c (f_ci - f_cj)^2, which may be negative.
SparseAffinity build_affinity_taylor(const FeatureSet& features, const SfsegConfig& cfg);

/// Sum of single-channel linearized affinities, i.e. the matrix the
/// multi-channel engine step actually applies:
///   M_ij = s_i^p s_j^p (N_c - alpha * sum_c (f_ci - f_cj)^2) * G(j - i).
/// Equals build_affinity_taylor for one channel.
SparseAffinity build_affinity_taylor_channel_sum(const FeatureSet& features,
                                                 const SfsegConfig& cfg);

struct PowerIterationResult {
    std::vector<double> eigenvector; // unit L2 norm
    double eigenvalue = 0.0;         // Rayleigh quotient at the returned vector
    int iterations_used = 0;
};

/// Classical power iteration x <- Mx / ||Mx|| until ||x_{k+1} - x_k|| < tol or
/// max_iters. Entirely double precision; deterministic for any thread count.
PowerIterationResult power_iteration(const SparseAffinity& m, std::vector<double> x0,
                                     int max_iters, double tol, int threads = 1);

/// Rayleigh quotient x^T M x / x^T x.
double cluster_score(const SparseAffinity& m, std::span<const double> x);

/// y = M x, row-parallel with a fixed per-row summation order.
std::vector<double> matvec(const SparseAffinity& m, std::span<const double> x,
                           int threads = 1);

/// Writes one "i j w" line per stored entry with 17 significant digits.
void export_affinity_triples(const SparseAffinity& m, const std::filesystem::path& path);

} // namespace sfseg
