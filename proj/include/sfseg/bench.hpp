// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "sfseg/oracle.hpp"
#include "sfseg/volume.hpp"

namespace sfseg {

/// Wall-clock comparison of three ways to run the same power iteration:
///   exact_pi  - explicit exact affinity matrix + matvec iterations
///   taylor_pi - explicit linearized affinity matrix + matvec iterations
///   conv      - matrix-free convolutional step (no matrix is ever built)
struct BenchOptions {
    std::vector<VolumeShape> sizes{{10, 10, 10}, {10, 14, 14}, {10, 20, 20}};
    int iterations = 100;
    int warmup = 1;
    int repeats = 5;
    int threads = 1;
    std::uint64_t seed = 42;

    /// Explicit-matrix modes are skipped (with a notice) above this size.
    std::size_t oracle_max_nodes = kOracleMaxNodes;

    /// Before timing, every mode is run to convergence and the segmentations
    /// must agree: conv matches the Taylor matrix up to float rounding, and
    /// the exact model may differ only for voxels at the mask boundary. Set
    /// to false only for instances where the modes disagree by design.
    bool correctness_gate = true;
};

struct BenchRecord {
    std::string mode;
    VolumeShape shape{};
    std::size_t nodes = 0;
    double build_s = 0.0;    // matrix assembly (0 for conv)
    double per_iter_s = 0.0; // median over repeats of (iteration loop / iterations)
    double total_s = 0.0;    // build + iterations
    int threads = 1;
};

/// Runs every mode on every size and returns one record per (size, mode).
/// `log` (optional) receives human-readable notices: skipped modes, gate
/// results, unstable-median warnings when repeats < 5.
std::vector<BenchRecord> run_scaling_benchmark(const BenchOptions& opts,
                                               std::ostream* log = nullptr);

/// CSV with header: mode,frames,height,width,nodes,build_s,per_iter_s,total_s,threads
void write_bench_csv(const std::vector<BenchRecord>& records, std::ostream& out);

} // namespace sfseg
