// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace sfseg {

/// Maps a user-facing thread-count request to an actual count.
/// 0 (or negative) means "use hardware parallelism".
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(begin, end) over contiguous chunks of [0, n).
///
/// Every index is processed by exactly one invocation and each chunk is
/// traversed in ascending order, so any per-index computation that does not
/// share accumulators produces bit-identical results for every thread count.
/// Small ranges run inline to avoid paying thread spawn cost per call.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn, std::size_t min_parallel = 4096) {
    if (n == 0) return;
    int t = resolve_threads(threads);
    if (t <= 1 || n < min_parallel) {
        fn(std::size_t{0}, n);
        return;
    }
    std::size_t chunks = static_cast<std::size_t>(t);
    if (chunks > n) chunks = n;
    std::size_t base = n / chunks;
    std::size_t rem = n % chunks;
    std::vector<std::thread> pool;
    pool.reserve(chunks - 1);
    std::size_t begin = 0;
    for (std::size_t c = 0; c < chunks; ++c) {
        std::size_t len = base + (c < rem ? 1 : 0);
        std::size_t end = begin + len;
        if (c + 1 == chunks) {
            fn(begin, end); // run the last chunk on the calling thread
        } else {
            pool.emplace_back([&fn, begin, end] { fn(begin, end); });
        }
        begin = end;
    }
    for (auto& th : pool) th.join();
}

} // namespace sfseg
