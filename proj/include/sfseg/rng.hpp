// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#pragma once

#include <cmath>
#include <cstdint>

namespace sfseg {

// Deterministic xoshiro256** generator (public-domain algorithm by Blackman
// and Vigna), seeded through splitmix64. Used instead of std::random so that
// a seed maps to identical streams on every platform and standard library.

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Xoshiro256StarStar {
public:
    explicit Xoshiro256StarStar(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64_next(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) from the top 53 bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// True with probability p; the comparison happens on the integer lattice
    /// so the decision depends only on the stream, not on rounding mode.
    bool next_bernoulli(double p) {
        if (p <= 0.0) { next_u64(); return false; }
        if (p >= 1.0) { next_u64(); return true; }
        const auto threshold = static_cast<std::uint64_t>(p * 0x1.0p53);
        return (next_u64() >> 11) < threshold;
    }

    /// Standard normal via Box-Muller. Always consumes exactly two draws.
    double next_gaussian() {
        double u1 = next_double();
        const double u2 = next_double();
        if (u1 == 0.0) u1 = 0x1.0p-53; // log(0) guard, keeps draw count fixed
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

private:
    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }
    std::uint64_t s_[4]{};
};

} // namespace sfseg
