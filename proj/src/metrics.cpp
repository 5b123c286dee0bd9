// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "sfseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace sfseg {

namespace {

constexpr double kRadToDeg = 57.295779513082320876798154814105;

template <typename A, typename B>
double angle_degrees_impl(std::span<const A> a, std::span<const B> b) {
    if (a.size() != b.size())
        throw ShapeError("angle between vectors of different lengths");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = static_cast<double>(a[i]);
        const double y = static_cast<double>(b[i]);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0)
        throw ParameterError("angle is undefined for a zero vector");
    const double c = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
    return std::acos(c) * kRadToDeg;
}

} // namespace

double angle_degrees(std::span<const double> a, std::span<const double> b) {
    return angle_degrees_impl(a, b);
}
double angle_degrees(std::span<const float> a, std::span<const float> b) {
    return angle_degrees_impl(a, b);
}
double angle_degrees(std::span<const float> a, std::span<const double> b) {
    return angle_degrees_impl(a, b);
}
double angle_degrees(const FeatureVolume& a, const FeatureVolume& b) {
    return angle_degrees_impl<float, float>(a.values(), b.values());
}
double angle_degrees(const FeatureVolume& a, std::span<const double> b) {
    return angle_degrees_impl<float, double>(a.values(), b);
}

double jaccard(const BinaryMask& a, const BinaryMask& b) {
    if (!(a.shape == b.shape)) throw ShapeError("jaccard over different grids");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const bool va = a.values[i] != 0;
        const bool vb = b.values[i] != 0;
        inter += (va && vb);
        uni += (va || vb);
    }
    if (uni == 0) return 1.0; // both empty: perfect agreement
    return static_cast<double>(inter) / static_cast<double>(uni);
}

void write_trace_csv(const RunTrace& trace, std::ostream& out) {
    out << "iter,angle_deg,iou\n";
    char buf[64];
    for (const auto& rec : trace.iterations) {
        out << rec.iter << ',';
        if (rec.angle_deg) {
            std::snprintf(buf, sizeof(buf), "%.9g", *rec.angle_deg);
            out << buf;
        } else {
            out << "nan";
        }
        out << ',';
        if (rec.iou) {
            std::snprintf(buf, sizeof(buf), "%.9g", *rec.iou);
            out << buf;
        } else {
            out << "nan";
        }
        out << '\n';
    }
}

void write_trace_csv(const RunTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    write_trace_csv(trace, out);
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace sfseg
