// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "sculpt/render/png_io.hpp"

namespace sculpt {

/// Valid-depth range written next to a depth PNG.
struct DepthRange {
    double dmin = 0.0;
    double dmax = 0.0;
};

inline std::filesystem::path depth_meta_path(const std::filesystem::path& png) {
    return std::filesystem::path(png.string() + ".meta");
}

/// 16-bit code of a valid depth: dmin -> 65535, dmax -> 1. 0 is reserved for invalid.
inline std::uint16_t encode_depth(double d, const DepthRange& r) {
    if (!(r.dmax > r.dmin)) return 65535;
    const double t = (r.dmax - d) / (r.dmax - r.dmin);
    return static_cast<std::uint16_t>(std::clamp(std::lround(1.0 + t * 65534.0), 1L, 65535L));
}

inline double decode_depth(std::uint16_t code, const DepthRange& r) {
    return r.dmax - (code - 1.0) / 65534.0 * (r.dmax - r.dmin);
}

inline DepthRange depth_range(const DepthImage& depth) {
    DepthRange r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < depth.size(); ++i)
        if (depth.valid[i]) {
            r.dmin = std::min(r.dmin, depth.depth[i]);
            r.dmax = std::max(r.dmax, depth.depth[i]);
        }
    if (!(r.dmin <= r.dmax)) throw InvalidArgument("depth image has no valid pixels");
    // A spread at rounding level is a constant plane.
    if (r.dmax - r.dmin <= 1e-12 * std::max(1.0, std::abs(r.dmax))) r.dmax = r.dmin;
    return r;
}

/// Near-bright 16-bit gray PNG plus a `<path>.meta` sidecar holding dmin and dmax.
inline void export_depth_png(const DepthImage& depth, const std::filesystem::path& path) {
    const DepthRange r = depth_range(depth);
    PngData d{depth.width, depth.height, 1, 16, std::vector<std::uint16_t>(depth.size(), 0)};
    for (std::size_t i = 0; i < depth.size(); ++i)
        if (depth.valid[i]) d.samples[i] = encode_depth(depth.depth[i], r);
    write_png(path, d);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g\n%.9g\n", r.dmin, r.dmax);
    std::ofstream meta(depth_meta_path(path), std::ios::binary);
    if (!(meta << buf)) throw IoError("cannot write '" + depth_meta_path(path).string() + "'");
}

inline DepthRange read_depth_meta(const std::filesystem::path& png) {
    const auto meta_path = depth_meta_path(png);
    std::ifstream meta(meta_path);
    if (!meta) throw IoError("missing depth sidecar '" + meta_path.string() + "'");
    DepthRange r;
    if (!(meta >> r.dmin >> r.dmax) || !std::isfinite(r.dmin) || !std::isfinite(r.dmax) || r.dmin > r.dmax)
        throw IoError("malformed depth sidecar '" + meta_path.string() + "'");
    return r;
}

inline DepthImage import_depth_png(const std::filesystem::path& path) {
    const PngData d = read_png(path);
    if (d.channels != 1 || d.bit_depth != 16) throw IoError("'" + path.string() + "' is not a 16-bit gray PNG");
    const DepthRange r = read_depth_meta(path);
    DepthImage out(d.width, d.height);
    for (std::size_t i = 0; i < d.samples.size(); ++i)
        if (d.samples[i] != 0) {
            out.depth[i] = decode_depth(d.samples[i], r);
            out.valid[i] = 1;
        }
    return out;
}

} // namespace sculpt
