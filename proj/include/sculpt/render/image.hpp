// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sculpt/core/error.hpp"

namespace sculpt {

/// 8-bit RGB, row-major, top row first.
struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // 3 bytes per pixel

    RasterImage() = default;
    RasterImage(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t* pixel(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* pixel(int x, int y) const { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    bool operator==(const RasterImage&) const = default;
};

/// Camera-space depth along the view axis. Invalid pixels hold 0.
struct DepthImage {
    int width = 0;
    int height = 0;
    std::vector<double> depth;
    std::vector<std::uint8_t> valid;

    DepthImage() = default;
    DepthImage(int w, int h)
        : width(w), height(h), depth(static_cast<std::size_t>(w) * h, 0.0), valid(static_cast<std::size_t>(w) * h, 0) {}

    std::size_t size() const { return depth.size(); }
    double at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
    bool is_valid(int x, int y) const { return valid[static_cast<std::size_t>(y) * width + x] != 0; }
    bool operator==(const DepthImage&) const = default;
};

/// Per-pixel foreground coverage in {0, 1}.
struct MaskImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    MaskImage() = default;
    MaskImage(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

    std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
    bool operator==(const MaskImage&) const = default;
};

inline void require_same_size(int w0, int h0, int w1, int h1, const char* what) {
    if (w0 != w1 || h0 != h1)
        throw InvalidArgument(std::string(what) + ": size mismatch " + std::to_string(w0) + "x" + std::to_string(h0) +
                              " vs " + std::to_string(w1) + "x" + std::to_string(h1));
}

/// out = mask ? foreground : background, per pixel.
inline RasterImage composite_over(const RasterImage& fg, const MaskImage& mask, const RasterImage& bg) {
    require_same_size(fg.width, fg.height, mask.width, mask.height, "composite_over");
    require_same_size(fg.width, fg.height, bg.width, bg.height, "composite_over");
    RasterImage out = bg;
    for (std::size_t i = 0; i < mask.bits.size(); ++i)
        if (mask.bits[i])
            for (int c = 0; c < 3; ++c) out.rgb[i * 3 + c] = fg.rgb[i * 3 + c];
    return out;
}

} // namespace sculpt
