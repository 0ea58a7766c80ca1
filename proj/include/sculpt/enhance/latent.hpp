// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "sculpt/core/error.hpp"
#include "sculpt/render/image.hpp"

namespace sculpt {

/// Real tensor of shape (height, width, channels), stored row-major with channels innermost.
struct Latent {
    int height = 0;
    int width = 0;
    int channels = 0;
    Eigen::ArrayXd values;

    Latent() = default;
    Latent(int h, int w, int c, double fill = 0.0) : height(h), width(w), channels(c) {
        if (h <= 0 || w <= 0 || c <= 0) throw InvalidArgument("latent shape must be positive");
        values = Eigen::ArrayXd::Constant(Eigen::Index(h) * w * c, fill);
    }
    static Latent scalar(double v) { return Latent(1, 1, 1, v); }

    Eigen::Index size() const { return values.size(); }
    bool same_shape(const Latent& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
    double& at(int y, int x, int c) { return values[(Eigen::Index(y) * width + x) * channels + c]; }
    double at(int y, int x, int c) const { return values[(Eigen::Index(y) * width + x) * channels + c]; }
    std::string shape_string() const {
        return "(" + std::to_string(height) + ", " + std::to_string(width) + ", " + std::to_string(channels) + ")";
    }
    bool operator==(const Latent& o) const { return same_shape(o) && (values == o.values).all(); }
};

/// Bitwise equality, distinguishing -0 from +0.
inline bool identical(const Latent& a, const Latent& b) {
    return a.same_shape(b) && std::memcmp(a.values.data(), b.values.data(), sizeof(double) * a.size()) == 0;
}

inline void require_same_shape(const Latent& a, const Latent& b, const std::string& what) {
    if (!a.same_shape(b)) throw InvalidArgument(what + ": shape " + b.shape_string() + " != " + a.shape_string());
}

inline void require_finite(const Latent& a, const std::string& what) {
    if (!a.values.allFinite()) throw InvalidArgument(what + " has non-finite entries");
}

/// RGB image to a 3-channel latent in [-1, 1]. The encoder is the identity up to this scaling.
inline Latent latent_from_image(const RasterImage& img) {
    Latent l(img.height, img.width, 3);
    for (Eigen::Index i = 0; i < l.size(); ++i) l.values[i] = img.rgb[i] / 127.5 - 1.0;
    return l;
}

inline RasterImage image_from_latent(const Latent& l) {
    if (l.channels != 3) throw InvalidArgument("decoding needs a 3-channel latent, got " + l.shape_string());
    RasterImage img(l.width, l.height);
    for (Eigen::Index i = 0; i < l.size(); ++i)
        img.rgb[i] = static_cast<std::uint8_t>(std::clamp(std::lround((l.values[i] + 1.0) * 127.5), 0L, 255L));
    return img;
}

/// Background mask latent: 1 where the object mask is empty, broadcast over `channels`.
inline Latent background_mask(const MaskImage& object, int channels) {
    Latent m(object.height, object.width, channels);
    for (int y = 0; y < object.height; ++y)
        for (int x = 0; x < object.width; ++x)
            for (int c = 0; c < channels; ++c) m.at(y, x, c) = object.at(x, y) ? 0.0 : 1.0;
    return m;
}

} // namespace sculpt
