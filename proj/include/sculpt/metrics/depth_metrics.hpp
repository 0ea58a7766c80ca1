// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>

#include "sculpt/render/image.hpp"

namespace sculpt {

enum class DepthAlign { none, affine };

inline DepthAlign parse_depth_align(const std::string& s) {
    if (s == "none") return DepthAlign::none;
    if (s == "affine") return DepthAlign::affine;
    throw InvalidArgument("unknown depth alignment '" + s + "' (expected none or affine)");
}

/// Root-mean-square depth discrepancy over pixels valid in both maps. With
/// `affine`, b is first mapped through the least-squares fit s b + c to a.
inline double d_rmse(const DepthImage& a, const DepthImage& b, DepthAlign align = DepthAlign::none) {
    require_same_size(a.width, a.height, b.width, b.height, "d_rmse");
    std::vector<std::size_t> dom;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.valid[i] && b.valid[i]) dom.push_back(i);
    if (dom.empty()) throw InvalidArgument("d_rmse: no pixel is valid in both depth maps");
    const double n = static_cast<double>(dom.size());

    double s = 1.0, c = 0.0;
    if (align == DepthAlign::affine) {
        double ma = 0.0, mb = 0.0;
        for (auto i : dom) {
            ma += a.depth[i];
            mb += b.depth[i];
        }
        ma /= n;
        mb /= n;
        double sbb = 0.0, sab = 0.0;
        for (auto i : dom) {
            const double db = b.depth[i] - mb;
            sbb += db * db;
            sab += db * (a.depth[i] - ma);
        }
        s = sbb > 0.0 ? sab / sbb : 0.0;
        c = ma - s * mb;
    }
    double sum = 0.0;
    for (auto i : dom) {
        const double r = s * b.depth[i] + c - a.depth[i];
        sum += r * r;
    }
    return std::sqrt(sum / n);
}

struct DepthMaskStats {
    double valid_fraction = 0.0;
    std::optional<double> dmin, dmax, mean;  // empty when no pixel is valid
};

inline DepthMaskStats depth_mask_stats(const DepthImage& d) {
    DepthMaskStats st;
    std::size_t n = 0;
    double sum = 0.0, lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!d.valid[i]) continue;
        const double v = d.depth[i];
        lo = n ? std::min(lo, v) : v;
        hi = n ? std::max(hi, v) : v;
        sum += v;
        ++n;
    }
    if (d.size()) st.valid_fraction = static_cast<double>(n) / d.size();
    if (n) {
        st.dmin = lo;
        st.dmax = hi;
        st.mean = sum / n;
    }
    return st;
}

/// Metric value as printed by the command line: 6 significant digits.
inline std::string format_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace sculpt
