// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <thread>
#include <vector>

#include "sculpt/render/image.hpp"
#include "sculpt/scene/scene.hpp"

namespace sculpt {

struct RenderOutputs {
    RasterImage color;
    DepthImage depth;
    MaskImage mask;
};

struct RasterOptions {
    double near_plane = 1e-3;
    double ambient = 0.15;
    double base_gray = 0.7;
    int threads = 0;  // 0 = hardware concurrency
};

namespace detail {

struct CameraVertex {
    Vec3 p;  // camera space
    Vec3 color;
};

struct ScreenTriangle {
    std::array<Vec2, 3> xy;
    std::array<double, 3> inv_z;
    std::array<Vec3, 3> color_over_z;
    Vec3 normal;  // camera space, unit
    int index;    // global triangle index; triangles are drawn in this order
    int y_min, y_max;
};

// Clips a camera-space triangle to z >= near (Sutherland-Hodgman) and fans the result.
inline std::vector<std::array<CameraVertex, 3>> clip_near(const std::array<CameraVertex, 3>& tri, double near) {
    std::vector<CameraVertex> poly;
    for (int i = 0; i < 3; ++i) {
        const auto& a = tri[i];
        const auto& b = tri[(i + 1) % 3];
        const bool ain = a.p.z() >= near, bin = b.p.z() >= near;
        if (ain) poly.push_back(a);
        if (ain != bin) {
            const double t = (near - a.p.z()) / (b.p.z() - a.p.z());
            poly.push_back({a.p + t * (b.p - a.p), a.color + t * (b.color - a.color)});
            poly.back().p.z() = near;
        }
    }
    std::vector<std::array<CameraVertex, 3>> out;
    for (std::size_t i = 1; i + 1 < poly.size(); ++i) out.push_back({poly[0], poly[i], poly[i + 1]});
    return out;
}

inline double edge_fn(const Vec2& a, const Vec2& b, double px, double py) {
    return (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
}

} // namespace detail

/// Pinhole z-buffer rasterization of every instance. Depth is camera-space
/// distance along the view axis; shading is Lambert with a light at the eye.
/// Equal depths resolve to the lower global triangle index.
inline RenderOutputs rasterize(const Scene& scene, const RasterOptions& opt = {}) {
    const Camera& cam = scene.camera;
    cam.validate();
    const int W = cam.width, H = cam.height;
    RenderOutputs out{RasterImage(W, H), DepthImage(W, H), MaskImage(W, H)};
    if (scene.background) {
        require_same_size(scene.background->width, scene.background->height, W, H, "background image");
        out.color = *scene.background;
    }

    const Mat4 view = cam.view_matrix();
    const double f = cam.focal_px(), cx = cam.cx(), cy = cam.cy();
    std::vector<detail::ScreenTriangle> tris;
    int global = 0;
    for (const auto& inst : scene.instances) {
        const TriangleMesh& m = *inst.mesh;
        const Mat4 mv = view * inst.transform;
        const Mat3 a = mv.topLeftCorner<3, 3>();
        const Vec3 b = mv.topRightCorner<3, 1>();
        for (int t = 0; t < m.triangle_count(); ++t, ++global) {
            std::array<detail::CameraVertex, 3> cv;
            for (int k = 0; k < 3; ++k) {
                const int v = m.triangles(t, k);
                cv[k].p = a * m.vertex(v) + b;
                cv[k].color = m.colors ? Vec3(m.colors->row(v).transpose()) : Vec3::Constant(opt.base_gray);
            }
            const Vec3 n = (cv[1].p - cv[0].p).cross(cv[2].p - cv[0].p);
            if (!(n.norm() > 0.0)) continue;
            for (const auto& c : detail::clip_near(cv, opt.near_plane)) {
                detail::ScreenTriangle st;
                double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
                for (int k = 0; k < 3; ++k) {
                    st.xy[k] = Vec2(cx + f * c[k].p.x() / c[k].p.z(), cy + f * c[k].p.y() / c[k].p.z());
                    st.inv_z[k] = 1.0 / c[k].p.z();
                    st.color_over_z[k] = c[k].color * st.inv_z[k];
                    ymin = std::min(ymin, st.xy[k].y());
                    ymax = std::max(ymax, st.xy[k].y());
                }
                st.normal = n.normalized();
                st.index = global;
                // Rows whose centers y + 0.5 can fall inside [ymin, ymax].
                st.y_min = static_cast<int>(std::max(0.0, std::ceil(ymin - 0.5)));
                st.y_max = static_cast<int>(std::min(double(H - 1), std::floor(ymax - 0.5)));
                if (st.y_min <= st.y_max) tris.push_back(st);
            }
        }
    }

    auto shade_rows = [&](int y0, int y1) {
        for (const auto& st : tris) {
            const int ya = std::max(st.y_min, y0), yb = std::min(st.y_max, y1 - 1);
            if (ya > yb) continue;
            const double xmin = std::min({st.xy[0].x(), st.xy[1].x(), st.xy[2].x()});
            const double xmax = std::max({st.xy[0].x(), st.xy[1].x(), st.xy[2].x()});
            const int xa = static_cast<int>(std::max(0.0, std::ceil(xmin - 0.5)));
            const int xb = static_cast<int>(std::min(double(W - 1), std::floor(xmax - 0.5)));
            const double area = detail::edge_fn(st.xy[0], st.xy[1], st.xy[2].x(), st.xy[2].y());
            if (area == 0.0) continue;
            for (int y = ya; y <= yb; ++y) {
                const double py = y + 0.5;
                for (int x = xa; x <= xb; ++x) {
                    const double px = x + 0.5;
                    const double w0 = detail::edge_fn(st.xy[1], st.xy[2], px, py) / area;
                    const double w1 = detail::edge_fn(st.xy[2], st.xy[0], px, py) / area;
                    const double w2 = detail::edge_fn(st.xy[0], st.xy[1], px, py) / area;
                    if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
                    const double inv_z = w0 * st.inv_z[0] + w1 * st.inv_z[1] + w2 * st.inv_z[2];
                    if (!(inv_z > 0.0)) continue;
                    const double z = 1.0 / inv_z;
                    const std::size_t pix = static_cast<std::size_t>(y) * W + x;
                    if (out.depth.valid[pix] && !(z < out.depth.depth[pix])) continue;
                    const Vec3 ray = Vec3((px - cx) / f, (py - cy) / f, 1.0).normalized();
                    const double lambert = opt.ambient + (1.0 - opt.ambient) * std::abs(st.normal.dot(ray));
                    const Vec3 c = (w0 * st.color_over_z[0] + w1 * st.color_over_z[1] + w2 * st.color_over_z[2]) * z * lambert;
                    out.depth.depth[pix] = z;
                    out.depth.valid[pix] = 1;
                    out.mask.bits[pix] = 1;
                    std::uint8_t* rgb = out.color.pixel(x, y);
                    for (int ch = 0; ch < 3; ++ch)
                        rgb[ch] = static_cast<std::uint8_t>(std::lround(std::clamp(c[ch], 0.0, 1.0) * 255.0));
                }
            }
        }
    };

    constexpr int kBand = 16;
    const int bands = (H + kBand - 1) / kBand;
    const unsigned hw = opt.threads > 0 ? static_cast<unsigned>(opt.threads) : std::max(1u, std::thread::hardware_concurrency());
    const int threads = static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(bands)));
    std::vector<std::thread> workers;
    for (int w = 0; w < threads; ++w)
        workers.emplace_back([&, w] {
            for (int band = w; band < bands; band += threads) shade_rows(band * kBand, std::min(H, (band + 1) * kBand));
        });
    for (auto& t : workers) t.join();
    return out;
}

} // namespace sculpt
