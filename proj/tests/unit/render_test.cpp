// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>
#include <set>

#include "sculpt/mesh/primitives.hpp"
#include "sculpt/render/depth_png.hpp"
#include "sculpt/render/rasterizer.hpp"
#include "support/temp_dir.hpp"

using namespace sculpt;

namespace {

Scene facing_scene(int w = 64, int h = 48, double eye_z = 2.0) {
    Scene s;
    s.camera.eye = Vec3(0, 0, eye_z);
    s.camera.look_at = Vec3::Zero();
    s.camera.width = w;
    s.camera.height = h;
    return s;
}

TriangleMesh single_triangle(double z) {
    return detail::from_lists({{-1, -1, z}, {1, -1, z}, {0, 1, z}}, {{0, 1, 2}});
}

std::size_t count_diff(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b, int stride) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); i += stride)
        for (int c = 0; c < stride; ++c)
            if (a[i + c] != b[i + c]) {
                ++n;
                break;
            }
    return n;
}

} // namespace

TEST(Rasterize, SingleTriangleCenterDepth) {
    Scene s = add_instance(facing_scene(), "tri", single_triangle(0.0));
    const auto out = rasterize(s);
    const int x = s.camera.width / 2, y = s.camera.height / 2;
    ASSERT_TRUE(out.depth.is_valid(x, y));
    EXPECT_NEAR(out.depth.at(x, y), 2.0, 1e-5);
    EXPECT_EQ(out.mask.at(x, y), 1);
}

TEST(Rasterize, NearerSurfaceWinsRegardlessOfOrder) {
    for (bool near_first : {true, false}) {
        Scene s = facing_scene(48, 48, 3.0);
        const auto nearq = make_quad(0.4, 0.4, 2.0);  // depth 1
        const auto farq = make_quad(0.4, 0.4, 1.0);   // depth 2
        s = add_instance(s, "a", near_first ? nearq : farq);
        s = add_instance(s, "b", near_first ? farq : nearq);
        const auto out = rasterize(s);
        int covered = 0;
        for (std::size_t i = 0; i < out.depth.size(); ++i)
            if (out.depth.valid[i]) {
                ++covered;
                EXPECT_NEAR(out.depth.depth[i], 1.0, 1e-9);
            }
        EXPECT_GT(covered, 0);
    }
}

TEST(Rasterize, DepthTiesGoToLowerTriangleIndex) {
    auto red = make_quad(0.5, 0.5, 0.0);
    red.colors = Colors::Constant(4, 3, 0.0);
    red.colors->col(0).setOnes();
    auto blue = red;
    blue.colors->setZero();
    blue.colors->col(2).setOnes();
    Scene s = add_instance(facing_scene(), "red", red);
    s = add_instance(s, "blue", blue);
    const auto out = rasterize(s);
    const auto* px = out.color.pixel(32, 24);
    EXPECT_GT(px[0], 0);
    EXPECT_EQ(px[2], 0);
}

TEST(Rasterize, HalvingDepthDoublesWidth) {
    auto width_at = [](double depth) {
        Scene s = facing_scene(512, 512, 0.0);
        s.camera.look_at = Vec3(0, 0, -1);
        s = add_instance(s, "q", make_quad(0.5, 0.1, -depth));
        const auto m = rasterize(s).mask;
        int n = 0;
        for (int x = 0; x < m.width; ++x) n += m.at(x, m.height / 2);
        return n;
    };
    const int w4 = width_at(4.0), w2 = width_at(2.0);
    // Similar triangles: extent = f * size / depth with f = (H/2) / tan(fov/2).
    const double f = 256.0 / std::tan(22.5 * std::numbers::pi / 180.0);
    EXPECT_NEAR(w4, f * 1.0 / 4.0, 1.0);
    EXPECT_NEAR(double(w2) / w4, 2.0, 0.04);
}

// Per-pixel color and depth against ray casting into the triangle plane.
TEST(Rasterize, PerspectiveCorrectInterpolation) {
    auto tri = detail::from_lists({{-1.5, -1.0, -1.0}, {1.2, -0.8, 0.6}, {0.1, 1.3, -0.3}}, {{0, 1, 2}});
    tri.colors = Colors(3, 3);
    *tri.colors << 1, 0, 0, 0, 1, 0, 0, 0, 1;
    Scene s = facing_scene(80, 60, 3.0);
    s.camera.eye = Vec3(0.3, 0.4, 3.0);
    s = add_instance(s, "t", tri);
    const auto out = rasterize(s);

    const Camera& c = s.camera;
    const Vec3 fwd = (c.look_at - c.eye).normalized();
    const Vec3 right = fwd.cross(c.up).normalized();
    const Vec3 down = fwd.cross(right);
    const double f = 0.5 * c.height / std::tan(0.5 * c.vertical_fov * std::numbers::pi / 180.0);
    const Vec3 a = tri.vertex(0), b = tri.vertex(1), cc = tri.vertex(2);
    const Vec3 n = (b - a).cross(cc - a).normalized();
    int checked = 0;
    for (int y = 0; y < c.height; ++y)
        for (int x = 0; x < c.width; ++x) {
            const Vec3 dir = right * ((x + 0.5 - 0.5 * c.width) / f) + down * ((y + 0.5 - 0.5 * c.height) / f) + fwd;
            const double t = (a - c.eye).dot(n) / dir.dot(n);
            const Vec3 hit = c.eye + t * dir;
            // 3D barycentrics of the hit point.
            const double area = (b - a).cross(cc - a).dot(n);
            const double l0 = (b - hit).cross(cc - hit).dot(n) / area;
            const double l1 = (cc - hit).cross(a - hit).dot(n) / area;
            const double l2 = 1.0 - l0 - l1;
            const double margin = 0.02;
            if (l0 < margin || l1 < margin || l2 < margin) continue;
            ASSERT_TRUE(out.depth.is_valid(x, y)) << x << "," << y;
            EXPECT_NEAR(out.depth.at(x, y), t, 1e-9 * t);
            const double shade = 0.15 + 0.85 * std::abs(n.dot(dir.normalized()));
            const Vec3 color = (l0 * tri.colors->row(0) + l1 * tri.colors->row(1) + l2 * tri.colors->row(2)).transpose() * shade;
            for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(out.color.pixel(x, y)[ch], color[ch] * 255.0, 1.0);
            ++checked;
        }
    EXPECT_GT(checked, 200);
}

TEST(Rasterize, DeterministicAndThreadIndependent) {
    Scene s = facing_scene(120, 90, 3.5);
    s = add_instance(s, "ball", make_icosphere(3, 0.8));
    s = add_instance(s, "box", make_box(Vec3(-1.2, -0.5, -1.0), Vec3(-0.2, 0.6, 0.4)));
    const auto a = rasterize(s);
    const auto b = rasterize(s);
    RasterOptions single;
    single.threads = 1;
    RasterOptions many;
    many.threads = 7;
    const auto c = rasterize(s, single);
    const auto d = rasterize(s, many);
    for (const auto* o : {&b, &c, &d}) {
        EXPECT_EQ(a.color, o->color);
        EXPECT_EQ(a.depth, o->depth);
        EXPECT_EQ(a.mask, o->mask);
    }
}

TEST(Rasterize, MaskMatchesDepthValidity) {
    Scene s = facing_scene(100, 70, 3.0);
    s = add_instance(s, "ball", make_icosphere(2, 0.9, Vec3(0.3, 0, 0)));
    const auto out = rasterize(s);
    for (std::size_t i = 0; i < out.depth.size(); ++i) {
        EXPECT_EQ(out.mask.bits[i] != 0, out.depth.valid[i] != 0);
        if (out.depth.valid[i]) EXPECT_GT(out.depth.depth[i], 0.0);
        else EXPECT_EQ(out.depth.depth[i], 0.0);
    }
}

TEST(Rasterize, EmptySceneIsBackground) {
    Scene s = facing_scene(16, 12);
    auto out = rasterize(s);
    EXPECT_TRUE(std::all_of(out.color.rgb.begin(), out.color.rgb.end(), [](auto v) { return v == 0; }));
    EXPECT_TRUE(std::all_of(out.depth.valid.begin(), out.depth.valid.end(), [](auto v) { return v == 0; }));
    RasterImage bg(16, 12);
    for (std::size_t i = 0; i < bg.rgb.size(); ++i) bg.rgb[i] = static_cast<std::uint8_t>(i * 7);
    s.background = bg;
    EXPECT_EQ(rasterize(s).color, bg);
    s.background = RasterImage(8, 8);
    EXPECT_THROW(rasterize(s), InvalidArgument);
}

TEST(Rasterize, GeometryBehindCameraIsClipped) {
    Scene s = facing_scene(64, 64, 0.5);
    // Triangle crossing the eye plane: only the part in front may render.
    s = add_instance(s, "t", detail::from_lists({{-0.5, -0.5, 0.0}, {0.5, -0.5, 0.0}, {0.0, 0.5, 2.0}}, {{0, 1, 2}}));
    const auto out = rasterize(s);
    for (std::size_t i = 0; i < out.depth.size(); ++i)
        if (out.depth.valid[i]) EXPECT_GE(out.depth.depth[i], 1e-3);
}

TEST(Rasterize, RigidMotionOfSceneAndCameraTogether) {
    Scene s = facing_scene(160, 120, 3.0);
    s.camera.eye = Vec3(0.4, 0.8, 3.0);
    s = add_instance(s, "ball", make_icosphere(3, 0.7, Vec3(0.2, 0, 0)));
    s = add_instance(s, "box", make_box(Vec3(-1.0, -0.6, -0.8), Vec3(-0.3, 0.2, 0.1)));
    const Mat4 m = translation(Vec3(0.7, -2.0, 1.1)) * rotation_about(Vec3(0.3, 1.0, -0.2), 63.0, Vec3::Zero());
    Scene moved = s;
    for (auto& inst : moved.instances) inst.transform = m * inst.transform;
    const Mat3 r = m.topLeftCorner<3, 3>();
    moved.camera.eye = r * s.camera.eye + m.topRightCorner<3, 1>();
    moved.camera.look_at = r * s.camera.look_at + m.topRightCorner<3, 1>();
    moved.camera.up = r * s.camera.up;
    const auto a = rasterize(s), b = rasterize(moved);
    const double pixels = 160.0 * 120.0;
    EXPECT_LT(count_diff(a.mask.bits, b.mask.bits, 1) / pixels, 0.001);
    EXPECT_LT(count_diff(a.color.rgb, b.color.rgb, 3) / pixels, 0.001);
    std::size_t depth_diff = 0;
    for (std::size_t i = 0; i < a.depth.size(); ++i)
        depth_diff += a.depth.valid[i] != b.depth.valid[i] || std::abs(a.depth.depth[i] - b.depth.depth[i]) > 1e-9;
    EXPECT_LT(depth_diff / pixels, 0.001);
}

// ---- depth PNG ----

TEST(DepthPng, ConstantPlaneEncodesNearest) {
    oracle::TempDir dir;
    Scene s = add_instance(facing_scene(), "q", make_quad(3, 3, 0.0));
    const auto out = rasterize(s);
    export_depth_png(out.depth, dir / "d.png");
    const auto raw = read_png(dir / "d.png");
    EXPECT_EQ(raw.bit_depth, 16);
    EXPECT_EQ(raw.channels, 1);
    for (std::size_t i = 0; i < raw.samples.size(); ++i)
        EXPECT_EQ(raw.samples[i], out.depth.valid[i] ? 65535 : 0);
    const auto r = read_depth_meta(dir / "d.png");
    EXPECT_EQ(r.dmin, r.dmax);
}

TEST(DepthPng, TwoPlanesHitEndpoints) {
    oracle::TempDir dir;
    Scene s = facing_scene(64, 32, 4.0);
    s = add_instance(s, "near", make_quad(1.5, 2, 3.0, Vec3(-1.0, 0, 0)));  // depth 1
    s = add_instance(s, "far", make_quad(1.5, 2, 1.0, Vec3(2.0, 0, 0)));    // depth 3
    const auto out = rasterize(s);
    export_depth_png(out.depth, dir / "d.png");
    std::set<std::uint16_t> codes;
    for (auto v : read_png(dir / "d.png").samples)
        if (v) codes.insert(v);
    EXPECT_EQ(codes, (std::set<std::uint16_t>{1, 65535}));
    const auto r = read_depth_meta(dir / "d.png");
    EXPECT_NEAR(r.dmin, 1.0, 1e-12);
    EXPECT_NEAR(r.dmax, 3.0, 1e-12);
}

TEST(DepthPng, RandomRoundTripWithinQuantization) {
    oracle::TempDir dir;
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(0.37, 9.1);
    DepthImage d(53, 41);
    for (std::size_t i = 0; i < d.size(); ++i)
        if (i % 11 != 3) {
            d.depth[i] = u(rng);
            d.valid[i] = 1;
        }
    export_depth_png(d, dir / "r.png");
    const auto back = import_depth_png(dir / "r.png");
    const DepthRange r = depth_range(d);
    const double bound = (r.dmax - r.dmin) / 65534.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        ASSERT_EQ(back.valid[i], d.valid[i]);
        if (d.valid[i]) EXPECT_LE(std::abs(back.depth[i] - d.depth[i]), bound);
    }
}

TEST(DepthPng, SidecarHoldsNineSignificantDigits) {
    oracle::TempDir dir;
    DepthImage d(2, 1);
    d.depth = {1.0 / 3.0, 2.718281828459045};
    d.valid = {1, 1};
    export_depth_png(d, dir / "m.png");
    EXPECT_EQ(oracle::read_bytes(dir / "m.png.meta"), "0.333333333\n2.71828183\n");
}

TEST(DepthPng, NoValidPixelsIsError) {
    oracle::TempDir dir;
    EXPECT_THROW(export_depth_png(DepthImage(4, 4), dir / "e.png"), InvalidArgument);
}

TEST(PngIo, ColorAndMaskRoundTrip) {
    oracle::TempDir dir;
    RasterImage img(7, 5);
    for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<std::uint8_t>(i * 13);
    write_color_png(dir / "c.png", img);
    EXPECT_EQ(read_color_png(dir / "c.png"), img);
    MaskImage m(7, 5);
    for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = (i * 7) % 3 == 0;
    write_mask_png(dir / "m.png", m);
    EXPECT_EQ(read_mask_png(dir / "m.png"), m);
    EXPECT_THROW(read_png(dir / "missing.png"), IoError);
}

// ---- compositing ----

TEST(Composite, ZeroAndFullMasks) {
    RasterImage fg(6, 4), bg(6, 4);
    for (std::size_t i = 0; i < fg.rgb.size(); ++i) {
        fg.rgb[i] = static_cast<std::uint8_t>(200 + i % 50);
        bg.rgb[i] = static_cast<std::uint8_t>(i % 90);
    }
    MaskImage none(6, 4), all(6, 4);
    std::fill(all.bits.begin(), all.bits.end(), 1);
    EXPECT_EQ(composite_over(fg, none, bg), bg);
    EXPECT_EQ(composite_over(fg, all, bg), fg);
}

TEST(Composite, CheckerboardMatchesScalarLoop) {
    RasterImage fg(9, 7), bg(9, 7);
    std::mt19937 rng(2);
    for (auto& v : fg.rgb) v = static_cast<std::uint8_t>(rng());
    for (auto& v : bg.rgb) v = static_cast<std::uint8_t>(rng());
    MaskImage m(9, 7);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 9; ++x) m.bits[y * 9 + x] = (x + y) % 2;
    const auto out = composite_over(fg, m, bg);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 9; ++x)
            for (int c = 0; c < 3; ++c)
                EXPECT_EQ(out.pixel(x, y)[c], ((x + y) % 2 ? fg : bg).pixel(x, y)[c]);
    EXPECT_THROW(composite_over(fg, MaskImage(3, 3), bg), InvalidArgument);
}
