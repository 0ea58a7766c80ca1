// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <Eigen/QR>
#include <random>

#include "sculpt/mesh/primitives.hpp"
#include "sculpt/metrics/depth_metrics.hpp"
#include "sculpt/render/depth_png.hpp"
#include "sculpt/render/rasterizer.hpp"
#include "support/temp_dir.hpp"

using namespace sculpt;

namespace {

DepthImage random_depth(int w, int h, std::mt19937& rng, double invalid_rate = 0.1) {
    std::uniform_real_distribution<double> u(0.5, 5.0), p(0.0, 1.0);
    DepthImage d(w, h);
    for (std::size_t i = 0; i < d.size(); ++i)
        if (p(rng) >= invalid_rate) {
            d.depth[i] = u(rng);
            d.valid[i] = 1;
        }
    return d;
}

// Least-squares fit of [b 1] to a by QR, then the residual RMS.
double affine_oracle(const DepthImage& a, const DepthImage& b) {
    std::vector<std::size_t> dom;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.valid[i] && b.valid[i]) dom.push_back(i);
    Eigen::MatrixXd A(dom.size(), 2);
    Eigen::VectorXd y(dom.size());
    for (std::size_t k = 0; k < dom.size(); ++k) {
        A(k, 0) = b.depth[dom[k]];
        A(k, 1) = 1.0;
        y[k] = a.depth[dom[k]];
    }
    const Eigen::Vector2d sc = A.colPivHouseholderQr().solve(y);
    return std::sqrt((A * sc - y).squaredNorm() / dom.size());
}

} // namespace

TEST(DRmse, IdenticalMapsGiveZero) {
    std::mt19937 rng(1);
    const auto a = random_depth(20, 15, rng);
    EXPECT_EQ(d_rmse(a, a), 0.0);
    EXPECT_EQ(d_rmse(a, a, DepthAlign::affine), 0.0);
}

TEST(DRmse, ConstantOffset) {
    std::mt19937 rng(2);
    const auto a = random_depth(30, 20, rng, 0.0);
    auto b = a;
    for (auto& v : b.depth) v += 0.7;
    EXPECT_NEAR(d_rmse(a, b), 0.7, 1e-12);
    EXPECT_NEAR(d_rmse(a, b, DepthAlign::affine), 0.0, 1e-12);
}

TEST(DRmse, AffineNoiseMatchesLeastSquaresOracle) {
    std::mt19937 rng(3);
    std::normal_distribution<double> noise(0.0, 0.01);
    const auto a = random_depth(64, 64, rng, 0.0);
    auto b = a;
    for (auto& v : b.depth) v = 2.0 * v + 1.0 + noise(rng);
    const double got = d_rmse(a, b, DepthAlign::affine);
    EXPECT_NEAR(got, affine_oracle(a, b), 1e-12);
    // Fitting b back onto a divides the noise by the slope 2.
    EXPECT_NEAR(got, 0.005, 0.0005);
    // Fitted the other way round the residual is the noise itself.
    EXPECT_GE(d_rmse(b, a, DepthAlign::affine), 0.009);
    EXPECT_LE(d_rmse(b, a, DepthAlign::affine), 0.011);
}

TEST(DRmse, DomainIsIntersectionOfValidPixels) {
    DepthImage a(3, 1), b(3, 1);
    a.depth = {1.0, 2.0, 100.0};
    a.valid = {1, 1, 1};
    b.depth = {1.5, 2.5, 0.0};
    b.valid = {1, 1, 0};
    EXPECT_NEAR(d_rmse(a, b), 0.5, 1e-15);
    b.valid = {0, 0, 0};
    EXPECT_THROW(d_rmse(a, b), InvalidArgument);
    EXPECT_THROW(d_rmse(a, DepthImage(2, 2)), InvalidArgument);
}

TEST(DRmse, PropertiesOnRandomPairs) {
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> k(0.01, 100.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto a = random_depth(8, 6, rng), b = random_depth(8, 6, rng);
        const double none = d_rmse(a, b), aff = d_rmse(a, b, DepthAlign::affine);
        EXPECT_GE(none, 0.0);
        EXPECT_GE(aff, 0.0);
        EXPECT_EQ(none, d_rmse(b, a));
        EXPECT_LE(aff, none);
        EXPECT_NEAR(aff, affine_oracle(a, b), 1e-9);
        auto kb = b;
        const double scale = k(rng);
        for (auto& v : kb.depth) v *= scale;
        EXPECT_NEAR(d_rmse(a, kb, DepthAlign::affine), aff, 1e-9);
    }
}

TEST(DRmse, ZeroOnlyWhenEqualOnDomain) {
    std::mt19937 rng(5);
    const auto a = random_depth(10, 10, rng);
    auto b = a;
    for (std::size_t i = 0; i < b.size(); ++i)
        if (!b.valid[i]) b.depth[i] = 42.0;  // outside the domain, ignored
    EXPECT_EQ(d_rmse(a, b), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i)
        if (b.valid[i]) {
            b.depth[i] += 1e-9;
            break;
        }
    EXPECT_GT(d_rmse(a, b), 0.0);
}

TEST(DRmse, ThroughDepthPngs) {
    oracle::TempDir dir;
    std::mt19937 rng(6);
    const auto a = random_depth(16, 16, rng, 0.0);
    auto b = a;
    for (auto& v : b.depth) v += 0.25;
    export_depth_png(a, dir / "a.png");
    export_depth_png(b, dir / "b.png");
    const auto ia = import_depth_png(dir / "a.png"), ib = import_depth_png(dir / "b.png");
    EXPECT_NEAR(d_rmse(ia, ib), 0.25, 1e-4);
    EXPECT_EQ(format_metric(0.25), "0.25");
    EXPECT_EQ(format_metric(1.0 / 3.0), "0.333333");
    EXPECT_EQ(format_metric(12345.678), "12345.7");
}

TEST(DepthMaskStats, CoverageFractions) {
    Scene s;
    s.camera.eye = Vec3(0, 0, 2);
    s.camera.width = 40;
    s.camera.height = 30;
    const auto full = rasterize(add_instance(s, "q", make_quad(50, 50, 0.0))).depth;
    EXPECT_EQ(depth_mask_stats(full).valid_fraction, 1.0);
    EXPECT_NEAR(*depth_mask_stats(full).dmin, 2.0, 1e-9);

    const auto empty = depth_mask_stats(rasterize(s).depth);
    EXPECT_EQ(empty.valid_fraction, 0.0);
    EXPECT_FALSE(empty.dmin.has_value());
    EXPECT_FALSE(empty.mean.has_value());

    // Right edge exactly on the optical axis: the left half of the columns.
    const auto half = rasterize(add_instance(s, "q", make_quad(50, 50, 0.0, Vec3(-50, 0, 0)))).depth;
    EXPECT_NEAR(depth_mask_stats(half).valid_fraction, 0.5, 1.0 / (40 * 30));
}

TEST(DepthMaskStats, Summary) {
    DepthImage d(2, 2);
    d.depth = {1.0, 3.0, 0.0, 5.0};
    d.valid = {1, 1, 0, 1};
    const auto st = depth_mask_stats(d);
    EXPECT_EQ(st.valid_fraction, 0.75);
    EXPECT_EQ(*st.dmin, 1.0);
    EXPECT_EQ(*st.dmax, 5.0);
    EXPECT_EQ(*st.mean, 3.0);
    EXPECT_EQ(parse_depth_align("affine"), DepthAlign::affine);
    EXPECT_THROW(parse_depth_align("scale"), InvalidArgument);
}
