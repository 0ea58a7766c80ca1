// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <numbers>
#include <vector>

#include "sculpt/mesh/triangle_mesh.hpp"

namespace sculpt {

namespace detail {

inline TriangleMesh from_lists(const std::vector<Vec3>& v, const std::vector<std::array<int, 3>>& f) {
    TriangleMesh m;
    m.positions.resize(static_cast<Eigen::Index>(v.size()), 3);
    for (std::size_t i = 0; i < v.size(); ++i) m.positions.row(static_cast<Eigen::Index>(i)) = v[i];
    m.triangles.resize(static_cast<Eigen::Index>(f.size()), 3);
    for (std::size_t i = 0; i < f.size(); ++i)
        m.triangles.row(static_cast<Eigen::Index>(i)) << f[i][0], f[i][1], f[i][2];
    return m;
}

} // namespace detail

/// Axis-aligned box with outward-wound triangles, 8 vertices.
inline TriangleMesh make_box(const Vec3& lo = Vec3::Zero(), const Vec3& hi = Vec3::Ones()) {
    std::vector<Vec3> v;
    for (int k = 0; k < 8; ++k)
        v.emplace_back(k & 1 ? hi.x() : lo.x(), k & 2 ? hi.y() : lo.y(), k & 4 ? hi.z() : lo.z());
    const std::vector<std::array<int, 3>> f = {
        {0, 2, 1}, {1, 2, 3},  // z = lo
        {4, 5, 6}, {5, 7, 6},  // z = hi
        {0, 1, 4}, {1, 5, 4},  // y = lo
        {2, 6, 3}, {3, 6, 7},  // y = hi
        {0, 4, 2}, {2, 4, 6},  // x = lo
        {1, 3, 5}, {3, 7, 5},  // x = hi
    };
    return detail::from_lists(v, f);
}

/// Icosahedron refined `subdivisions` times, projected onto the sphere.
inline TriangleMesh make_icosphere(int subdivisions, double radius = 1.0, const Vec3& center = Vec3::Zero()) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                           {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& p : v) p.normalize();
    std::vector<std::array<int, 3>> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                         {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                         {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                         {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto [it, inserted] = mid.try_emplace(key, static_cast<int>(v.size()));
            if (inserted) v.push_back((0.5 * (v[a] + v[b])).normalized());
            return it->second;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(f.size() * 4);
        for (const auto& tri : f) {
            const int ab = midpoint(tri[0], tri[1]), bc = midpoint(tri[1], tri[2]), ca = midpoint(tri[2], tri[0]);
            next.push_back({tri[0], ab, ca});
            next.push_back({tri[1], bc, ab});
            next.push_back({tri[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        f = std::move(next);
    }
    for (auto& p : v) p = center + radius * p;
    return detail::from_lists(v, f);
}

/// Latitude/longitude sphere with poles; (rings - 1) * segments + 2 vertices.
inline TriangleMesh make_uv_sphere(int rings, int segments, double radius = 1.0) {
    std::vector<Vec3> v;
    v.emplace_back(0, 0, radius);
    for (int r = 1; r < rings; ++r) {
        const double theta = std::numbers::pi * r / rings;
        for (int s = 0; s < segments; ++s) {
            const double phi = 2.0 * std::numbers::pi * s / segments;
            v.emplace_back(radius * std::sin(theta) * std::cos(phi), radius * std::sin(theta) * std::sin(phi),
                           radius * std::cos(theta));
        }
    }
    v.emplace_back(0, 0, -radius);
    const int south = static_cast<int>(v.size()) - 1;
    auto ring = [&](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
    std::vector<std::array<int, 3>> f;
    for (int s = 0; s < segments; ++s) f.push_back({0, ring(1, s), ring(1, s + 1)});
    for (int r = 1; r + 1 < rings; ++r)
        for (int s = 0; s < segments; ++s) {
            f.push_back({ring(r, s), ring(r + 1, s), ring(r + 1, s + 1)});
            f.push_back({ring(r, s), ring(r + 1, s + 1), ring(r, s + 1)});
        }
    for (int s = 0; s < segments; ++s) f.push_back({south, ring(rings - 1, s + 1), ring(rings - 1, s)});
    return detail::from_lists(v, f);
}

/// Closed cylinder along +z from z = 0 to z = length, capped with center vertices.
/// Rings are evenly spaced so the mesh is mirror symmetric about z = length / 2.
inline TriangleMesh make_cylinder(double radius, double length, int rings, int segments) {
    std::vector<Vec3> v;
    for (int r = 0; r < rings; ++r) {
        const double z = length * r / (rings - 1);
        for (int s = 0; s < segments; ++s) {
            const double phi = 2.0 * std::numbers::pi * s / segments;
            v.emplace_back(radius * std::cos(phi), radius * std::sin(phi), z);
        }
    }
    const int bottom = static_cast<int>(v.size());
    v.emplace_back(0, 0, 0);
    const int top = static_cast<int>(v.size());
    v.emplace_back(0, 0, length);
    auto at = [&](int r, int s) { return r * segments + (s % segments); };
    std::vector<std::array<int, 3>> f;
    for (int r = 0; r + 1 < rings; ++r)
        for (int s = 0; s < segments; ++s) {
            f.push_back({at(r, s), at(r, s + 1), at(r + 1, s + 1)});
            f.push_back({at(r, s), at(r + 1, s + 1), at(r + 1, s)});
        }
    for (int s = 0; s < segments; ++s) {
        f.push_back({bottom, at(0, s + 1), at(0, s)});
        f.push_back({top, at(rings - 1, s), at(rings - 1, s + 1)});
    }
    return detail::from_lists(v, f);
}

/// Axis-aligned rectangle in the z = `z` plane facing +z, split along its diagonal.
inline TriangleMesh make_quad(double half_width, double half_height, double z, const Vec3& center = Vec3::Zero()) {
    const std::vector<Vec3> v = {center + Vec3(-half_width, -half_height, z), center + Vec3(half_width, -half_height, z),
                                 center + Vec3(half_width, half_height, z), center + Vec3(-half_width, half_height, z)};
    return detail::from_lists(v, {{0, 1, 2}, {0, 2, 3}});
}

} // namespace sculpt
