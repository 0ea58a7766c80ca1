// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "sculpt/core/error.hpp"

namespace sculpt {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Triangles = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;
using UVs = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
using Colors = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Indexed triangle mesh with optional per-vertex texture coordinates and colors.
///
/// Deformations never touch `uvs`; they build a new mesh with fresh positions and
/// copy every other field verbatim.
struct TriangleMesh {
    Positions positions;
    Triangles triangles;
    std::optional<UVs> uvs;
    std::optional<Colors> colors;

    int vertex_count() const { return static_cast<int>(positions.rows()); }
    int triangle_count() const { return static_cast<int>(triangles.rows()); }
    bool empty() const { return positions.rows() == 0 || triangles.rows() == 0; }

    Vec3 vertex(int i) const { return positions.row(i).transpose(); }

    /// Copy of this mesh with new positions; connectivity and attributes are shared by value.
    TriangleMesh with_positions(Positions p) const {
        TriangleMesh out = *this;
        out.positions = std::move(p);
        return out;
    }
};

struct BoundingBox {
    Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void extend(const Vec3& p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    bool contains(const Vec3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
    Vec3 extent() const { return max - min; }
    double diagonal() const { return (max - min).norm(); }
};

inline BoundingBox bounding_box(const Positions& p) {
    BoundingBox box;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        box.extend(p.row(i).transpose());
    return box;
}

inline BoundingBox bounding_box(const TriangleMesh& m) { return bounding_box(m.positions); }

/// Throws GeometryError describing the first violated invariant.
inline void validate(const TriangleMesh& m) {
    const auto n = m.positions.rows();
    if (!m.positions.allFinite())
        throw GeometryError("mesh has non-finite vertex coordinates");
    for (Eigen::Index t = 0; t < m.triangles.rows(); ++t) {
        for (int k = 0; k < 3; ++k) {
            const int idx = m.triangles(t, k);
            if (idx < 0 || idx >= n)
                throw GeometryError("triangle " + std::to_string(t) + " references vertex " +
                                    std::to_string(idx) + " out of range");
        }
        if (m.triangles(t, 0) == m.triangles(t, 1) && m.triangles(t, 1) == m.triangles(t, 2))
            throw GeometryError("triangle " + std::to_string(t) + " is degenerate");
    }
    if (m.uvs && m.uvs->rows() != n)
        throw GeometryError("uv count does not match vertex count");
    if (m.colors && m.colors->rows() != n)
        throw GeometryError("color count does not match vertex count");
}

inline Vec3 triangle_corner(const TriangleMesh& m, int t, int k) {
    return m.positions.row(m.triangles(t, k)).transpose();
}

inline double triangle_area(const TriangleMesh& m, int t) {
    const Vec3 a = triangle_corner(m, t, 0);
    return 0.5 * (triangle_corner(m, t, 1) - a).cross(triangle_corner(m, t, 2) - a).norm();
}

/// Area-weighted centroid of the surface. Falls back to the vertex mean when the
/// total area is zero.
inline Vec3 area_centroid(const TriangleMesh& m) {
    Vec3 acc = Vec3::Zero();
    double total = 0.0;
    for (int t = 0; t < m.triangle_count(); ++t) {
        const double a = triangle_area(m, t);
        acc += a * (triangle_corner(m, t, 0) + triangle_corner(m, t, 1) + triangle_corner(m, t, 2)) / 3.0;
        total += a;
    }
    if (total > 0.0)
        return acc / total;
    if (m.vertex_count() == 0)
        return Vec3::Zero();
    return m.positions.colwise().mean().transpose();
}

/// Undirected edge -> number of incident triangles.
inline std::map<std::pair<int, int>, int> edge_use_counts(const TriangleMesh& m) {
    std::map<std::pair<int, int>, int> uses;
    for (int t = 0; t < m.triangle_count(); ++t) {
        for (int k = 0; k < 3; ++k) {
            int a = m.triangles(t, k), b = m.triangles(t, (k + 1) % 3);
            if (a > b) std::swap(a, b);
            ++uses[{a, b}];
        }
    }
    return uses;
}

inline std::size_t boundary_edge_count(const TriangleMesh& m) {
    std::size_t count = 0;
    for (const auto& [edge, n] : edge_use_counts(m))
        if (n == 1) ++count;
    return count;
}

/// Vertex adjacency lists built from triangle edges, sorted and unique.
inline std::vector<std::vector<int>> vertex_neighbors(const TriangleMesh& m) {
    std::vector<std::vector<int>> nbrs(m.vertex_count());
    for (int t = 0; t < m.triangle_count(); ++t) {
        for (int k = 0; k < 3; ++k) {
            const int a = m.triangles(t, k), b = m.triangles(t, (k + 1) % 3);
            nbrs[a].push_back(b);
            nbrs[b].push_back(a);
        }
    }
    for (auto& n : nbrs) {
        std::sort(n.begin(), n.end());
        n.erase(std::unique(n.begin(), n.end()), n.end());
    }
    return nbrs;
}

struct VolumeResult {
    double volume = 0.0;         // absolute enclosed volume
    bool outward = true;         // true when the signed volume is non-negative
};

/// Enclosed volume of a closed mesh from the sum of signed tetrahedra to the origin.
inline VolumeResult mesh_volume(const TriangleMesh& m) {
    if (m.empty())
        throw GeometryError("mesh_volume: empty mesh");
    if (const auto open = boundary_edge_count(m); open > 0)
        throw GeometryError("mesh_volume: mesh is open (" + std::to_string(open) + " boundary edges)");
    // Translate to the bbox center first so the sum does not depend on where the
    // mesh sits relative to the origin.
    const BoundingBox box = bounding_box(m);
    const Vec3 c = 0.5 * (box.min + box.max);
    double six_v = 0.0;
    for (int t = 0; t < m.triangle_count(); ++t) {
        const Vec3 a = triangle_corner(m, t, 0) - c;
        const Vec3 b = triangle_corner(m, t, 1) - c;
        const Vec3 d = triangle_corner(m, t, 2) - c;
        six_v += a.dot(b.cross(d));
    }
    const double v = six_v / 6.0;
    return {std::abs(v), v >= 0.0};
}

/// Reverses the winding of every triangle.
inline TriangleMesh flipped(const TriangleMesh& m) {
    TriangleMesh out = m;
    out.triangles.col(1).swap(out.triangles.col(2));
    return out;
}

/// Applies an affine 4x4 transform to positions; attributes are copied unchanged.
inline TriangleMesh transformed(const TriangleMesh& m, const Mat4& xf) {
    Positions p(m.positions.rows(), 3);
    const Mat3 a = xf.topLeftCorner<3, 3>();
    const Vec3 t = xf.topRightCorner<3, 1>();
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        p.row(i) = (a * m.positions.row(i).transpose() + t).transpose();
    return m.with_positions(std::move(p));
}

} // namespace sculpt
