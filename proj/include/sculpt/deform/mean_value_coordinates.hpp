// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "sculpt/mesh/triangle_mesh.hpp"
#include "sculpt/mesh/winding_number.hpp"

namespace sculpt {

/// Two cage triangles sharing an edge that together form a planar convex quad
/// (q0, q1, q2, q3) in cyclic order.
struct CageQuad {
    int tri_a, tri_b;
    std::array<int, 4> q;
};

/// Pairs coplanar neighbouring triangles into convex planar quads, greedily in
/// triangle order.
inline std::vector<CageQuad> find_planar_quads(const TriangleMesh& mesh) {
    std::map<std::pair<int, int>, int> directed;  // directed edge -> triangle
    for (int t = 0; t < mesh.triangle_count(); ++t)
        for (int k = 0; k < 3; ++k) directed[{mesh.triangles(t, k), mesh.triangles(t, (k + 1) % 3)}] = t;
    auto normal = [&](int a, int b, int c) {
        return Vec3((mesh.vertex(b) - mesh.vertex(a)).cross(mesh.vertex(c) - mesh.vertex(a)));
    };
    std::vector<char> used(mesh.triangle_count(), 0);
    std::vector<CageQuad> quads;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        if (used[t]) continue;
        for (int k = 0; k < 3 && !used[t]; ++k) {
            const int u = mesh.triangles(t, k), v = mesh.triangles(t, (k + 1) % 3), w1 = mesh.triangles(t, (k + 2) % 3);
            const auto it = directed.find({v, u});
            if (it == directed.end() || it->second == t || used[it->second]) continue;
            const int s = it->second;
            int w2 = -1;
            for (int c = 0; c < 3; ++c)
                if (mesh.triangles(s, c) != u && mesh.triangles(s, c) != v) w2 = mesh.triangles(s, c);
            if (w2 < 0) continue;
            const Vec3 n1 = normal(u, v, w1), n2 = normal(v, u, w2);
            const double l1 = n1.norm(), l2 = n2.norm();
            if (!(l1 > 0.0) || !(l2 > 0.0) || n1.dot(n2) / (l1 * l2) < 1.0 - 1e-12) continue;
            // The other diagonal must give two triangles facing the same way.
            const std::array<int, 4> q = {u, w2, v, w1};
            const Vec3 m1 = normal(q[0], q[1], q[3]), m2 = normal(q[1], q[2], q[3]);
            if (m1.dot(n1) <= 0.0 || m2.dot(n1) <= 0.0) continue;
            used[t] = used[s] = 1;
            quads.push_back({t, s, q});
        }
    }
    return quads;
}

/// Closed triangle mesh enclosing a model, plus its bind-time vertex positions.
struct Cage {
    TriangleMesh mesh;
    Positions rest_positions;
    std::vector<CageQuad> quads;

    explicit Cage(TriangleMesh cage_mesh) : mesh(std::move(cage_mesh)), rest_positions(mesh.positions) {
        validate(mesh);
        if (mesh.empty()) throw GeometryError("cage mesh is empty");
        if (const auto open = boundary_edge_count(mesh); open > 0)
            throw GeometryError("cage is not closed (" + std::to_string(open) + " boundary edges)");
        quads = find_planar_quads(mesh);
    }
    int vertex_count() const { return mesh.vertex_count(); }
};

/// Dense mean value coordinates: row i holds the weights of model vertex i over
/// the cage vertices.
struct CageCoordinates {
    Eigen::MatrixXd weights;
};

namespace detail {

// Adds `scale` times the mean value contribution of triangle (i0, i1, i2) to w.
// Returns true (and overwrites w with barycentric weights) when x lies inside
// the triangle.
inline bool mvc_triangle(const int (&id)[3], double scale, const std::vector<double>& dist,
                         const std::vector<Vec3>& unit, Eigen::VectorXd& w) {
    constexpr double kEps = 1e-10;
    double theta[3];
    for (int i = 0; i < 3; ++i) {
        const double l = (unit[id[(i + 1) % 3]] - unit[id[(i + 2) % 3]]).norm();
        theta[i] = 2.0 * std::asin(std::min(1.0, l / 2.0));
    }
    const double h = (theta[0] + theta[1] + theta[2]) / 2.0;
    if (std::numbers::pi - h < kEps) {
        w.setZero();
        for (int i = 0; i < 3; ++i) w[id[i]] = std::sin(theta[i]) * dist[id[(i + 2) % 3]] * dist[id[(i + 1) % 3]];
        w /= w.sum();
        return true;
    }
    const double sign = unit[id[0]].dot(unit[id[1]].cross(unit[id[2]])) >= 0.0 ? 1.0 : -1.0;
    double c[3], s[3];
    for (int i = 0; i < 3; ++i) {
        c[i] = 2.0 * std::sin(h) * std::sin(h - theta[i]) / (std::sin(theta[(i + 1) % 3]) * std::sin(theta[(i + 2) % 3])) -
               1.0;
        s[i] = sign * std::sqrt(std::max(0.0, 1.0 - c[i] * c[i]));
        // x on the supporting plane but outside the triangle: no contribution.
        if (std::abs(s[i]) <= kEps) return false;
    }
    for (int i = 0; i < 3; ++i) {
        const int ip = (i + 1) % 3, im = (i + 2) % 3;
        w[id[i]] += scale * (theta[i] - c[ip] * theta[im] - c[im] * theta[ip]) / (dist[id[i]] * std::sin(theta[ip]) * s[im]);
    }
    return false;
}

inline Eigen::VectorXd mean_value_coordinates(const Vec3& x, const TriangleMesh& cage, const std::vector<CageQuad>& quads) {
    constexpr double kEps = 1e-10;
    const int n = cage.vertex_count();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    std::vector<double> dist(n);
    std::vector<Vec3> unit(n);
    for (int j = 0; j < n; ++j) {
        const Vec3 d = cage.vertex(j) - x;
        dist[j] = d.norm();
        if (dist[j] < kEps) {
            w[j] = 1.0;
            return w;
        }
        unit[j] = d / dist[j];
    }
    std::vector<char> in_quad(cage.triangle_count(), 0);
    for (const auto& quad : quads) {
        in_quad[quad.tri_a] = in_quad[quad.tri_b] = 1;
        const auto& q = quad.q;
        // Average both diagonal splits so the result does not depend on the diagonal.
        const int splits[4][3] = {{q[0], q[1], q[2]}, {q[0], q[2], q[3]}, {q[0], q[1], q[3]}, {q[1], q[2], q[3]}};
        for (const auto& tri : splits)
            if (mvc_triangle(tri, 0.5, dist, unit, w)) return w;
    }
    for (int t = 0; t < cage.triangle_count(); ++t) {
        if (in_quad[t]) continue;
        const int id[3] = {cage.triangles(t, 0), cage.triangles(t, 1), cage.triangles(t, 2)};
        if (mvc_triangle(id, 1.0, dist, unit, w)) return w;
    }
    return w / w.sum();
}

} // namespace detail

/// Mean value coordinates of `x` with respect to a closed triangle mesh, using the
/// stable per-triangle formulation of Ju, Schaefer and Warren. Points on a cage
/// face reduce to that face's barycentric coordinates.
inline Eigen::VectorXd mean_value_coordinates(const Vec3& x, const TriangleMesh& cage) {
    return detail::mean_value_coordinates(x, cage, {});
}

/// As above, but planar quads of the cage contribute the average of their two
/// diagonal splits, which keeps the coordinates independent of how the quads
/// were triangulated.
inline Eigen::VectorXd mean_value_coordinates(const Vec3& x, const Cage& cage) {
    return detail::mean_value_coordinates(x, cage.mesh, cage.quads);
}

/// Weights of every model vertex; throws when a vertex is outside the cage.
inline CageCoordinates compute_cage_coordinates(const TriangleMesh& model, const Cage& cage) {
    CageCoordinates coords;
    coords.weights.resize(model.vertex_count(), cage.vertex_count());
    for (int i = 0; i < model.vertex_count(); ++i) {
        const Vec3 p = model.vertex(i);
        const double wn = winding_number(cage.mesh, p);
        if (std::abs(wn) < 0.5 && !on_boundary(std::abs(wn)))
            throw GeometryError("model vertex " + std::to_string(i) + " lies outside the cage");
        coords.weights.row(i) = mean_value_coordinates(p, cage).transpose();
    }
    return coords;
}

inline TriangleMesh deform_by_cage(const TriangleMesh& model, const CageCoordinates& coords,
                                   const Positions& new_cage_positions) {
    if (new_cage_positions.rows() != coords.weights.cols())
        throw InvalidArgument("cage position count " + std::to_string(new_cage_positions.rows()) +
                              " does not match cage vertex count " + std::to_string(coords.weights.cols()));
    if (coords.weights.rows() != model.vertex_count())
        throw InvalidArgument("cage coordinates were computed for a different model");
    Positions p = coords.weights * new_cage_positions;
    return model.with_positions(std::move(p));
}

} // namespace sculpt
