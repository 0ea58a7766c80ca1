// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <queue>
#include <vector>

#include <Eigen/SparseCholesky>

#include "sculpt/deform/skeleton.hpp"
#include "sculpt/mesh/cotan_laplacian.hpp"

namespace sculpt {

/// Row per model vertex, column per joint. Rows are convex combinations; columns
/// of leaf joints are zero.
struct SkinningWeights {
    Eigen::MatrixXd weights;
};

inline double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (p - (a + t * ab)).norm();
}

/// Bones that own at least one segment, in joint order.
inline std::vector<int> skinned_joints(const Skeleton& skeleton) {
    std::vector<int> out;
    for (int j = 0; j < skeleton.joint_count(); ++j)
        if (!skeleton.children(j).empty()) out.push_back(j);
    return out;
}

inline double default_attach_radius(const TriangleMesh& model) { return 0.02 * bounding_box(model).diagonal(); }

/// Discrete harmonic weights: for each bone, solve L w = 0 with w = 1 on the
/// bone's attach set and w = 0 on every other attach set, then clamp to [0, 1]
/// and normalize per vertex.
///
/// A vertex attaches to the nearest bone segment within `attach_radius`; exact
/// ties go to the lower joint id.
inline SkinningWeights compute_skinning_weights(const TriangleMesh& model, const Skeleton& skeleton,
                                                double attach_radius) {
    validate(model);
    if (!(attach_radius > 0.0)) throw InvalidArgument("attach_radius must be positive");
    const std::vector<int> bones = skinned_joints(skeleton);
    if (bones.empty()) throw InvalidArgument("skeleton has no bones (needs at least two joints)");
    const int n = model.vertex_count();
    const auto joints = skeleton.rest_joint_positions();

    std::vector<int> attach(n, -1);  // index into `bones`
    for (int v = 0; v < n; ++v) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < bones.size(); ++b) {
            double d = std::numeric_limits<double>::infinity();
            for (int c : skeleton.children(bones[b]))
                d = std::min(d, point_segment_distance(model.vertex(v), joints[bones[b]], joints[c]));
            if (d <= attach_radius && d < best) {
                best = d;
                attach[v] = static_cast<int>(b);
            }
        }
    }
    std::vector<int> attached_count(bones.size(), 0);
    for (int a : attach)
        if (a >= 0) ++attached_count[a];
    for (std::size_t b = 0; b < bones.size(); ++b)
        if (attached_count[b] == 0)
            throw GeometryError("bone '" + skeleton.joint(bones[b]).name + "' has no vertices within attach radius");

    SkinningWeights out;
    out.weights = Eigen::MatrixXd::Zero(n, skeleton.joint_count());

    const CotanLaplacian lap = build_cotan_laplacian(model);
    const auto adj = weighted_adjacency(lap, n);

    // Every free vertex must reach an attached vertex, otherwise the system is singular.
    {
        std::vector<char> reached(n, 0);
        std::queue<int> q;
        for (int v = 0; v < n; ++v)
            if (attach[v] >= 0) {
                reached[v] = 1;
                q.push(v);
            }
        while (!q.empty()) {
            const int v = q.front();
            q.pop();
            for (const auto& [u, w] : adj[v])
                if (!reached[u]) {
                    reached[u] = 1;
                    q.push(u);
                }
        }
        for (int v = 0; v < n; ++v)
            if (!reached[v]) throw GeometryError("vertex " + std::to_string(v) + " is not connected to any bone");
    }

    std::vector<int> free_index(n, -1), free_vertices;
    for (int v = 0; v < n; ++v)
        if (attach[v] < 0) {
            free_index[v] = static_cast<int>(free_vertices.size());
            free_vertices.push_back(v);
        }
    const int nf = static_cast<int>(free_vertices.size());
    Eigen::MatrixXd harmonic = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(bones.size()));
    for (int v = 0; v < n; ++v)
        if (attach[v] >= 0) harmonic(v, attach[v]) = 1.0;

    if (nf > 0) {
        std::vector<Eigen::Triplet<double>> trips;
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nf, static_cast<Eigen::Index>(bones.size()));
        for (int v : free_vertices) {
            double diag = 0.0;
            for (const auto& [u, w] : adj[v]) {
                diag += w;
                if (free_index[u] >= 0)
                    trips.emplace_back(free_index[v], free_index[u], -w);
                else
                    rhs(free_index[v], attach[u]) += w;
            }
            trips.emplace_back(free_index[v], free_index[v], diag);
        }
        Eigen::SparseMatrix<double> sys(nf, nf);
        sys.setFromTriplets(trips.begin(), trips.end());
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(sys);
        if (solver.info() != Eigen::Success) throw GeometryError("skinning weight system factorization failed");
        const Eigen::MatrixXd x = solver.solve(rhs);
        for (int f = 0; f < nf; ++f) harmonic.row(free_vertices[f]) = x.row(f);
    }

    for (int v = 0; v < n; ++v) {
        Eigen::RowVectorXd row = harmonic.row(v).cwiseMax(0.0).cwiseMin(1.0);
        const double s = row.sum();
        if (!(s > 0.0)) throw GeometryError("vertex " + std::to_string(v) + " received no skinning weight");
        row /= s;
        for (std::size_t b = 0; b < bones.size(); ++b) out.weights(v, bones[b]) = row[static_cast<Eigen::Index>(b)];
    }
    return out;
}

inline SkinningWeights compute_skinning_weights(const TriangleMesh& model, const Skeleton& skeleton) {
    return compute_skinning_weights(model, skeleton, default_attach_radius(model));
}

/// Linear blend skinning: p' = sum_b w_b T_b p.
inline TriangleMesh deform_by_skinning(const TriangleMesh& model, const SkinningWeights& weights,
                                       const std::vector<Mat4>& transforms) {
    const auto bones = static_cast<std::size_t>(weights.weights.cols());
    if (transforms.size() != bones)
        throw InvalidArgument("expected " + std::to_string(bones) + " bone transforms, got " +
                              std::to_string(transforms.size()));
    if (weights.weights.rows() != model.vertex_count())
        throw InvalidArgument("skinning weights were computed for a different model");
    // Bind pose: positions come back untouched.
    if (std::all_of(transforms.begin(), transforms.end(), [](const Mat4& t) { return t == Mat4::Identity(); }))
        return model;
    Positions out(model.positions.rows(), 3);
    for (int v = 0; v < model.vertex_count(); ++v) {
        const double x = model.positions(v, 0), y = model.positions(v, 1), z = model.positions(v, 2);
        double acc[3] = {0.0, 0.0, 0.0};
        for (std::size_t b = 0; b < bones; ++b) {
            const double w = weights.weights(v, static_cast<Eigen::Index>(b));
            if (w == 0.0) continue;
            const Mat4& t = transforms[b];
            for (int r = 0; r < 3; ++r) acc[r] += w * (t(r, 0) * x + t(r, 1) * y + t(r, 2) * z + t(r, 3));
        }
        out.row(v) << acc[0], acc[1], acc[2];
    }
    return model.with_positions(std::move(out));
}

} // namespace sculpt
