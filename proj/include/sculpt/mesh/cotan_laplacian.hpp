// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <vector>

#include <Eigen/Sparse>

#include "sculpt/mesh/triangle_mesh.hpp"

namespace sculpt {

struct WeightedEdge {
    int i;
    int j;  // i < j
    double weight;
};

/// Cotangent Laplacian: off-diagonal w_ij = (cot a_ij + cot b_ij) / 2, clamped at
/// zero, diagonal = -(row sum of off-diagonals). Negative semidefinite.
struct CotanLaplacian {
    Eigen::SparseMatrix<double> matrix;
    std::vector<WeightedEdge> edges;  // sorted by (i, j)
};

inline CotanLaplacian build_cotan_laplacian(const TriangleMesh& mesh) {
    validate(mesh);
    std::map<std::pair<int, int>, double> half_sums;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        for (int k = 0; k < 3; ++k) {
            // Corner k is opposite edge (k+1, k+2).
            const int a = mesh.triangles(t, k);
            const int b = mesh.triangles(t, (k + 1) % 3);
            const int c = mesh.triangles(t, (k + 2) % 3);
            const Vec3 u = mesh.vertex(b) - mesh.vertex(a);
            const Vec3 v = mesh.vertex(c) - mesh.vertex(a);
            const double cross = u.cross(v).norm();
            const double cot = u.dot(v) / cross;
            if (!(cross > 0.0) || !std::isfinite(cot))
                throw GeometryError("cotangent weight undefined: triangle " + std::to_string(t) +
                                    " has zero area");
            half_sums[{std::min(b, c), std::max(b, c)}] += 0.5 * cot;
        }
    }

    CotanLaplacian lap;
    lap.edges.reserve(half_sums.size());
    std::vector<double> diag(mesh.vertex_count(), 0.0);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(half_sums.size() * 2 + diag.size());
    for (const auto& [e, w_raw] : half_sums) {
        const double w = std::max(0.0, w_raw);
        lap.edges.push_back({e.first, e.second, w});
        trips.emplace_back(e.first, e.second, w);
        trips.emplace_back(e.second, e.first, w);
        diag[e.first] -= w;
        diag[e.second] -= w;
    }
    for (int i = 0; i < mesh.vertex_count(); ++i) trips.emplace_back(i, i, diag[i]);
    lap.matrix.resize(mesh.vertex_count(), mesh.vertex_count());
    lap.matrix.setFromTriplets(trips.begin(), trips.end());
    return lap;
}

/// Per-vertex (neighbor, weight) lists derived from the edge list.
inline std::vector<std::vector<std::pair<int, double>>> weighted_adjacency(const CotanLaplacian& lap, int n) {
    std::vector<std::vector<std::pair<int, double>>> adj(n);
    for (const auto& e : lap.edges) {
        adj[e.i].emplace_back(e.j, e.weight);
        adj[e.j].emplace_back(e.i, e.weight);
    }
    return adj;
}

} // namespace sculpt
