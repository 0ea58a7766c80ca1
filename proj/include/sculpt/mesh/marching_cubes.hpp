// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "sculpt/mesh/mc_tables.hpp"
#include "sculpt/mesh/scalar_grid.hpp"

namespace sculpt {

namespace mc {

// Corner c of a cell sits at offset kCorner[c] from the cell's lower node.
inline constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                      {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
inline constexpr int kEdgeCorners[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                            {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

} // namespace mc

/// Marching cubes over the standard 256-case table, no ambiguity resolution.
///
/// Vertices shared between cells are welded through a global grid-edge id, so a
/// closed level set yields a closed mesh. Triangles are wound so that normals
/// point toward increasing field values (outward for an SDF that is negative
/// inside). Throws GeometryError when `iso` lies outside the value range or the
/// level set is empty.
inline TriangleMesh extract_isosurface(const ScalarGrid& grid, double iso) {
    validate(grid);
    const auto [lo, hi] = std::minmax_element(grid.values.begin(), grid.values.end());
    if (iso < *lo || iso > *hi)
        throw GeometryError("iso value " + std::to_string(iso) + " outside grid range [" + std::to_string(*lo) +
                            ", " + std::to_string(*hi) + "]: empty surface");

    const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
    std::unordered_map<std::uint64_t, int> edge_vertex;
    std::vector<Vec3> verts;
    std::vector<std::array<int, 3>> tris;

    auto vertex_on_edge = [&](int i, int j, int k, int axis) {
        const std::uint64_t key = static_cast<std::uint64_t>(grid.index(i, j, k)) * 3 + axis;
        auto [it, inserted] = edge_vertex.try_emplace(key, static_cast<int>(verts.size()));
        if (inserted) {
            const int i1 = i + (axis == 0), j1 = j + (axis == 1), k1 = k + (axis == 2);
            const double v0 = grid.at(i, j, k), v1 = grid.at(i1, j1, k1);
            const double t = v1 != v0 ? (iso - v0) / (v1 - v0) : 0.5;
            const Vec3 p0 = grid.point(i, j, k), p1 = grid.point(i1, j1, k1);
            verts.push_back(p0 + t * (p1 - p0));
        }
        return it->second;
    };

    for (int k = 0; k + 1 < nz; ++k) {
        for (int j = 0; j + 1 < ny; ++j) {
            for (int i = 0; i + 1 < nx; ++i) {
                int cube = 0;
                for (int c = 0; c < 8; ++c)
                    if (grid.at(i + mc::kCorner[c][0], j + mc::kCorner[c][1], k + mc::kCorner[c][2]) < iso)
                        cube |= 1 << c;
                if (mc::kEdgeTable[cube] == 0) continue;

                int ids[12];
                for (int e = 0; e < 12; ++e) {
                    if (!(mc::kEdgeTable[cube] & (1 << e))) continue;
                    const int* a = mc::kCorner[mc::kEdgeCorners[e][0]];
                    const int* b = mc::kCorner[mc::kEdgeCorners[e][1]];
                    const int axis = a[0] != b[0] ? 0 : (a[1] != b[1] ? 1 : 2);
                    ids[e] = vertex_on_edge(i + std::min(a[0], b[0]), j + std::min(a[1], b[1]),
                                            k + std::min(a[2], b[2]), axis);
                }
                for (int n = 0; mc::kTriTable[cube][n] != -1; n += 3) {
                    // The table winds triangles toward the "below iso" side; swap to face outward.
                    tris.push_back({ids[mc::kTriTable[cube][n]], ids[mc::kTriTable[cube][n + 2]],
                                    ids[mc::kTriTable[cube][n + 1]]});
                }
            }
        }
    }
    if (tris.empty())
        throw GeometryError("isosurface at " + std::to_string(iso) + " is empty");

    TriangleMesh mesh;
    mesh.positions.resize(static_cast<Eigen::Index>(verts.size()), 3);
    for (std::size_t v = 0; v < verts.size(); ++v) mesh.positions.row(static_cast<Eigen::Index>(v)) = verts[v];
    mesh.triangles.resize(static_cast<Eigen::Index>(tris.size()), 3);
    for (std::size_t t = 0; t < tris.size(); ++t)
        for (int c = 0; c < 3; ++c) mesh.triangles(static_cast<Eigen::Index>(t), c) = tris[t][c];
    return mesh;
}

} // namespace sculpt
