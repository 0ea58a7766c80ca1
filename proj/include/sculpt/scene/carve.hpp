// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <thread>
#include <vector>

#include "sculpt/mesh/marching_cubes.hpp"
#include "sculpt/mesh/winding_number.hpp"

namespace sculpt {

namespace detail {

struct NodeBox {
    std::array<int, 3> lo, hi;  // half-open node index ranges
    long count() const { return long(hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]); }
};

// Winding number restricted to a subset of triangles.
inline double winding_subset(const TriangleMesh& mesh, const std::vector<int>& tris, const Vec3& p) {
    double sum = 0.0;
    for (int t : tris)
        sum += solid_angle(triangle_corner(mesh, t, 0) - p, triangle_corner(mesh, t, 1) - p, triangle_corner(mesh, t, 2) - p);
    return sum / (4.0 * std::numbers::pi);
}

// Fills `inside` for every node of `box`. A node box that no triangle's bounding
// box touches is free of surface, so one winding evaluation covers all of it.
inline void classify_box(const TriangleMesh& mesh, const std::vector<BoundingBox>& tri_boxes,
                         const std::vector<int>& all_tris, const std::vector<int>& candidates, const ScalarGrid& grid,
                         const NodeBox& box, std::vector<char>& inside) {
    const Vec3 lo = grid.point(box.lo[0], box.lo[1], box.lo[2]);
    const Vec3 hi = grid.point(box.hi[0] - 1, box.hi[1] - 1, box.hi[2] - 1);
    std::vector<int> touching;
    for (int t : candidates) {
        const auto& b = tri_boxes[t];
        if ((b.max.array() >= lo.array()).all() && (b.min.array() <= hi.array()).all()) touching.push_back(t);
    }
    auto fill = [&](bool v) {
        for (int k = box.lo[2]; k < box.hi[2]; ++k)
            for (int j = box.lo[1]; j < box.hi[1]; ++j)
                for (int i = box.lo[0]; i < box.hi[0]; ++i) inside[grid.index(i, j, k)] = v;
    };
    if (touching.empty()) {
        fill(std::abs(winding_subset(mesh, all_tris, lo)) > 0.5);
        return;
    }
    if (box.count() == 1) {
        fill(std::abs(winding_subset(mesh, all_tris, lo)) > 0.5);
        return;
    }
    int axis = 0;
    for (int a = 1; a < 3; ++a)
        if (box.hi[a] - box.lo[a] > box.hi[axis] - box.lo[axis]) axis = a;
    const int mid = (box.lo[axis] + box.hi[axis]) / 2;
    NodeBox a = box, b = box;
    a.hi[axis] = mid;
    b.lo[axis] = mid;
    classify_box(mesh, tri_boxes, all_tris, touching, grid, a, inside);
    classify_box(mesh, tri_boxes, all_tris, touching, grid, b, inside);
}

// Inside flags (|winding| > 0.5) for every grid node, split into fixed z slabs
// so the result does not depend on the thread count.
inline std::vector<char> inside_nodes(const TriangleMesh& mesh, const ScalarGrid& grid) {
    std::vector<BoundingBox> boxes(mesh.triangle_count());
    std::vector<int> all(mesh.triangle_count());
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        all[t] = t;
        for (int k = 0; k < 3; ++k) boxes[t].extend(triangle_corner(mesh, t, k));
    }
    std::vector<char> inside(grid.size(), 0);
    constexpr int kSlabs = 16;
    const int nz = grid.dims[2];
    std::vector<std::thread> workers;
    const int threads = std::max(1u, std::min(std::thread::hardware_concurrency(), static_cast<unsigned>(kSlabs)));
    for (int w = 0; w < threads; ++w)
        workers.emplace_back([&, w] {
            for (int s = w; s < kSlabs; s += threads) {
                const int z0 = nz * s / kSlabs, z1 = nz * (s + 1) / kSlabs;
                if (z0 == z1) continue;
                classify_box(mesh, boxes, all, all, grid, NodeBox{{0, 0, z0}, {grid.dims[0], grid.dims[1], z1}}, inside);
            }
        });
    for (auto& t : workers) t.join();
    return inside;
}

inline void require_closed(const TriangleMesh& m, const char* what) {
    validate(m);
    if (m.empty()) throw GeometryError(std::string(what) + " mesh is empty");
    if (const auto open = boundary_edge_count(m); open > 0)
        throw GeometryError(std::string(what) + " mesh is not closed (" + std::to_string(open) + " boundary edges)");
}

} // namespace detail

/// Grid used by `carve`: `resolution` nodes per axis spanning the target's
/// bounding box with two padding cells per side. Nodes sit at cell centers, so
/// axis-aligned faces of the box fall halfway between nodes.
inline ScalarGrid carve_grid(const TriangleMesh& target, int resolution) {
    constexpr int kPad = 2;
    const BoundingBox bb = bounding_box(target);
    const int interior = resolution - 2 * kPad;
    ScalarGrid g;
    g.dims = {resolution, resolution, resolution};
    g.spacing = bb.extent() / interior;
    if ((g.spacing.array() <= 0.0).any()) throw GeometryError("target mesh is flat along an axis");
    g.origin = bb.min - (kPad - 0.5) * g.spacing;
    g.values.assign(g.size(), 0.0);
    return g;
}

namespace detail {

inline std::optional<TriangleMesh> voxel_boolean(const TriangleMesh& target, const TriangleMesh* mold, int resolution) {
    if (resolution < 16 || resolution > 512)
        throw InvalidArgument("carve resolution " + std::to_string(resolution) + " is outside [16, 512]");
    require_closed(target, "target");
    if (mold) require_closed(*mold, "mold");
    ScalarGrid grid = carve_grid(target, resolution);
    const auto in_target = inside_nodes(target, grid);
    const auto in_mold = mold ? inside_nodes(*mold, grid) : std::vector<char>(grid.size(), 0);
    std::size_t occupied = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const bool occ = in_target[i] && !in_mold[i];
        grid.values[i] = occ ? -0.5 : 0.5;  // inside negative, so the extracted surface faces outward
        occupied += occ;
    }
    if (occupied == 0) return std::nullopt;
    TriangleMesh out = extract_isosurface(grid, 0.0);
    out.uvs.reset();
    out.colors.reset();
    return out;
}

} // namespace detail

/// target minus mold by voxelization and re-extraction. Returns nullopt when the
/// mold removes everything. The result carries no uvs or colors.
inline std::optional<TriangleMesh> carve(const TriangleMesh& target, const TriangleMesh& mold, int resolution = 128) {
    return detail::voxel_boolean(target, &mold, resolution);
}

/// The target alone pushed through the same voxelization; the baseline a carve
/// with a disjoint mold reproduces.
inline std::optional<TriangleMesh> voxel_remesh(const TriangleMesh& target, int resolution = 128) {
    return detail::voxel_boolean(target, nullptr, resolution);
}

} // namespace sculpt
