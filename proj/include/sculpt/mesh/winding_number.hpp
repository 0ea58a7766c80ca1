// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <numbers>

#include "sculpt/mesh/triangle_mesh.hpp"

namespace sculpt {

/// Signed solid angle subtended by triangle (a, b, c) at the origin
/// (Van Oosterom and Strackee).
inline double solid_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
    const double la = a.norm(), lb = b.norm(), lc = c.norm();
    const double num = a.dot(b.cross(c));
    const double den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
    return 2.0 * std::atan2(num, den);
}

/// Generalized winding number of a closed mesh at `p`: 1 inside, 0 outside,
/// ~0.5 on the surface (callers treat |w - 0.5| < 1e-6 as boundary).
inline double winding_number(const TriangleMesh& mesh, const Vec3& p) {
    double total = 0.0;
    for (int t = 0; t < mesh.triangle_count(); ++t)
        total += solid_angle(triangle_corner(mesh, t, 0) - p, triangle_corner(mesh, t, 1) - p,
                             triangle_corner(mesh, t, 2) - p);
    return total / (4.0 * std::numbers::pi);
}

inline bool on_boundary(double winding) { return std::abs(winding - 0.5) < 1e-6; }

} // namespace sculpt
