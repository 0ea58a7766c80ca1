// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numbers>

#include "sculpt/mesh/triangle_mesh.hpp"

namespace sculpt {

/// Pinhole camera. Camera space has +z along the view direction, +x to the
/// right and +y down, so pixel (x, y) grows with camera (x, y).
struct Camera {
    Vec3 eye = Vec3(0.0, 0.0, 3.0);
    Vec3 look_at = Vec3::Zero();
    Vec3 up = Vec3::UnitY();
    double vertical_fov = 45.0;  // degrees
    int width = 256;
    int height = 256;

    void validate() const {
        if (!eye.allFinite() || !look_at.allFinite() || !up.allFinite())
            throw InvalidArgument("camera has non-finite coordinates");
        if ((look_at - eye).norm() < 1e-12) throw InvalidArgument("camera eye equals look_at");
        const Vec3 f = (look_at - eye).normalized();
        if (up.norm() < 1e-12 || f.cross(up.normalized()).norm() < 1e-9)
            throw InvalidArgument("camera up vector is parallel to the view direction");
        if (!(vertical_fov > 0.0 && vertical_fov < 180.0)) throw InvalidArgument("vertical_fov must be in (0, 180)");
        if (width < 1 || height < 1) throw InvalidArgument("camera image size must be positive");
    }

    /// Rows are the camera axes (right, down, forward) in world coordinates.
    Mat3 basis() const {
        const Vec3 f = (look_at - eye).normalized();
        const Vec3 r = f.cross(up).normalized();
        const Vec3 d = f.cross(r);
        Mat3 b;
        b.row(0) = r;
        b.row(1) = d;
        b.row(2) = f;
        return b;
    }

    /// World to camera space.
    Mat4 view_matrix() const {
        const Mat3 b = basis();
        Mat4 v = Mat4::Identity();
        v.topLeftCorner<3, 3>() = b;
        v.topRightCorner<3, 1>() = -b * eye;
        return v;
    }

    /// Focal length in pixels.
    double focal_px() const { return 0.5 * height / std::tan(0.5 * vertical_fov * std::numbers::pi / 180.0); }
    double cx() const { return 0.5 * width; }
    double cy() const { return 0.5 * height; }

    /// Camera-space point to continuous pixel coordinates (pixel centers at +0.5).
    Vec2 project(const Vec3& pc) const { return {cx() + focal_px() * pc.x() / pc.z(), cy() + focal_px() * pc.y() / pc.z()}; }
};

} // namespace sculpt
