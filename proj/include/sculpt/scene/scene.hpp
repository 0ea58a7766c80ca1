// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sculpt/render/image.hpp"
#include "sculpt/scene/camera.hpp"
#include "sculpt/scene/rig.hpp"

namespace sculpt {

/// A placed mesh. `rest` is the bind-time object-space mesh every deformation
/// starts from; `mesh` is the current deformed state.
struct Instance {
    std::string name;
    std::shared_ptr<const TriangleMesh> rest;
    std::shared_ptr<const TriangleMesh> mesh;
    Mat4 transform = Mat4::Identity();
    std::optional<BoundRig> rig;
};

/// Scenes are values: every edit returns a new scene and meshes are shared
/// between copies.
struct Scene {
    std::vector<Instance> instances;
    std::optional<RasterImage> background;
    Camera camera;

    int index_of(std::string_view name) const {
        for (std::size_t i = 0; i < instances.size(); ++i)
            if (instances[i].name == name) return static_cast<int>(i);
        return -1;
    }
    const Instance& instance(std::string_view name) const {
        const int i = index_of(name);
        if (i < 0) throw NotFound("unknown instance '" + std::string(name) + "'");
        return instances[i];
    }
    Instance& instance(std::string_view name) {
        const int i = index_of(name);
        if (i < 0) throw NotFound("unknown instance '" + std::string(name) + "'");
        return instances[i];
    }
};

inline TriangleMesh world_mesh(const Instance& inst) { return transformed(*inst.mesh, inst.transform); }

inline Mat4 translation(const Vec3& t) {
    Mat4 m = Mat4::Identity();
    m.topRightCorner<3, 1>() = t;
    return m;
}

/// Rotation by `degrees` about the line through `center` along `axis`.
inline Mat4 rotation_about(const Vec3& axis, double degrees, const Vec3& center) {
    if (!(axis.norm() > 0.0) || !axis.allFinite()) throw InvalidArgument("rotation axis must be nonzero");
    Mat4 r = Mat4::Identity();
    r.topLeftCorner<3, 3>() = Eigen::AngleAxisd(degrees * std::numbers::pi / 180.0, axis.normalized()).toRotationMatrix();
    return translation(center) * r * translation(-center);
}

inline void check_transform(const Mat4& xf, const std::string& name) {
    if (!xf.allFinite() || std::abs(xf.topLeftCorner<3, 3>().determinant()) <= 1e-12)
        throw InvalidArgument("transform of instance '" + name + "' is not invertible");
}

inline Scene add_instance(Scene scene, const std::string& name, TriangleMesh mesh, const Mat4& transform = Mat4::Identity()) {
    if (name.empty()) throw InvalidArgument("instance name is empty");
    if (scene.index_of(name) >= 0) throw InvalidArgument("duplicate instance name '" + name + "'");
    check_transform(transform, name);
    validate(mesh);
    auto shared = std::make_shared<const TriangleMesh>(std::move(mesh));
    scene.instances.push_back({name, shared, shared, transform, std::nullopt});
    return scene;
}

inline Scene remove_instance(Scene scene, const std::string& name) {
    const int i = scene.index_of(name);
    if (i < 0) throw NotFound("unknown instance '" + name + "'");
    scene.instances.erase(scene.instances.begin() + i);
    return scene;
}

/// Pre-composes the instance transform with a world-space translation.
inline Scene translate_instance(Scene scene, const std::string& name, const Vec3& t) {
    if (!t.allFinite()) throw InvalidArgument("translation is not finite");
    auto& inst = scene.instance(name);
    if (t != Vec3::Zero()) inst.transform = translation(t) * inst.transform;
    return scene;
}

/// Rotates an instance in world space about `center`, or about the area-weighted
/// centroid of its current world-space surface when no center is given.
inline Scene rotate_instance(Scene scene, const std::string& name, const Vec3& axis, double degrees,
                             const std::optional<Vec3>& center = std::nullopt) {
    auto& inst = scene.instance(name);
    const Vec3 c = center ? *center : area_centroid(world_mesh(inst));
    inst.transform = rotation_about(axis, degrees, c) * inst.transform;
    return scene;
}

/// Replaces the current (deformed) mesh of an instance. Connectivity must match the rest mesh.
inline Scene set_instance_mesh(Scene scene, const std::string& name, TriangleMesh mesh) {
    auto& inst = scene.instance(name);
    if (mesh.vertex_count() != inst.rest->vertex_count() || mesh.triangles != inst.rest->triangles)
        throw InvalidArgument("deformed mesh of '" + name + "' does not match its rest connectivity");
    inst.mesh = std::make_shared<const TriangleMesh>(std::move(mesh));
    return scene;
}

/// Rotates positions about the area-weighted surface centroid; other fields are copied.
inline TriangleMesh rotate_about_centroid(const TriangleMesh& mesh, const Vec3& axis, double degrees) {
    return transformed(mesh, rotation_about(axis, degrees, area_centroid(mesh)));
}

/// Prompt tag for an object rotated by `degrees` from its original view.
inline std::string_view view_prompt_for_angle(double degrees) {
    double a = std::fmod(degrees, 360.0);
    if (a < 0.0) a += 360.0;
    if (a <= 45.0 || a >= 315.0) return "front view";
    if (a >= 135.0 && a <= 225.0) return "back view";
    return "side view";
}

} // namespace sculpt
