// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sculpt/core/json.hpp"
#include "sculpt/deform/arap.hpp"
#include "sculpt/deform/mean_value_coordinates.hpp"
#include "sculpt/deform/skinning.hpp"
#include "sculpt/mesh/obj_io.hpp"

namespace sculpt {

struct HandleRigSpec {
    std::vector<int> ids;
};

struct CageRigSpec {
    TriangleMesh cage;
    std::string source;  // asset path when loaded from a file, else empty
};

struct SkeletonRigSpec {
    Skeleton skeleton;
    std::optional<double> attach_radius;
};

using RigSpec = std::variant<HandleRigSpec, CageRigSpec, SkeletonRigSpec>;

/// Rig bound to a rest mesh with its precomputed coordinates or weights.
/// ARAP factorizations are owned by whoever runs the solves, not by the rig.
struct BoundRig {
    RigSpec spec;
    std::shared_ptr<const Cage> cage;
    std::shared_ptr<const CageCoordinates> cage_coords;
    std::shared_ptr<const SkinningWeights> skin;
    Skeleton skeleton;  // current pose lives here

    std::string_view type() const {
        switch (spec.index()) {
        case 0: return "handles";
        case 1: return "cage";
        default: return "skeleton";
        }
    }
};

inline BoundRig bind_rig(const TriangleMesh& rest, RigSpec spec) {
    BoundRig rig{std::move(spec), nullptr, nullptr, nullptr, {}};
    if (auto* h = std::get_if<HandleRigSpec>(&rig.spec)) {
        HandleSet{h->ids, Positions::Zero(static_cast<Eigen::Index>(h->ids.size()), 3)}.validate(rest.vertex_count());
    } else if (auto* c = std::get_if<CageRigSpec>(&rig.spec)) {
        rig.cage = std::make_shared<const Cage>(c->cage);
        rig.cage_coords = std::make_shared<const CageCoordinates>(compute_cage_coordinates(rest, *rig.cage));
    } else {
        const auto& s = std::get<SkeletonRigSpec>(rig.spec);
        rig.skeleton = s.skeleton;
        rig.skin = std::make_shared<const SkinningWeights>(
            s.attach_radius ? compute_skinning_weights(rest, s.skeleton, *s.attach_radius)
                            : compute_skinning_weights(rest, s.skeleton));
    }
    return rig;
}

namespace detail {

inline Vec3 json_vec3(const Json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 3) throw InvalidArgument(what + " must be an array of 3 numbers");
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
        if (!j[i].is_number()) throw InvalidArgument(what + " must be an array of 3 numbers");
        v[i] = j[i].get<double>();
    }
    if (!v.allFinite()) throw InvalidArgument(what + " is not finite");
    return v;
}

inline Json vec3_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline TriangleMesh json_mesh(const Json& j) {
    TriangleMesh m;
    const auto& p = j.at("positions");
    const auto& t = j.at("triangles");
    m.positions.resize(static_cast<Eigen::Index>(p.size()), 3);
    for (std::size_t i = 0; i < p.size(); ++i) m.positions.row(i) = json_vec3(p[i], "cage position").transpose();
    m.triangles.resize(static_cast<Eigen::Index>(t.size()), 3);
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!t[i].is_array() || t[i].size() != 3) throw InvalidArgument("cage triangle must have 3 indices");
        for (int k = 0; k < 3; ++k) m.triangles(i, k) = t[i][k].get<int>();
    }
    validate(m);
    return m;
}

inline Json mesh_json(const TriangleMesh& m) {
    Json p = Json::array(), t = Json::array();
    for (int i = 0; i < m.vertex_count(); ++i) p.push_back(vec3_json(m.vertex(i)));
    for (int i = 0; i < m.triangle_count(); ++i)
        t.push_back(Json::array({m.triangles(i, 0), m.triangles(i, 1), m.triangles(i, 2)}));
    return Json{{"positions", p}, {"triangles", t}};
}

} // namespace detail

/// Parses a tagged rig record. Cage meshes may be inline ({"positions",
/// "triangles"}) or an OBJ path resolved against `asset_root`.
inline RigSpec parse_rig(const Json& j, const std::filesystem::path& asset_root) {
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
        throw InvalidArgument("rig record needs a string 'type'");
    const std::string type = j["type"].get<std::string>();
    if (type == "handles") {
        HandleRigSpec h;
        for (const auto& id : j.at("ids")) h.ids.push_back(id.get<int>());
        return h;
    }
    if (type == "cage") {
        const auto& m = j.at("mesh");
        if (m.is_string()) return CageRigSpec{load_obj(asset_root / m.get<std::string>()), m.get<std::string>()};
        return CageRigSpec{detail::json_mesh(m), {}};
    }
    if (type == "skeleton") {
        SkeletonRigSpec s;
        for (const auto& jt : j.at("joints")) {
            const std::string name = jt.at("name").get<std::string>();
            int parent = -1;
            if (jt.contains("parent") && !jt["parent"].is_null()) {
                const auto& p = jt["parent"];
                parent = p.is_string() ? s.skeleton.find(p.get<std::string>()) : p.get<int>();
            }
            s.skeleton.add_joint(name, parent, detail::json_vec3(jt.at("offset"), "joint '" + name + "' offset"));
        }
        if (s.skeleton.joint_count() == 0) throw InvalidArgument("skeleton rig has no joints");
        if (j.contains("attach_radius")) s.attach_radius = j["attach_radius"].get<double>();
        return s;
    }
    throw InvalidArgument("unknown rig type '" + type + "'");
}

inline Json rig_to_json(const RigSpec& spec) {
    if (const auto* h = std::get_if<HandleRigSpec>(&spec)) return Json{{"type", "handles"}, {"ids", h->ids}};
    if (const auto* c = std::get_if<CageRigSpec>(&spec)) {
        if (!c->source.empty()) return Json{{"type", "cage"}, {"mesh", c->source}};
        return Json{{"type", "cage"}, {"mesh", detail::mesh_json(c->cage)}};
    }
    const auto& s = std::get<SkeletonRigSpec>(spec);
    Json joints = Json::array();
    for (const auto& jt : s.skeleton.joints()) {
        Json rec{{"name", jt.name}};
        rec["parent"] = jt.parent < 0 ? Json(nullptr) : Json(s.skeleton.joint(jt.parent).name);
        rec["offset"] = detail::vec3_json(jt.rest_local.topRightCorner<3, 1>());
        joints.push_back(rec);
    }
    Json out{{"type", "skeleton"}, {"joints", joints}};
    if (s.attach_radius) out["attach_radius"] = *s.attach_radius;
    return out;
}

} // namespace sculpt
