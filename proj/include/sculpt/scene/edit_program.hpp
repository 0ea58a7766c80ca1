// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "sculpt/mesh/marching_cubes.hpp"
#include "sculpt/render/depth_png.hpp"
#include "sculpt/render/rasterizer.hpp"
#include "sculpt/scene/carve.hpp"
#include "sculpt/scene/rig.hpp"
#include "sculpt/scene/scene.hpp"

namespace sculpt {

struct LoadOp {
    std::string name;
    std::string mesh;  // OBJ path, or
    std::string grid;  // scalar grid path extracted at `iso`
    double iso = 0.0;
    std::optional<Json> rig;  // inline record or path string
    Mat4 transform = Mat4::Identity();
};
struct RotateOp {
    std::string target;
    double degrees = 0.0;
    Vec3 axis = Vec3::UnitZ();
    std::optional<Vec3> center;  // empty = area centroid
};
struct TranslateOp {
    std::string target;
    Vec3 vector = Vec3::Zero();  // scene units after conversion
};
struct PoseOp {
    std::string target;
    std::vector<std::pair<std::string, Eigen::Quaterniond>> rotations;
    std::optional<Vec3> root_translation;
};
struct HandlesOp {
    std::string target;
    std::optional<std::vector<int>> ids;  // defaults to the instance's handle rig
    Positions targets;
    bool warm_start = false;
};
struct CageOp {
    std::string target;
    Positions new_positions;
};
struct CarveOp {
    std::string target;
    std::string mold;  // instance name
    int resolution = 128;
    bool keep_mold = false;
};
struct AddInstanceOp {
    std::string name;
    std::string mesh;
    Mat4 transform = Mat4::Identity();
};
struct RenderOp {
    std::string out;
};
struct RigOp {
    std::string target;
    Json rig;  // inline record or path string; binds to the instance's rest mesh
};
struct CameraOp {
    Camera camera;
};

using EditOp = std::variant<LoadOp, RotateOp, TranslateOp, PoseOp, HandlesOp, CageOp, CarveOp, AddInstanceOp, RenderOp,
                            RigOp, CameraOp>;

inline constexpr const char* kOpNames[] = {"load",  "rotate",       "translate", "pose", "handles", "cage",
                                           "carve", "add_instance", "render",    "rig",  "camera"};

inline std::string_view op_name(const EditOp& op) { return kOpNames[op.index()]; }

struct EditProgram {
    std::string units = "m";
    std::optional<Camera> camera;
    std::optional<std::string> background;  // RGB PNG under the asset root
    std::vector<EditOp> edits;
    Json source = Json::object();  // the document the program was parsed from
};

/// Meters per unit for the unit names a program may use.
inline double unit_scale(const std::string& unit) {
    if (unit == "m") return 1.0;
    if (unit == "cm") return 0.01;
    if (unit == "mm") return 0.001;
    throw InvalidArgument("unknown unit '" + unit + "' (expected m, cm or mm)");
}

namespace detail {

class RecordReader {
public:
    RecordReader(const Json& j, std::optional<std::size_t> index) : j_(j), index_(index) {
        if (!j.is_object()) fail("record must be a JSON object");
    }

    [[noreturn]] void fail(const std::string& msg) const { throw ProgramParseError(index_, msg); }

    bool has(const char* key) {
        seen_.insert(key);
        return j_.contains(key) && !j_[key].is_null();
    }
    const Json& at(const char* key) {
        if (!has(key)) fail(std::string("missing field '") + key + "'");
        return j_[key];
    }
    std::string str(const char* key) {
        const Json& v = at(key);
        if (!v.is_string() || v.get<std::string>().empty()) fail(std::string("'") + key + "' must be a non-empty string");
        return v.get<std::string>();
    }
    double num(const char* key) {
        const Json& v = at(key);
        if (!v.is_number() || !std::isfinite(v.get<double>())) fail(std::string("'") + key + "' must be a finite number");
        return v.get<double>();
    }
    int integer(const char* key) {
        const Json& v = at(key);
        if (!v.is_number_integer()) fail(std::string("'") + key + "' must be an integer");
        return v.get<int>();
    }
    bool boolean(const char* key, bool fallback) {
        if (!has(key)) return fallback;
        if (!j_[key].is_boolean()) fail(std::string("'") + key + "' must be a boolean");
        return j_[key].get<bool>();
    }
    Vec3 vec3(const Json& v, const std::string& what) const {
        try {
            return json_vec3(v, what);
        } catch (const InvalidArgument& e) {
            fail(e.what());
        }
    }
    Vec3 vec3(const char* key) { return vec3(at(key), std::string("'") + key + "'"); }
    Positions points(const char* key) {
        const Json& v = at(key);
        if (!v.is_array()) fail(std::string("'") + key + "' must be an array of points");
        Positions p(static_cast<Eigen::Index>(v.size()), 3);
        for (std::size_t i = 0; i < v.size(); ++i) p.row(i) = vec3(v[i], std::string(key) + "[" + std::to_string(i) + "]").transpose();
        return p;
    }
    std::vector<int> ints(const char* key) {
        const Json& v = at(key);
        if (!v.is_array()) fail(std::string("'") + key + "' must be an array of integers");
        std::vector<int> out;
        for (const auto& x : v) {
            if (!x.is_number_integer()) fail(std::string("'") + key + "' must be an array of integers");
            out.push_back(x.get<int>());
        }
        return out;
    }
    Mat4 transform(const char* key) {
        if (!has(key)) return Mat4::Identity();
        const Json& v = j_[key];
        if (v.is_array()) {
            if (v.size() != 4) fail("transform must be 4 rows of 4 numbers");
            Mat4 m;
            for (int r = 0; r < 4; ++r) {
                if (!v[r].is_array() || v[r].size() != 4) fail("transform must be 4 rows of 4 numbers");
                for (int c = 0; c < 4; ++c) {
                    if (!v[r][c].is_number()) fail("transform must be 4 rows of 4 numbers");
                    m(r, c) = v[r][c].get<double>();
                }
            }
            return m;
        }
        if (!v.is_object()) fail("transform must be a 4x4 array or {translate, rotate, scale}");
        RecordReader t(v, index_);
        Mat4 s = Mat4::Identity(), rot = Mat4::Identity(), tr = Mat4::Identity();
        if (t.has("scale")) {
            const Json& sv = v["scale"];
            const Vec3 k = sv.is_number() ? Vec3::Constant(sv.get<double>()) : t.vec3(sv, "'scale'");
            s.topLeftCorner<3, 3>() = k.asDiagonal();
        }
        if (t.has("rotate")) {
            RecordReader r(v["rotate"], index_);
            try {
                rot = rotation_about(r.vec3("axis"), r.num("degrees"), Vec3::Zero());
            } catch (const InvalidArgument& e) {
                fail(e.what());
            }
            r.finish();
        }
        if (t.has("translate")) tr = translation(t.vec3("translate"));
        t.finish();
        return tr * rot * s;
    }
    void finish() const {
        for (const auto& [k, _] : j_.items())
            if (!seen_.count(k)) fail("unknown field '" + k + "'");
    }

private:
    const Json& j_;
    std::optional<std::size_t> index_;
    std::set<std::string> seen_{"op"};
};

inline Camera parse_camera(const Json& j) {
    RecordReader r(j, std::nullopt);
    Camera c;
    if (r.has("eye")) c.eye = r.vec3("eye");
    if (r.has("look_at")) c.look_at = r.vec3("look_at");
    if (r.has("up")) c.up = r.vec3("up");
    if (r.has("fov")) c.vertical_fov = r.num("fov");
    if (r.has("width")) c.width = r.integer("width");
    if (r.has("height")) c.height = r.integer("height");
    r.finish();
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw ProgramParseError(std::nullopt, std::string("camera: ") + e.what());
    }
    return c;
}

inline Json camera_json(const Camera& c) {
    return Json{{"eye", vec3_json(c.eye)}, {"look_at", vec3_json(c.look_at)}, {"up", vec3_json(c.up)},
                {"fov", c.vertical_fov}, {"width", c.width},  {"height", c.height}};
}

inline bool safe_relative(const std::string& p) {
    const std::filesystem::path path(p);
    if (path.is_absolute() || p.empty()) return false;
    for (const auto& part : path)
        if (part == "..") return false;
    return true;
}

} // namespace detail

/// Parses one edit record; `index` is used in error messages.
inline EditOp parse_edit_record(const Json& j, std::size_t index, const std::string& units = "m") {
    detail::RecordReader r(j, index);
    if (!j.contains("op") || !j["op"].is_string()) r.fail("missing string field 'op'");
    const std::string op = j["op"].get<std::string>();
    EditOp out;
    if (op == "load") {
        LoadOp o;
        o.name = r.str("name");
        if (r.has("mesh") == r.has("grid")) r.fail("load needs exactly one of 'mesh' or 'grid'");
        if (r.has("mesh")) o.mesh = r.str("mesh");
        if (r.has("grid")) o.grid = r.str("grid");
        if (r.has("iso")) o.iso = r.num("iso");
        if (r.has("rig")) {
            o.rig = r.at("rig");
            if (!o.rig->is_object() && !o.rig->is_string()) r.fail("'rig' must be a rig record or a path");
        }
        o.transform = r.transform("transform");
        out = o;
    } else if (op == "rotate") {
        RotateOp o;
        o.target = r.str("target");
        o.degrees = r.num("degrees");
        if (r.has("axis")) o.axis = r.vec3("axis");
        if (!(o.axis.norm() > 0.0)) r.fail("rotation axis must be nonzero");
        if (r.has("center")) {
            const Json& c = r.at("center");
            if (c.is_string()) {
                if (c.get<std::string>() != "centroid") r.fail("'center' must be \"centroid\" or a point");
            } else {
                o.center = r.vec3(c, "'center'");
            }
        }
        out = o;
    } else if (op == "translate") {
        TranslateOp o;
        o.target = r.str("target");
        o.vector = r.vec3("vector");
        if (r.has("unit")) {
            try {
                o.vector *= unit_scale(r.str("unit")) / unit_scale(units);
            } catch (const InvalidArgument& e) {
                r.fail(e.what());
            }
        }
        out = o;
    } else if (op == "pose") {
        PoseOp o;
        o.target = r.str("target");
        const Json& rots = r.at("rotations");
        if (!rots.is_object()) r.fail("'rotations' must map joint names to [w, x, y, z]");
        for (const auto& [joint, q] : rots.items()) {
            if (!q.is_array() || q.size() != 4) r.fail("rotation of joint '" + joint + "' must be [w, x, y, z]");
            for (const auto& x : q)
                if (!x.is_number()) r.fail("rotation of joint '" + joint + "' must be [w, x, y, z]");
            Eigen::Quaterniond quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
            if (std::abs(quat.norm() - 1.0) > 1e-8) r.fail("rotation of joint '" + joint + "' is not unit length");
            o.rotations.emplace_back(joint, quat);
        }
        if (r.has("root_translation")) o.root_translation = r.vec3("root_translation");
        out = o;
    } else if (op == "handles") {
        HandlesOp o;
        o.target = r.str("target");
        if (r.has("ids")) o.ids = r.ints("ids");
        o.targets = r.points("targets");
        if (o.ids && o.ids->size() != static_cast<std::size_t>(o.targets.rows()))
            r.fail("'ids' and 'targets' differ in length");
        o.warm_start = r.boolean("warm_start", false);
        out = o;
    } else if (op == "cage") {
        CageOp o;
        o.target = r.str("target");
        o.new_positions = r.points("new_positions");
        out = o;
    } else if (op == "carve") {
        CarveOp o;
        o.target = r.str("target");
        o.mold = r.str("mold");
        if (r.has("resolution")) o.resolution = r.integer("resolution");
        if (o.resolution < 16 || o.resolution > 512) r.fail("carve resolution must be in [16, 512]");
        o.keep_mold = r.boolean("keep_mold", false);
        out = o;
    } else if (op == "add_instance") {
        AddInstanceOp o;
        o.name = r.str("name");
        o.mesh = r.str("mesh");
        o.transform = r.transform("transform");
        out = o;
    } else if (op == "rig") {
        RigOp o;
        o.target = r.str("target");
        o.rig = r.at("rig");
        if (!o.rig.is_object() && !o.rig.is_string()) r.fail("'rig' must be a rig record or a path");
        out = o;
    } else if (op == "camera") {
        try {
            out = CameraOp{detail::parse_camera(j)};
        } catch (const ProgramParseError& e) {
            r.fail(e.what());
        }
        return out;
    } else if (op == "render") {
        RenderOp o;
        o.out = r.str("out");
        if (!detail::safe_relative(o.out)) r.fail("'out' must be a relative path inside the output directory");
        out = o;
    } else {
        r.fail("unknown op '" + op + "'");
    }
    r.finish();
    return out;
}

/// Parses an edit program document: {"units", "edits": [...], "camera"?, "background"?}.
inline EditProgram parse_edit_program_document(const Json& doc) {
    if (!doc.is_object()) throw ProgramParseError(std::nullopt, "program must be a JSON object");
    EditProgram p;
    p.source = doc;
    for (const auto& [k, _] : doc.items())
        if (k != "units" && k != "edits" && k != "camera" && k != "background")
            throw ProgramParseError(std::nullopt, "unknown top-level field '" + k + "'");
    if (doc.contains("units")) {
        if (!doc["units"].is_string()) throw ProgramParseError(std::nullopt, "'units' must be a string");
        p.units = doc["units"].get<std::string>();
        try {
            unit_scale(p.units);
        } catch (const InvalidArgument& e) {
            throw ProgramParseError(std::nullopt, e.what());
        }
    }
    if (doc.contains("camera")) p.camera = detail::parse_camera(doc["camera"]);
    if (doc.contains("background")) {
        if (!doc["background"].is_string()) throw ProgramParseError(std::nullopt, "'background' must be a path");
        p.background = doc["background"].get<std::string>();
    }
    if (!doc.contains("edits") || !doc["edits"].is_array())
        throw ProgramParseError(std::nullopt, "missing array field 'edits'");
    for (std::size_t i = 0; i < doc["edits"].size(); ++i) p.edits.push_back(parse_edit_record(doc["edits"][i], i, p.units));
    return p;
}

inline EditProgram parse_edit_program(std::string_view text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ProgramParseError(std::nullopt, std::string("invalid JSON: ") + e.what());
    }
    return parse_edit_program_document(doc);
}

inline EditProgram load_edit_program(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_edit_program(std::string_view(ss.str()));
}

/// ARAP states keyed by (instance, handle ids), so repeated solves reuse one
/// factorization and may warm-start from the previous solution.
struct ArapCache {
    struct Entry {
        std::shared_ptr<const TriangleMesh> rest;
        std::unique_ptr<ArapState> state;
    };
    std::map<std::pair<std::string, std::vector<int>>, Entry> entries;

    ArapState& get(const std::string& instance, const std::shared_ptr<const TriangleMesh>& rest, const std::vector<int>& ids) {
        auto& e = entries[{instance, ids}];
        if (!e.state || e.rest != rest) {
            e.rest = rest;
            e.state = std::make_unique<ArapState>(arap_bind(*rest, HandleSet{ids, Positions::Zero(ids.size(), 3)}));
        }
        return *e.state;
    }
};

struct RenderArtifacts {
    std::filesystem::path color, depth, mask;
};

struct OpReport {
    std::size_t index = 0;
    std::string op;
    double millis = 0.0;
    std::vector<std::filesystem::path> outputs;
    std::string note;
};

struct EditContext {
    std::filesystem::path asset_root = ".";
    std::filesystem::path out_dir = ".";
    ArapCache arap;
};

/// Writes <prefix>_color.png, <prefix>_depth.png (+ .meta) and <prefix>_mask.png.
inline RenderArtifacts write_render(const RenderOutputs& r, const std::filesystem::path& out_dir, const std::string& prefix) {
    const auto base = out_dir / prefix;
    std::filesystem::create_directories(base.parent_path());
    RenderArtifacts a{base.string() + "_color.png", base.string() + "_depth.png", base.string() + "_mask.png"};
    write_color_png(a.color, r.color);
    export_depth_png(r.depth, a.depth);
    write_mask_png(a.mask, r.mask);
    return a;
}

namespace detail {

inline TriangleMesh load_asset_mesh(const std::filesystem::path& root, const std::string& rel) {
    const auto path = root / rel;
    if (!std::filesystem::exists(path)) throw NotFound("asset '" + rel + "' not found");
    return load_obj(path);
}

// Binds an inline rig record, or one read from a file under the asset root.
inline void attach_rig(Instance& inst, const Json& record, const EditContext& ctx) {
    Json rig = record;
    if (rig.is_string()) {
        const auto path = ctx.asset_root / rig.get<std::string>();
        std::ifstream in(path);
        if (!in) throw NotFound("rig file '" + rig.get<std::string>() + "' not found");
        rig = Json::parse(in);
    }
    inst.rig = bind_rig(*inst.rest, parse_rig(rig, ctx.asset_root));
}

inline Scene apply(Scene scene, const LoadOp& o, EditContext& ctx) {
    TriangleMesh mesh;
    if (!o.mesh.empty()) {
        mesh = load_asset_mesh(ctx.asset_root, o.mesh);
    } else {
        const auto path = ctx.asset_root / o.grid;
        if (!std::filesystem::exists(path)) throw NotFound("asset '" + o.grid + "' not found");
        mesh = extract_isosurface(load_grid(path), o.iso);
    }
    scene = add_instance(std::move(scene), o.name, std::move(mesh), o.transform);
    if (o.rig) attach_rig(scene.instance(o.name), *o.rig, ctx);
    return scene;
}

inline Scene apply(Scene scene, const RigOp& o, EditContext& ctx) {
    attach_rig(scene.instance(o.target), o.rig, ctx);
    return scene;
}

inline Scene apply(Scene scene, const CameraOp& o, EditContext&) {
    scene.camera = o.camera;
    return scene;
}

inline Scene apply(Scene scene, const RotateOp& o, EditContext&) {
    return rotate_instance(std::move(scene), o.target, o.axis, o.degrees, o.center);
}

inline Scene apply(Scene scene, const TranslateOp& o, EditContext&) {
    return translate_instance(std::move(scene), o.target, o.vector);
}

inline BoundRig& require_rig(Instance& inst, std::string_view type) {
    if (!inst.rig || inst.rig->type() != type)
        throw InvalidArgument("instance '" + inst.name + "' has no " + std::string(type) + " rig");
    return *inst.rig;
}

inline Scene apply(Scene scene, const PoseOp& o, EditContext&) {
    auto& inst = scene.instance(o.target);
    BoundRig& rig = require_rig(inst, "skeleton");
    for (const auto& [joint, q] : o.rotations) rig.skeleton.set_pose(joint, q);
    if (o.root_translation) rig.skeleton.set_root_translation(*o.root_translation);
    TriangleMesh posed = deform_by_skinning(*inst.rest, *rig.skin, pose_transforms(rig.skeleton));
    return set_instance_mesh(std::move(scene), o.target, std::move(posed));
}

inline Scene apply(Scene scene, const HandlesOp& o, EditContext& ctx) {
    auto& inst = scene.instance(o.target);
    std::vector<int> ids;
    if (o.ids) {
        ids = *o.ids;
    } else {
        ids = std::get<HandleRigSpec>(require_rig(inst, "handles").spec).ids;
        if (ids.size() != static_cast<std::size_t>(o.targets.rows()))
            throw InvalidArgument("expected " + std::to_string(ids.size()) + " handle targets, got " +
                                  std::to_string(o.targets.rows()));
    }
    ArapState& state = ctx.arap.get(inst.name, inst.rest, ids);
    TriangleMesh out = o.warm_start ? state.solve_warm(o.targets) : state.solve(o.targets);
    return set_instance_mesh(std::move(scene), o.target, std::move(out));
}

inline Scene apply(Scene scene, const CageOp& o, EditContext&) {
    auto& inst = scene.instance(o.target);
    const BoundRig& rig = require_rig(inst, "cage");
    TriangleMesh out = deform_by_cage(*inst.rest, *rig.cage_coords, o.new_positions);
    return set_instance_mesh(std::move(scene), o.target, std::move(out));
}

inline Scene apply(Scene scene, const CarveOp& o, EditContext&, std::string& note) {
    if (o.target == o.mold) throw InvalidArgument("carve target and mold are the same instance");
    const Instance& target = scene.instance(o.target);
    const Instance& mold = scene.instance(o.mold);
    const auto result = carve(world_mesh(target), world_mesh(mold), o.resolution);
    if (!o.keep_mold) scene = remove_instance(std::move(scene), o.mold);
    if (!result) {
        note = "empty result; instance '" + o.target + "' removed";
        return remove_instance(std::move(scene), o.target);
    }
    auto& inst = scene.instance(o.target);
    auto local = std::make_shared<const TriangleMesh>(transformed(*result, inst.transform.inverse()));
    inst.rest = inst.mesh = local;
    inst.rig.reset();
    return scene;
}

inline Scene apply(Scene scene, const AddInstanceOp& o, EditContext& ctx) {
    return add_instance(std::move(scene), o.name, load_asset_mesh(ctx.asset_root, o.mesh), o.transform);
}

} // namespace detail

/// Applies one record. Errors propagate as ExecutionError naming `index`.
inline Scene apply_edit(Scene scene, const EditOp& op, std::size_t index, EditContext& ctx, OpReport* report = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    OpReport rep{index, std::string(op_name(op)), 0.0, {}, {}};
    try {
        if (const auto* r = std::get_if<RenderOp>(&op)) {
            const RenderOutputs out = rasterize(scene);
            if (std::none_of(out.mask.bits.begin(), out.mask.bits.end(), [](auto b) { return b != 0; }))
                throw GeometryError("render '" + r->out + "' has no visible geometry");
            const auto a = write_render(out, ctx.out_dir, r->out);
            rep.outputs = {a.color, a.depth, a.mask};
        } else if (const auto* c = std::get_if<CarveOp>(&op)) {
            scene = detail::apply(std::move(scene), *c, ctx, rep.note);
        } else {
            scene = std::visit(
                [&](const auto& o) -> Scene {
                    using T = std::decay_t<decltype(o)>;
                    if constexpr (std::is_same_v<T, RenderOp> || std::is_same_v<T, CarveOp>)
                        return scene;
                    else
                        return detail::apply(std::move(scene), o, ctx);
                },
                op);
        }
    } catch (const ExecutionError&) {
        throw;
    } catch (const std::exception& e) {
        throw ExecutionError(index, std::string(op_name(op)) + ": " + e.what());
    }
    rep.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (report) *report = std::move(rep);
    return scene;
}

struct RunResult {
    Scene scene;
    std::vector<OpReport> ops;
};

/// Sets up the camera and background of `initial` from the program header.
inline Scene prepare_scene(const EditProgram& program, const EditContext& ctx, Scene initial = {}) {
    if (program.camera) initial.camera = *program.camera;
    if (program.background) {
        const auto path = ctx.asset_root / *program.background;
        if (!std::filesystem::exists(path)) throw NotFound("background '" + *program.background + "' not found");
        initial.background = read_color_png(path);
    }
    return initial;
}

/// Runs every record in order. Same program and assets give identical artifacts.
inline RunResult run_edit_program(const EditProgram& program, EditContext& ctx, Scene initial = {}) {
    RunResult res{prepare_scene(program, ctx, std::move(initial)), {}};
    for (std::size_t i = 0; i < program.edits.size(); ++i) {
        OpReport rep;
        res.scene = apply_edit(std::move(res.scene), program.edits[i], i, ctx, &rep);
        res.ops.push_back(std::move(rep));
    }
    return res;
}

} // namespace sculpt
