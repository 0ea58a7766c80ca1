// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <deque>
#include <map>
#include <memory>
#include <mutex>

#include "sculpt/enhance/enhancement.hpp"
#include "sculpt/scene/edit_program.hpp"
#include "sculpt/service/coalescer.hpp"
#include "sculpt/service/geometry_buffer.hpp"
#include "sculpt/service/hashing.hpp"

namespace sculpt {

struct SessionOptions {
    std::shared_ptr<const Predictor> predictor;  // used for inversion, denoising and as refiner
    EnhancementConfig enhancement;
    bool manual_stream = false;  // stream requests wait for Session::stream().run_once()
};

/// Default predictor for the enhancement endpoint: a zero-noise mock with three named layers.
inline SessionOptions default_session_options() {
    SessionOptions o;
    o.predictor = std::make_shared<ZeroPredictor>(std::vector<std::string>{"down", "mid", "up"});
    o.enhancement.injection.feature_layers = {"up"};
    o.enhancement.injection.attention_layers = {"down", "mid", "up"};
    return o;
}

struct EnhanceArtifacts {
    std::filesystem::path image, audit;
    std::size_t steps = 0;
};

/// One interactive editing session. Every mutation is an edit record applied
/// through the same code path as batch programs and kept in a log, so the log
/// replays as an EditProgram with identical results.
class Session {
public:
    Session(std::string id, std::filesystem::path workdir, SessionOptions opt = default_session_options())
        : id_(std::move(id)), workdir_(std::move(workdir)), opt_(std::move(opt)) {
        std::filesystem::create_directories(asset_dir());
        std::filesystem::create_directories(artifact_dir());
        ctx_.asset_root = asset_dir();
        ctx_.out_dir = artifact_dir();
        history_.push_back({0, std::make_shared<const Scene>(scene_)});
        stream_ = std::make_unique<Coalescer>([this](const StreamRequest& r) { return solve_stream(r); }, opt_.manual_stream);
    }

    const std::string& id() const { return id_; }
    std::filesystem::path asset_dir() const { return workdir_ / "assets"; }
    std::filesystem::path artifact_dir() const { return workdir_ / "artifacts"; }
    Coalescer& stream() { return *stream_; }
    bool solving() const { return solving_; }

    long revision() const {
        std::lock_guard lock(history_mutex_);
        return history_.back().first;
    }

    /// Stores an uploaded OBJ as an asset and loads it as a new instance.
    long upload_mesh(const std::string& name, const std::string& obj_text) {
        if (!valid_name(name)) throw InvalidArgument("instance name '" + name + "' must use letters, digits, '-' or '_'");
        parse_obj(obj_text);
        std::lock_guard lock(write_mutex_);
        if (scene_.index_of(name) >= 0) throw ConflictError("instance '" + name + "' already exists");
        const std::string rel = "meshes/" + name + ".obj";
        write_file_bytes(asset_dir() / rel, obj_text);
        return apply_locked(Json{{"op", "load"}, {"name", name}, {"mesh", rel}});
    }

    /// Applies any edit record except load and render, which have dedicated entry points.
    long apply_record(const Json& record) {
        const std::string op = record.is_object() ? record.value("op", std::string()) : std::string();
        if (op == "load") throw InvalidArgument("upload meshes through the meshes endpoint");
        if (op == "render") throw InvalidArgument("render through the render endpoint");
        std::lock_guard lock(write_mutex_);
        if (record.is_object() && record.contains("target") && record["target"].is_string())
            require_instance(record["target"].get<std::string>());
        return apply_locked(record);
    }

    long attach_rig(const std::string& instance, const Json& rig) {
        if (solving_) throw ConflictError("a deformation solve is in flight for session '" + id_ + "'");
        std::lock_guard lock(write_mutex_);
        require_instance(instance);
        return apply_locked(Json{{"op", "rig"}, {"target", instance}, {"rig", rig}});
    }

    /// Deforms through the instance's rig: {"targets"[, "ids"]} drives ARAP handles
    /// (warm-started), {"rotations"[, "root_translation"]} poses the skeleton and
    /// {"new_positions"} moves the cage.
    long deform(const std::string& instance, const Json& payload) {
        if (!payload.is_object()) throw InvalidArgument("deform body must be a JSON object");
        Json rec{{"op", ""}, {"target", instance}};
        if (payload.contains("targets")) {
            rec["op"] = "handles";
            rec["warm_start"] = true;
        } else if (payload.contains("rotations")) {
            rec["op"] = "pose";
        } else if (payload.contains("new_positions")) {
            rec["op"] = "cage";
        } else {
            throw InvalidArgument("deform body needs 'targets', 'rotations' or 'new_positions'");
        }
        for (const auto& [k, v] : payload.items())
            if (k != "instance") rec[k] = v;
        std::lock_guard lock(write_mutex_);
        require_instance(instance);
        solving_ = true;
        struct Reset {
            std::atomic<bool>& f;
            ~Reset() { f = false; }
        } reset{solving_};
        return apply_locked(rec);
    }

    RenderArtifacts render() {
        std::lock_guard lock(write_mutex_);
        const std::string prefix = "render_" + std::to_string(++renders_);
        const Json rec{{"op", "render"}, {"out", prefix}};
        const EditOp op = parse_edit_record(rec, log_.size());
        OpReport rep;
        apply_edit(scene_, op, log_.size(), ctx_, &rep);
        log_.push_back(rec);
        return RenderArtifacts{rep.outputs.at(0), rep.outputs.at(1), rep.outputs.at(2)};
    }

    /// Renders the current scene and runs the enhancement loop on it. Request
    /// fields (all optional): prompt, inversion_prompt, config, blend (default true).
    EnhanceArtifacts enhance(const Json& request) {
        if (!request.is_object()) throw InvalidArgument("enhance body must be a JSON object");
        const EnhancementConfig cfg =
            request.contains("config") ? parse_enhancement_config(request["config"]) : opt_.enhancement;
        std::lock_guard lock(write_mutex_);
        const RenderOutputs r = rasterize(scene_);
        const Latent coarse = latent_from_image(r.color);
        auto depth = std::make_shared<const DepthImage>(r.depth);
        const Conditioning inv{request.value("inversion_prompt", std::string("a coarse rendering")), depth};
        const Conditioning fwd{request.value("prompt", std::string("a photo")), depth};
        const DiffusionSchedule sched = cfg.schedule();
        std::optional<BlendMask> blend;
        if (request.value("blend", true)) {
            const Latent bg = latent_from_image(scene_.background ? *scene_.background : r.color);
            blend = make_blend(bg, background_mask(r.mask, 3), *opt_.predictor, inv, sched);
        }
        const auto res = run_enhancement(coarse, inv, fwd, *opt_.predictor, *opt_.predictor, cfg.injection,
                                         blend ? &*blend : nullptr, sched);
        const std::string prefix = "enhance_" + std::to_string(++enhancements_);
        EnhanceArtifacts a{artifact_dir() / (prefix + ".png"), artifact_dir() / (prefix + "_audit.ndjson"), res.audit.size()};
        write_color_png(a.image, image_from_latent(res.latent));
        write_file_bytes(a.audit, audit_ndjson(res.audit));
        return a;
    }

    /// The log as an edit program; run against asset_dir() it reproduces this session.
    Json program() const {
        std::lock_guard lock(write_mutex_);
        Json edits = Json::array();
        for (const auto& r : log_) edits.push_back(r);
        return Json{{"units", "m"}, {"edits", std::move(edits)}};
    }

    /// Scene at a retained revision (the latest two), or the latest when empty.
    std::shared_ptr<const Scene> scene_at(std::optional<long> rev) const {
        std::lock_guard lock(history_mutex_);
        if (!rev) return history_.back().second;
        for (const auto& [r, s] : history_)
            if (r == *rev) return s;
        throw NotFound("revision " + std::to_string(*rev) + " of session '" + id_ + "' is not retained");
    }

    /// World-space geometry of an instance at a retained revision.
    std::string mesh_buffer(const std::string& instance, std::optional<long> rev) const {
        const auto scene = scene_at(rev);
        const int i = scene->index_of(instance);
        if (i < 0) throw NotFound("unknown instance '" + instance + "'");
        return encode_geometry(world_mesh(scene->instances[i]));
    }

    Json summary() const {
        const auto scene = scene_at(std::nullopt);
        Json inst = Json::array();
        for (const auto& in : scene->instances)
            inst.push_back(Json{{"name", in.name},
                                {"vertices", in.mesh->vertex_count()},
                                {"triangles", in.mesh->triangle_count()},
                                {"rig", in.rig ? Json(in.rig->type()) : Json(nullptr)}});
        return Json{{"id", id_}, {"revision", revision()}, {"instances", std::move(inst)}};
    }

    void require_instance(const std::string& name) const {
        if (scene_.index_of(name) < 0) throw NotFound("unknown instance '" + name + "'");
    }

    std::uint64_t submit_stream(const Json& message) {
        if (!message.is_object() || !message.contains("instance") || !message["instance"].is_string())
            throw InvalidArgument("stream message needs a string 'instance'");
        const std::string name = message["instance"].get<std::string>();
        {
            std::lock_guard lock(write_mutex_);
            require_instance(name);
        }
        return stream_->submit(name, message);
    }

private:
    static bool valid_name(const std::string& s) {
        return !s.empty() && s.size() <= 64 &&
               std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; });
    }

    // Caller holds write_mutex_.
    long apply_locked(const Json& record) {
        const EditOp op = parse_edit_record(record, log_.size());
        scene_ = apply_edit(std::move(scene_), op, log_.size(), ctx_);
        log_.push_back(record);
        std::lock_guard lock(history_mutex_);
        const long rev = history_.back().first + 1;
        history_.push_back({rev, std::make_shared<const Scene>(scene_)});
        while (history_.size() > 2) history_.pop_front();
        return rev;
    }

    StreamFrame solve_stream(const StreamRequest& r) {
        StreamFrame f;
        try {
            f.revision = deform(r.instance, r.payload);
            f.geometry = mesh_buffer(r.instance, f.revision);
        } catch (const std::exception& e) {
            f.revision = revision();
            f.error = e.what();
        }
        return f;
    }

    std::string id_;
    std::filesystem::path workdir_;
    SessionOptions opt_;
    mutable std::mutex write_mutex_;
    mutable std::mutex history_mutex_;
    std::atomic<bool> solving_{false};
    Scene scene_;
    EditContext ctx_;
    std::vector<Json> log_;
    std::deque<std::pair<long, std::shared_ptr<const Scene>>> history_;
    int renders_ = 0;
    int enhancements_ = 0;
    std::unique_ptr<Coalescer> stream_;  // last, so its worker stops first
};

/// Owns the sessions of one server.
class SessionRegistry {
public:
    explicit SessionRegistry(std::filesystem::path root, SessionOptions opt = default_session_options())
        : root_(std::move(root)), opt_(std::move(opt)) {}

    std::shared_ptr<Session> create() {
        std::lock_guard lock(mutex_);
        const std::string id = "s" + std::to_string(++count_);
        auto s = std::make_shared<Session>(id, root_ / id, opt_);
        sessions_.emplace(id, s);
        return s;
    }

    std::shared_ptr<Session> get(const std::string& id) const {
        std::lock_guard lock(mutex_);
        const auto it = sessions_.find(id);
        if (it == sessions_.end()) throw NotFound("unknown session '" + id + "'");
        return it->second;
    }

    bool remove(const std::string& id) {
        std::lock_guard lock(mutex_);
        return sessions_.erase(id) > 0;
    }

private:
    std::filesystem::path root_;
    SessionOptions opt_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    long count_ = 0;
};

} // namespace sculpt
