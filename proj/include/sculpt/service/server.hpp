// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <httplib.h>

#include "sculpt/service/session.hpp"

namespace sculpt {

namespace detail {

inline void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline int status_for(const std::exception& e) {
    if (dynamic_cast<const NotFound*>(&e)) return 404;
    if (dynamic_cast<const ConflictError*>(&e)) return 409;
    if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ProgramParseError*>(&e) ||
        dynamic_cast<const InvalidArgument*>(&e) || dynamic_cast<const Json::exception*>(&e))
        return 400;
    if (dynamic_cast<const ExecutionError*>(&e) || dynamic_cast<const GeometryError*>(&e) ||
        dynamic_cast<const EnhancementError*>(&e))
        return 422;
    return 500;
}

// Runs a handler, turning library errors into JSON error responses.
template <class F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const std::exception& e) {
            send_json(res, status_for(e), Json{{"error", e.what()}});
        }
    };
}

inline Json body_json(const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    try {
        return Json::parse(req.body);
    } catch (const Json::parse_error& e) {
        throw InvalidArgument(std::string("request body is not JSON: ") + e.what());
    }
}

inline std::string artifact_url(const Session& s, const std::filesystem::path& file) {
    return "/sessions/" + s.id() + "/artifacts/" + std::filesystem::relative(file, s.artifact_dir()).generic_string();
}

inline std::string content_type(const std::filesystem::path& p) {
    const auto ext = p.extension().string();
    if (ext == ".png") return "image/png";
    if (ext == ".json") return "application/json";
    if (ext == ".ndjson") return "application/x-ndjson";
    return "text/plain";
}

} // namespace detail

/// Registers the session endpoints on `srv`. The registry must outlive the server.
inline void install_routes(httplib::Server& srv, SessionRegistry& reg) {
    using detail::guarded;
    using detail::send_json;
    using Req = httplib::Request;
    using Res = httplib::Response;

    srv.Post("/sessions", guarded([&](const Req&, Res& res) {
        send_json(res, 201, Json{{"id", reg.create()->id()}});
    }));
    srv.Get("/sessions/:id", guarded([&](const Req& req, Res& res) {
        send_json(res, 200, reg.get(req.path_params.at("id"))->summary());
    }));
    srv.Delete("/sessions/:id", guarded([&](const Req& req, Res& res) {
        if (!reg.remove(req.path_params.at("id"))) throw NotFound("unknown session '" + req.path_params.at("id") + "'");
        res.status = 204;
    }));
    srv.Post("/sessions/:id/meshes", guarded([&](const Req& req, Res& res) {
        auto s = reg.get(req.path_params.at("id"));
        const std::string name = req.has_param("name") ? req.get_param_value("name") : "mesh" + std::to_string(s->summary()["instances"].size() + 1);
        const long rev = s->upload_mesh(name, req.body);
        send_json(res, 201, Json{{"instance", name}, {"revision", rev}});
    }));
    srv.Post("/sessions/:id/instances/:name/rig", guarded([&](const Req& req, Res& res) {
        auto s = reg.get(req.path_params.at("id"));
        send_json(res, 200, Json{{"revision", s->attach_rig(req.path_params.at("name"), detail::body_json(req))}});
    }));
    srv.Post("/sessions/:id/instances/:name/deform", guarded([&](const Req& req, Res& res) {
        auto s = reg.get(req.path_params.at("id"));
        send_json(res, 200, Json{{"revision", s->deform(req.path_params.at("name"), detail::body_json(req))}});
    }));
    srv.Get("/sessions/:id/instances/:name/mesh", guarded([&](const Req& req, Res& res) {
        auto s = reg.get(req.path_params.at("id"));
        std::optional<long> rev;
        if (req.has_param("rev")) {
            try {
                rev = std::stol(req.get_param_value("rev"));
            } catch (const std::exception&) {
                throw InvalidArgument("'rev' must be an integer");
            }
        }
        res.set_content(s->mesh_buffer(req.path_params.at("name"), rev), "application/octet-stream");
    }));
    srv.Post("/sessions/:id/edits", guarded([&](const Req& req, Res& res) {
        auto s = reg.get(req.path_params.at("id"));
        send_json(res, 200, Json{{"revision", s->apply_record(detail::body_json(req))}});
    }));
    srv.Post("/sessions/:id/render", guarded([&](const Req& req, Res& res) {
        auto s = reg.get(req.path_params.at("id"));
        const auto a = s->render();
        send_json(res, 200,
                  Json{{"color", detail::artifact_url(*s, a.color)},
                       {"depth", detail::artifact_url(*s, a.depth)},
                       {"depth_meta", detail::artifact_url(*s, depth_meta_path(a.depth))},
                       {"mask", detail::artifact_url(*s, a.mask)}});
    }));
    srv.Post("/sessions/:id/enhance", guarded([&](const Req& req, Res& res) {
        auto s = reg.get(req.path_params.at("id"));
        const auto a = s->enhance(detail::body_json(req));
        send_json(res, 200,
                  Json{{"image", detail::artifact_url(*s, a.image)}, {"audit", detail::artifact_url(*s, a.audit)}, {"steps", a.steps}});
    }));
    srv.Get("/sessions/:id/program", guarded([&](const Req& req, Res& res) {
        send_json(res, 200, reg.get(req.path_params.at("id"))->program());
    }));
    srv.Post("/sessions/:id/stream", guarded([&](const Req& req, Res& res) {
        auto s = reg.get(req.path_params.at("id"));
        send_json(res, 202, Json{{"seq", s->submit_stream(detail::body_json(req))}});
    }));
    srv.Get("/sessions/:id/stream", guarded([&](const Req& req, Res& res) {
        auto s = reg.get(req.path_params.at("id"));
        std::uint64_t after = 0;
        long timeout_ms = 1000;
        try {
            if (req.has_param("after")) after = std::stoull(req.get_param_value("after"));
            if (req.has_param("timeout_ms")) timeout_ms = std::clamp(std::stol(req.get_param_value("timeout_ms")), 0L, 30000L);
        } catch (const std::exception&) {
            throw InvalidArgument("'after' and 'timeout_ms' must be integers");
        }
        const auto frame = s->stream().wait_frame(after, std::chrono::milliseconds(timeout_ms));
        if (!frame) {
            res.status = 204;
            return;
        }
        res.set_content(encode_frame(*frame), "application/octet-stream");
    }));
    srv.Get(R"(/sessions/([^/]+)/artifacts/(.+))", guarded([&](const Req& req, Res& res) {
        auto s = reg.get(req.matches[1]);
        const std::string rel = req.matches[2];
        if (!detail::safe_relative(rel)) throw NotFound("artifact '" + rel + "' not found");
        const auto path = s->artifact_dir() / rel;
        if (!std::filesystem::is_regular_file(path)) throw NotFound("artifact '" + rel + "' not found");
        res.set_content(read_file_bytes(path), detail::content_type(path));
    }));
}

} // namespace sculpt
