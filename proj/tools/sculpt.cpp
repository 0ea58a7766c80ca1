// SPDX-License-Identifier: Apache-2.0
// Command-line front end: batch edit programs, renders, metrics and the session server.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdlib>
#include <iostream>

#include "sculpt/metrics/depth_metrics.hpp"
#include "sculpt/service/project.hpp"
#include "sculpt/service/server.hpp"

namespace fs = std::filesystem;
using namespace sculpt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitExecution = 3;

void configure_logging() {
    spdlog::set_level(spdlog::level::warn);
    if (const char* level = std::getenv("SCULPT_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

struct BatchInput {
    EditProgram program;
    fs::path asset_root;
};

BatchInput load_batch(const std::string& edits, const std::string& assets, const std::string& project) {
    if (!project.empty()) return {project_program(load_project(project)), project};
    if (!fs::exists(edits)) throw IoError("edit program '" + edits + "' not found");
    return {load_edit_program(edits), assets.empty() ? fs::path(edits).parent_path() : fs::path(assets)};
}

Json op_json(const OpReport& r, const fs::path& out) {
    Json outputs = Json::array();
    for (const auto& p : r.outputs) {
        outputs.push_back(Json{{"path", fs::relative(p, out).generic_string()}, {"sha256", sha256_file(p)}});
        if (p.extension() == ".png" && fs::exists(depth_meta_path(p)))
            outputs.push_back(Json{{"path", fs::relative(depth_meta_path(p), out).generic_string()},
                                   {"sha256", sha256_file(depth_meta_path(p))}});
    }
    Json j{{"index", r.index}, {"op", r.op}, {"millis", r.millis}, {"outputs", std::move(outputs)}};
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

// Runs a program record by record so the report keeps the ops that finished
// before a failure. `final_prefix` adds a render of the final scene.
int run_batch(const std::string& edits, const std::string& assets, const std::string& project, const fs::path& out,
              bool skip_render_ops, const std::string& final_prefix) {
    fs::create_directories(out);
    Json report{{"status", "ok"}, {"ops", Json::array()}};
    auto finish = [&](int code) {
        write_file_bytes(out / "report.json", report.dump(2) + "\n");
        return code;
    };
    BatchInput in;
    try {
        in = load_batch(edits, assets, project);
    } catch (const NotFound& e) {
        spdlog::error("{}", e.what());
        report["status"] = "execution_error";
        report["error"] = Json{{"record", nullptr}, {"message", e.what()}};
        return finish(kExitExecution);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        report["status"] = "parse_error";
        const auto* pe = dynamic_cast<const ProgramParseError*>(&e);
        report["error"] = Json{{"record", pe && pe->record() ? Json(*pe->record()) : Json(nullptr)}, {"message", e.what()}};
        return finish(kExitParse);
    }
    EditContext ctx;
    ctx.asset_root = in.asset_root;
    ctx.out_dir = out;
    try {
        Scene scene = prepare_scene(in.program, ctx);
        for (std::size_t i = 0; i < in.program.edits.size(); ++i) {
            const EditOp& op = in.program.edits[i];
            if (skip_render_ops && std::holds_alternative<RenderOp>(op)) continue;
            OpReport rep;
            scene = apply_edit(std::move(scene), op, i, ctx, &rep);
            spdlog::info("record {} ({}) {:.1f} ms", i, rep.op, rep.millis);
            report["ops"].push_back(op_json(rep, out));
        }
        if (!final_prefix.empty()) {
            OpReport rep;
            apply_edit(scene, RenderOp{final_prefix}, in.program.edits.size(), ctx, &rep);
            report["ops"].push_back(op_json(rep, out));
        }
    } catch (const ExecutionError& e) {
        spdlog::error("{}", e.what());
        report["status"] = "execution_error";
        report["error"] = Json{{"record", e.record()}, {"message", e.what()}};
        return finish(kExitExecution);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        report["status"] = "execution_error";
        report["error"] = Json{{"record", nullptr}, {"message", e.what()}};
        return finish(kExitExecution);
    }
    return finish(kExitOk);
}

int run_metrics(const std::string& a, const std::string& b, const std::string& align) {
    DepthImage da, db;
    DepthAlign mode;
    try {
        mode = parse_depth_align(align);
        da = import_depth_png(a);
        db = import_depth_png(b);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    }
    try {
        std::cout << format_metric(d_rmse(da, db, mode)) << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitExecution;
    }
    return kExitOk;
}

httplib::Server* g_server = nullptr;

int run_server(int port, const fs::path& root) {
    SessionRegistry reg(root);
    httplib::Server srv;
    install_routes(srv, reg);
    srv.set_logger([](const httplib::Request& req, const httplib::Response& res) {
        spdlog::info("{} {} -> {}", req.method, req.path, res.status);
    });
    g_server = &srv;
    std::signal(SIGINT, [](int) { g_server->stop(); });
    std::signal(SIGTERM, [](int) { g_server->stop(); });
    spdlog::warn("listening on port {}", port);
    if (!srv.listen("0.0.0.0", port)) {
        spdlog::error("cannot listen on port {}", port);
        return 1;
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    configure_logging();
    CLI::App app{"Mesh sculpting engine: edit programs, renders, depth metrics and the session server"};
    app.require_subcommand(1);

    std::string edits, assets, project, out = "out", prefix = "final";
    auto* run = app.add_subcommand("run", "Execute an edit program and write its artifacts and report.json");
    run->add_option("--edits", edits, "Edit program (.sculpt.json)");
    run->add_option("--assets", assets, "Asset root (default: the program's directory)");
    run->add_option("--project", project, "Project directory instead of --edits/--assets");
    run->add_option("--out", out, "Output directory")->capture_default_str();

    auto* render = app.add_subcommand("render", "Apply an edit program's edits and render the final scene");
    render->add_option("--edits", edits, "Edit program (.sculpt.json)");
    render->add_option("--assets", assets, "Asset root (default: the program's directory)");
    render->add_option("--project", project, "Project directory instead of --edits/--assets");
    render->add_option("--out", out, "Output directory")->capture_default_str();
    render->add_option("--prefix", prefix, "Artifact name prefix")->capture_default_str();

    std::string depth_a, depth_b, align = "none";
    auto* metrics = app.add_subcommand("metrics", "Depth-map metrics");
    metrics->require_subcommand(1);
    auto* drmse = metrics->add_subcommand("d-rmse", "Root-mean-square discrepancy of two 16-bit depth PNGs");
    drmse->add_option("a", depth_a, "First depth PNG")->required();
    drmse->add_option("b", depth_b, "Second depth PNG")->required();
    drmse->add_option("--align", align, "none or affine")->capture_default_str();

    int port = 7431;
    std::string sessions_root = "sessions";
    auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
    serve->add_option("--port", port, "TCP port")->capture_default_str();
    serve->add_option("--out", sessions_root, "Directory for session assets and artifacts")->capture_default_str();

    for (auto* sub : {run, render}) {
        sub->callback([sub] {
            if (sub->count("--project") == 0 && sub->count("--edits") == 0)
                throw CLI::ValidationError("--edits or --project is required");
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitParse;
    }

    if (*run) return run_batch(edits, assets, project, out, false, "");
    if (*render) return run_batch(edits, assets, project, out, true, prefix);
    if (*drmse) return run_metrics(depth_a, depth_b, align);
    if (*serve) return run_server(port, sessions_root);
    return kExitParse;
}
