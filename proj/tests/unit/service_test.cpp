// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <future>
#include <thread>

#include "sculpt/mesh/primitives.hpp"
#include "sculpt/metrics/depth_metrics.hpp"
#include "sculpt/service/project.hpp"
#include "sculpt/service/server.hpp"
#include "support/temp_dir.hpp"

using namespace sculpt;
namespace fs = std::filesystem;

namespace {

std::string cube_obj() { return format_obj(make_box(Vec3::Constant(-0.5), Vec3::Constant(0.5))); }

Json handle_payload(const TriangleMesh& m, double lift) {
    Json targets = Json::array();
    for (int i : {0, 1, 2}) {
        const Vec3 p = m.vertex(i);
        targets.push_back({p.x(), p.y() + lift, p.z()});
    }
    return Json{{"ids", {0, 1, 2}}, {"targets", targets}};
}

SessionOptions manual_options() {
    SessionOptions o = default_session_options();
    o.manual_stream = true;
    return o;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SCULPT_CLI) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string run_cli_stdout(const std::string& args) {
    const std::string cmd = std::string(SCULPT_CLI) + " " + args + " 2>/dev/null";
    std::string out;
    FILE* pipe = popen(cmd.c_str(), "r");
    char buf[256];
    while (pipe && fgets(buf, sizeof buf, pipe)) out += buf;
    if (pipe) pclose(pipe);
    return out;
}

Json read_json(const fs::path& p) { return Json::parse(oracle::read_bytes(p)); }

} // namespace

// ---- hashing and geometry buffers ----

TEST(Hashing, KnownDigests) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(GeometryBuffer, RoundTripAndLayout) {
    const TriangleMesh m = make_icosphere(1, 0.5);
    const std::string bytes = encode_geometry(m);
    ASSERT_EQ(bytes.size(), 8u + 12u * m.vertex_count() + 12u * m.triangle_count());
    EXPECT_EQ(static_cast<unsigned char>(bytes[0]), m.vertex_count() & 0xff);
    const GeometryBuffer g = decode_geometry(bytes);
    ASSERT_EQ(g.positions.size(), 3u * m.vertex_count());
    ASSERT_EQ(g.indices.size(), 3u * m.triangle_count());
    for (int i = 0; i < m.vertex_count(); ++i)
        for (int k = 0; k < 3; ++k) EXPECT_EQ(g.positions[3 * i + k], static_cast<float>(m.positions(i, k)));
    for (int t = 0; t < m.triangle_count(); ++t)
        for (int k = 0; k < 3; ++k) EXPECT_EQ(g.indices[3 * t + k], static_cast<std::uint32_t>(m.triangles(t, k)));
    EXPECT_THROW(decode_geometry(bytes.substr(0, bytes.size() - 1)), ParseError);
}

TEST(StreamFrameWire, RoundTrip) {
    StreamFrame f{7, 12, "cube", {3, 4}, "", "geom"};
    const auto [header, geometry] = decode_frame(encode_frame(f));
    EXPECT_EQ(header["frame"], 7);
    EXPECT_EQ(header["revision"], 12);
    EXPECT_EQ(header["instance"], "cube");
    EXPECT_EQ(header["acks"], Json::array({3, 4}));
    EXPECT_FALSE(header.contains("error"));
    EXPECT_EQ(geometry, "geom");
    EXPECT_THROW(decode_frame("ab"), ParseError);
}

// ---- coalescing ----

TEST(Coalescer, TwoRapidRequestsGiveOneSolveForTheLatest) {
    std::vector<std::uint64_t> solved;
    Coalescer c([&](const StreamRequest& r) {
        solved.push_back(r.seq);
        return StreamFrame{};
    }, true);
    const auto a = c.submit("cube", Json{{"x", 1}});
    const auto b = c.submit("cube", Json{{"x", 2}});
    EXPECT_TRUE(c.run_once());
    EXPECT_FALSE(c.run_once());
    ASSERT_EQ(solved, std::vector<std::uint64_t>{b});
    const auto st = c.stats();
    EXPECT_EQ(st.submitted, 2u);
    EXPECT_EQ(st.solves, 1u);
    EXPECT_EQ(st.dropped, 1u);
    const auto frame = c.wait_frame(0, std::chrono::milliseconds(0));
    ASSERT_TRUE(frame);
    EXPECT_EQ(frame->acks, (std::vector<std::uint64_t>{a, b}));
}

TEST(Coalescer, InstancesQueueSeparatelyInArrivalOrder) {
    std::vector<std::string> order;
    Coalescer c([&](const StreamRequest& r) {
        order.push_back(r.instance);
        return StreamFrame{};
    }, true);
    c.submit("a", {});
    c.submit("b", {});
    c.submit("a", {});
    while (c.run_once()) {
    }
    EXPECT_EQ(order, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(c.stats().dropped, 1u);
}

TEST(Coalescer, WorkerThreadAnswersEveryRequest) {
    Coalescer c([](const StreamRequest&) {
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        return StreamFrame{};
    }, false);
    for (int i = 0; i < 20; ++i) c.submit("a", {});
    c.wait_idle();
    std::set<std::uint64_t> acked;
    std::uint64_t after = 0;
    while (auto f = c.wait_frame(after, std::chrono::milliseconds(0))) {
        acked.insert(f->acks.begin(), f->acks.end());
        after = f->index;
    }
    EXPECT_EQ(acked.size(), 20u);
    const auto st = c.stats();
    EXPECT_EQ(st.solves + st.dropped, 20u);
    EXPECT_LT(st.solves, 20u);
}

// ---- sessions ----

TEST(SessionOps, RevisionsIncreaseAndOldOnesExpire) {
    oracle::TempDir dir;
    Session s("t", dir.path());
    EXPECT_EQ(s.revision(), 0);
    EXPECT_EQ(s.upload_mesh("cube", cube_obj()), 1);
    EXPECT_EQ(s.apply_record(Json{{"op", "translate"}, {"target", "cube"}, {"vector", {0.1, 0, 0}}}), 2);
    const auto before = s.mesh_buffer("cube", 2);
    EXPECT_EQ(s.deform("cube", handle_payload(make_box(Vec3::Constant(-0.5), Vec3::Constant(0.5)), 0.2)), 3);
    EXPECT_EQ(s.mesh_buffer("cube", 2), before);
    EXPECT_NE(s.mesh_buffer("cube", 3), before);
    EXPECT_THROW(s.mesh_buffer("cube", 1), NotFound);
    const auto a = s.render();
    EXPECT_EQ(s.revision(), 3);
    EXPECT_TRUE(fs::exists(a.color) && fs::exists(a.depth) && fs::exists(a.mask));
}

TEST(SessionOps, ErrorsAreTyped) {
    oracle::TempDir dir;
    Session s("t", dir.path());
    EXPECT_THROW(s.upload_mesh("cube", "v 0 0 0\nf 1 2 3\n"), ParseError);
    s.upload_mesh("cube", cube_obj());
    EXPECT_THROW(s.upload_mesh("cube", cube_obj()), ConflictError);
    EXPECT_THROW(s.upload_mesh("../x", cube_obj()), InvalidArgument);
    EXPECT_THROW(s.deform("nope", Json{{"targets", Json::array()}}), NotFound);
    EXPECT_THROW(s.apply_record(Json{{"op", "load"}, {"name", "x"}, {"mesh", "y.obj"}}), InvalidArgument);
    EXPECT_THROW(s.deform("cube", Json{{"rotations", Json::object()}}), ExecutionError);
}

TEST(SessionOps, RigAttachRejectedWhileSolving) {
    oracle::TempDir dir;
    Session s("t", dir.path());
    const TriangleMesh big = make_icosphere(5, 0.5);
    s.upload_mesh("ball", format_obj(big));
    bool saw_conflict = false;
    for (int attempt = 0; attempt < 5 && !saw_conflict; ++attempt) {
        auto solve = std::async(std::launch::async, [&] { return s.deform("ball", handle_payload(big, 0.05 * (attempt + 1))); });
        while (!s.solving() && solve.wait_for(std::chrono::seconds(0)) != std::future_status::ready) std::this_thread::yield();
        if (s.solving()) {
            try {
                s.attach_rig("ball", Json{{"type", "handles"}, {"ids", {0}}});
            } catch (const ConflictError&) {
                saw_conflict = true;
            }
        }
        solve.get();
    }
    EXPECT_TRUE(saw_conflict);
    EXPECT_NO_THROW(s.attach_rig("ball", Json{{"type", "handles"}, {"ids", {0}}}));
}

TEST(SessionOps, StreamDeliversRevisionsInOrder) {
    oracle::TempDir dir;
    Session s("t", dir.path(), manual_options());
    s.upload_mesh("cube", cube_obj());
    const TriangleMesh box = make_box(Vec3::Constant(-0.5), Vec3::Constant(0.5));
    Json m1 = handle_payload(box, 0.1), m2 = handle_payload(box, 0.2);
    m1["instance"] = m2["instance"] = "cube";
    s.submit_stream(m1);
    s.submit_stream(m2);
    EXPECT_TRUE(s.stream().run_once());
    Json m3 = handle_payload(box, 0.3);
    m3["instance"] = "cube";
    s.submit_stream(m3);
    EXPECT_TRUE(s.stream().run_once());
    const auto f1 = s.stream().wait_frame(0, std::chrono::milliseconds(0));
    const auto f2 = s.stream().wait_frame(1, std::chrono::milliseconds(0));
    ASSERT_TRUE(f1 && f2);
    EXPECT_EQ(f1->acks, (std::vector<std::uint64_t>{1, 2}));
    EXPECT_LT(f1->revision, f2->revision);
    EXPECT_EQ(f2->geometry, s.mesh_buffer("cube", f2->revision));
    EXPECT_EQ(s.stream().stats().dropped, 1u);
    EXPECT_THROW(s.submit_stream(Json{{"instance", "nope"}}), NotFound);
}

TEST(SessionOps, EnhanceWritesImageAndAudit) {
    oracle::TempDir dir;
    Session s("t", dir.path());
    s.upload_mesh("cube", cube_obj());
    Json cfg = enhancement_config_json(EnhancementConfig{});
    cfg["T"] = 10;
    cfg["feature_layers"] = {"up"};
    cfg["attention_layers"] = {"mid"};
    const auto a = s.enhance(Json{{"prompt", "a cube"}, {"config", cfg}});
    EXPECT_EQ(a.steps, 11u);
    EXPECT_EQ(read_color_png(a.image).width, Camera{}.width);
    std::istringstream audit(oracle::read_bytes(a.audit));
    std::string line;
    int n = 0;
    while (std::getline(audit, line)) {
        Json::parse(line);
        ++n;
    }
    EXPECT_EQ(n, 11);
}

// ---- projects ----

TEST(ProjectIo, RoundTripPreservesForeignKeys) {
    oracle::TempDir dir;
    Project p;
    p.manifest = Json::parse(R"({
        "units": "cm", "x-editor": {"theme": "dark", "zoom": [1, 2]},
        "rigs": {"cube": {"type": "handles", "ids": [0, 1]}},
        "edits": [{"op": "load", "name": "cube", "mesh": "meshes/cube.obj"}]})");
    p.assets["meshes/cube.obj"] = cube_obj();
    save_project(p, dir.path());
    const Project q = load_project(dir.path());
    EXPECT_EQ(q.manifest, manifest_with_asset_index(p));
    EXPECT_EQ(q.manifest["x-editor"], p.manifest["x-editor"]);
    EXPECT_EQ(q.assets, p.assets);
    const EditProgram prog = project_program(q);
    ASSERT_EQ(prog.edits.size(), 2u);
    EXPECT_TRUE(std::holds_alternative<RigOp>(prog.edits[1]));
    EXPECT_EQ(prog.units, "cm");
}

TEST(ProjectIo, MissingAssetIsNamed) {
    oracle::TempDir dir;
    Project p;
    p.manifest = Json{{"edits", Json::array({Json{{"op", "load"}, {"name", "c"}, {"mesh", "meshes/cube.obj"}}})}};
    p.assets["meshes/cube.obj"] = cube_obj();
    save_project(p, dir.path());
    fs::remove(dir / "meshes/cube.obj");
    try {
        load_project(dir.path());
        FAIL();
    } catch (const NotFound& e) {
        EXPECT_NE(std::string(e.what()).find("meshes/cube.obj"), std::string::npos);
    }
    oracle::write_text(dir / "meshes/cube.obj", "tampered");
    EXPECT_THROW(load_project(dir.path()), IoError);
}

// ---- HTTP ----

class HttpService : public ::testing::Test {
protected:
    void SetUp() override {
        install_routes(srv, reg);
        port = srv.bind_to_any_port("127.0.0.1");
        ASSERT_GT(port, 0);
        thread = std::thread([this] { srv.listen_after_bind(); });
        srv.wait_until_ready();
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
        client->set_read_timeout(std::chrono::seconds(60));
    }
    void TearDown() override {
        srv.stop();
        thread.join();
    }

    std::string create_session() {
        const auto r = client->Post("/sessions");
        EXPECT_EQ(r->status, 201);
        return Json::parse(r->body)["id"];
    }

    oracle::TempDir dir;
    SessionRegistry reg{dir.path()};
    httplib::Server srv;
    std::thread thread;
    int port = 0;
    std::unique_ptr<httplib::Client> client;
};

TEST_F(HttpService, CreateUploadRenderGivesThreeMatchingArtifacts) {
    const std::string id = create_session();
    const auto up = client->Post("/sessions/" + id + "/meshes?name=cube", cube_obj(), "text/plain");
    ASSERT_EQ(up->status, 201);
    EXPECT_EQ(Json::parse(up->body)["instance"], "cube");
    const auto r = client->Post("/sessions/" + id + "/render");
    ASSERT_EQ(r->status, 200);
    const Json urls = Json::parse(r->body);
    std::vector<std::pair<int, int>> dims;
    for (const char* key : {"color", "depth", "mask"}) {
        const auto a = client->Get(urls[key].get<std::string>());
        ASSERT_EQ(a->status, 200) << key;
        const auto path = dir / ("art." + std::string(key) + ".png");
        write_file_bytes(path, a->body);
        const PngData png = read_png(path);
        dims.emplace_back(png.width, png.height);
    }
    EXPECT_EQ(dims[0], dims[1]);
    EXPECT_EQ(dims[1], dims[2]);
    EXPECT_EQ(client->Get(urls["depth_meta"].get<std::string>())->status, 200);
}

TEST_F(HttpService, ErrorStatuses) {
    const std::string id = create_session();
    EXPECT_EQ(client->Get("/sessions/zzz")->status, 404);
    EXPECT_EQ(client->Post("/sessions/" + id + "/meshes?name=bad", "f 1 2 3\n", "text/plain")->status, 400);
    const auto d = client->Post("/sessions/" + id + "/instances/ghost/deform", R"({"targets": []})", "application/json");
    EXPECT_EQ(d->status, 404);
    EXPECT_NE(Json::parse(d->body)["error"].get<std::string>().find("ghost"), std::string::npos);
    EXPECT_EQ(client->Post("/sessions/" + id + "/edits", "{not json", "application/json")->status, 400);
    EXPECT_EQ(client->Get("/sessions/" + id + "/artifacts/../secret")->status, 404);
    client->Post("/sessions/" + id + "/meshes?name=cube", cube_obj(), "text/plain");
    EXPECT_EQ(client->Post("/sessions/" + id + "/meshes?name=cube", cube_obj(), "text/plain")->status, 409);
    EXPECT_EQ(client->Post("/sessions/" + id + "/instances/cube/deform", R"({"rotations": {}})", "application/json")->status, 422);
    EXPECT_EQ(client->Get("/sessions/" + id + "/instances/cube/mesh?rev=0")->status, 404);
}

TEST_F(HttpService, GeometryEndpointMatchesRevision) {
    const std::string id = create_session();
    client->Post("/sessions/" + id + "/meshes?name=cube", cube_obj(), "text/plain");
    const auto t = client->Post("/sessions/" + id + "/edits", R"({"op": "translate", "target": "cube", "vector": [1, 0, 0]})",
                                "application/json");
    ASSERT_EQ(t->status, 200);
    EXPECT_EQ(Json::parse(t->body)["revision"], 2);
    const GeometryBuffer g1 = decode_geometry(client->Get("/sessions/" + id + "/instances/cube/mesh?rev=1")->body);
    const GeometryBuffer g2 = decode_geometry(client->Get("/sessions/" + id + "/instances/cube/mesh")->body);
    ASSERT_EQ(g1.positions.size(), g2.positions.size());
    for (std::size_t i = 0; i < g1.positions.size(); i += 3) EXPECT_FLOAT_EQ(g2.positions[i] - g1.positions[i], 1.0f);
}

TEST_F(HttpService, StreamRoundTrip) {
    const std::string id = create_session();
    client->Post("/sessions/" + id + "/meshes?name=cube", cube_obj(), "text/plain");
    Json msg = handle_payload(make_box(Vec3::Constant(-0.5), Vec3::Constant(0.5)), 0.25);
    msg["instance"] = "cube";
    const auto sub = client->Post("/sessions/" + id + "/stream", msg.dump(), "application/json");
    ASSERT_EQ(sub->status, 202);
    const std::uint64_t seq = Json::parse(sub->body)["seq"];
    const auto fr = client->Get("/sessions/" + id + "/stream?after=0&timeout_ms=20000");
    ASSERT_EQ(fr->status, 200);
    const auto [header, geometry] = decode_frame(fr->body);
    EXPECT_EQ(header["acks"].back(), seq);
    EXPECT_EQ(header["revision"], 2);
    EXPECT_EQ(decode_geometry(geometry).positions.size(), 24u);
    EXPECT_EQ(client->Get("/sessions/" + id + "/stream?after=1&timeout_ms=10")->status, 204);
}

TEST_F(HttpService, EndpointsMatchEditProgram) {
    const std::string id = create_session();
    client->Post("/sessions/" + id + "/meshes?name=cube", cube_obj(), "text/plain");
    client->Post("/sessions/" + id + "/edits", R"({"op": "rotate", "target": "cube", "degrees": 30, "axis": [0, 1, 0]})",
                 "application/json");
    client->Post("/sessions/" + id + "/instances/cube/rig", R"({"type": "handles", "ids": [0, 1, 2]})", "application/json");
    const auto box = make_box(Vec3::Constant(-0.5), Vec3::Constant(0.5));
    Json deform = handle_payload(box, 0.2);
    deform.erase("ids");
    ASSERT_EQ(client->Post("/sessions/" + id + "/instances/cube/deform", deform.dump(), "application/json")->status, 200);
    const Json urls = Json::parse(client->Post("/sessions/" + id + "/render")->body);
    const Json program = Json::parse(client->Get("/sessions/" + id + "/program")->body);

    const auto session = reg.get(id);
    EditContext ctx;
    ctx.asset_root = session->asset_dir();
    ctx.out_dir = dir / "batch";
    run_edit_program(parse_edit_program_document(program), ctx);
    for (const char* key : {"color", "depth", "depth_meta", "mask"}) {
        const std::string url = urls[key];
        const std::string rel = url.substr(url.find("/artifacts/") + 11);
        EXPECT_EQ(sha256_hex(client->Get(url)->body), sha256_file(ctx.out_dir / rel)) << key;
    }
}

// ---- CLI ----

TEST(Cli, RotationSampleRunsAndIsDeterministic) {
    oracle::TempDir dir;
    const std::string edits = std::string(SCULPT_SAMPLES) + "/rotate.sculpt.json";
    ASSERT_EQ(run_cli("run --edits " + edits + " --out " + (dir / "a").string()), 0);
    ASSERT_EQ(run_cli("run --edits " + edits + " --out " + (dir / "b").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "a/rotate/after_depth.png"));
    const Json ra = read_json(dir / "a/report.json"), rb = read_json(dir / "b/report.json");
    EXPECT_EQ(ra["status"], "ok");
    ASSERT_EQ(ra["ops"].size(), 4u);
    for (std::size_t i = 0; i < ra["ops"].size(); ++i) EXPECT_EQ(ra["ops"][i]["outputs"], rb["ops"][i]["outputs"]);
    EXPECT_EQ(ra["ops"][3]["outputs"].size(), 4u);
}

TEST(Cli, ExitCodes) {
    oracle::TempDir dir;
    oracle::write_text(dir / "missing.json", R"({"edits": [
        {"op": "load", "name": "a", "mesh": "a.obj"}, {"op": "add_instance", "name": "b", "mesh": "b.obj"}]})");
    oracle::write_text(dir / "a.obj", cube_obj());
    EXPECT_EQ(run_cli("run --edits " + (dir / "missing.json").string() + " --out " + (dir / "o1").string()), 3);
    const Json report = read_json(dir / "o1/report.json");
    EXPECT_EQ(report["status"], "execution_error");
    EXPECT_EQ(report["error"]["record"], 1);
    EXPECT_EQ(report["ops"].size(), 1u);

    oracle::write_text(dir / "bad.json", R"({"edits": [{"op": "load", "name": "a", "mesh": "a.obj"}, {"op": "explode"}]})");
    EXPECT_EQ(run_cli("run --edits " + (dir / "bad.json").string() + " --out " + (dir / "o2").string()), 2);
    EXPECT_EQ(read_json(dir / "o2/report.json")["error"]["record"], 1);
    EXPECT_EQ(run_cli("run --edits " + (dir / "absent.json").string() + " --out " + (dir / "o3").string()), 2);
    EXPECT_EQ(run_cli("run"), 2);
}

TEST(Cli, RenderAndMetrics) {
    oracle::TempDir dir;
    const std::string edits = std::string(SCULPT_SAMPLES) + "/rotate.sculpt.json";
    ASSERT_EQ(run_cli("render --edits " + edits + " --out " + (dir / "r").string()), 0);
    ASSERT_TRUE(fs::exists(dir / "r/final_depth.png"));
    EXPECT_FALSE(fs::exists(dir / "r/rotate"));
    ASSERT_EQ(run_cli("run --edits " + edits + " --out " + (dir / "a").string()), 0);
    const std::string same = (dir / "r/final_depth.png").string() + " " + (dir / "a/rotate/after_depth.png").string();
    EXPECT_EQ(run_cli_stdout("metrics d-rmse " + same), "0\n");
    const std::string diff = (dir / "a/rotate/before_depth.png").string() + " " + (dir / "a/rotate/after_depth.png").string();
    const std::string value = run_cli_stdout("metrics d-rmse " + diff);
    const double expected = d_rmse(import_depth_png(dir / "a/rotate/before_depth.png"),
                                   import_depth_png(dir / "a/rotate/after_depth.png"), DepthAlign::none);
    EXPECT_EQ(value, format_metric(expected) + "\n");
    EXPECT_EQ(run_cli("metrics d-rmse " + diff + " --align sideways"), 2);
}
