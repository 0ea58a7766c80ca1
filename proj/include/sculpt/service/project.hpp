// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>

#include "sculpt/enhance/enhancement.hpp"
#include "sculpt/scene/edit_program.hpp"
#include "sculpt/service/hashing.hpp"

namespace sculpt {

/// A project directory: manifest.json plus asset files (meshes/, grids/, renders/).
/// The manifest is kept as parsed, so keys this library does not know survive a
/// load/save cycle unchanged. Known keys: units, assets, rigs, edits, camera,
/// background, enhancement.
struct Project {
    Json manifest = Json::object();
    std::map<std::string, std::string> assets;  // relative path -> bytes
};

inline constexpr const char* kManifestName = "manifest.json";

/// The manifest as written by `save_project`: "assets" lists every asset with its SHA-256.
inline Json manifest_with_asset_index(const Project& p) {
    Json m = p.manifest;
    Json index = Json::array();
    for (const auto& [path, bytes] : p.assets) index.push_back(Json{{"path", path}, {"sha256", sha256_hex(bytes)}});
    m["assets"] = std::move(index);
    return m;
}

inline void save_project(const Project& p, const std::filesystem::path& dir) {
    for (const auto& [path, bytes] : p.assets) {
        if (!detail::safe_relative(path)) throw InvalidArgument("asset path '" + path + "' escapes the project directory");
        write_file_bytes(dir / path, bytes);
    }
    write_file_bytes(dir / kManifestName, manifest_with_asset_index(p).dump(2) + "\n");
}

namespace detail {

// Asset files an edit program refers to.
inline std::vector<std::string> program_references(const Json& doc) {
    std::vector<std::string> refs;
    if (doc.contains("background") && doc["background"].is_string()) refs.push_back(doc["background"].get<std::string>());
    if (!doc.contains("edits") || !doc["edits"].is_array()) return refs;
    for (const auto& rec : doc["edits"]) {
        if (!rec.is_object()) continue;
        for (const char* key : {"mesh", "grid", "rig"})
            if (rec.contains(key) && rec[key].is_string()) refs.push_back(rec[key].get<std::string>());
    }
    return refs;
}

} // namespace detail

/// Loads and verifies a project: every listed asset must exist inside the
/// directory with a matching hash, and every file the edits refer to must exist.
inline Project load_project(const std::filesystem::path& dir) {
    const auto manifest_path = dir / kManifestName;
    if (!std::filesystem::exists(manifest_path)) throw NotFound("project manifest '" + manifest_path.string() + "' not found");
    Project p;
    try {
        p.manifest = Json::parse(read_file_bytes(manifest_path));
    } catch (const Json::parse_error& e) {
        throw ParseError(0, manifest_path.string() + ": " + e.what());
    }
    if (!p.manifest.is_object()) throw ParseError(0, manifest_path.string() + ": manifest must be a JSON object");
    const Json assets = p.manifest.value("assets", Json::array());
    if (!assets.is_array()) throw ParseError(0, "manifest 'assets' must be an array");
    for (const auto& a : assets) {
        if (!a.is_object() || !a.contains("path") || !a["path"].is_string())
            throw ParseError(0, "manifest asset entries need a string 'path'");
        const std::string rel = a["path"].get<std::string>();
        if (!detail::safe_relative(rel)) throw ParseError(0, "asset path '" + rel + "' escapes the project directory");
        const auto full = dir / rel;
        if (!std::filesystem::exists(full)) throw NotFound("missing project asset '" + full.string() + "'");
        std::string bytes = read_file_bytes(full);
        if (a.contains("sha256") && a["sha256"] != sha256_hex(bytes))
            throw IoError("asset '" + full.string() + "' does not match its recorded hash");
        p.assets.emplace(rel, std::move(bytes));
    }
    if (p.manifest.contains("edits")) {
        for (const auto& rel : detail::program_references(p.manifest)) {
            if (!detail::safe_relative(rel)) throw ParseError(0, "reference '" + rel + "' escapes the project directory");
            if (!std::filesystem::exists(dir / rel)) throw NotFound("missing project asset '" + (dir / rel).string() + "'");
        }
    }
    if (p.manifest.contains("enhancement")) parse_enhancement_config(p.manifest["enhancement"]);
    return p;
}

/// The edit program stored in a project. Rigs listed under "rigs" are attached
/// right after the record that loads their instance.
inline EditProgram project_program(const Project& p) {
    Json doc{{"units", p.manifest.value("units", std::string("m"))}};
    if (p.manifest.contains("camera")) doc["camera"] = p.manifest["camera"];
    if (p.manifest.contains("background")) doc["background"] = p.manifest["background"];
    const Json rigs = p.manifest.value("rigs", Json::object());
    Json edits = Json::array();
    for (const auto& rec : p.manifest.value("edits", Json::array())) {
        edits.push_back(rec);
        if (rec.is_object() && rec.value("op", std::string()) == "load" && rec.contains("name") && rec["name"].is_string()) {
            const std::string name = rec["name"].get<std::string>();
            if (rigs.contains(name)) edits.push_back(Json{{"op", "rig"}, {"target", name}, {"rig", rigs[name]}});
        }
    }
    doc["edits"] = std::move(edits);
    return parse_edit_program_document(doc);
}

} // namespace sculpt
