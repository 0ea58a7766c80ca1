// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sculpt/mesh/triangle_mesh.hpp"

namespace sculpt {

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline double parse_real(std::string_view tok, std::size_t line) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError(line, "invalid number '" + std::string(tok) + "'");
    return v;
}

inline long parse_index(std::string_view tok, std::size_t line) {
    long v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || v == 0)
        throw ParseError(line, "invalid index '" + std::string(tok) + "'");
    return v;
}

// OBJ indices are 1-based; negative values count back from the current end.
inline int resolve_index(long raw, std::size_t count, std::size_t line, const char* what) {
    const long idx = raw > 0 ? raw - 1 : static_cast<long>(count) + raw;
    if (idx < 0 || idx >= static_cast<long>(count))
        throw ParseError(line, std::string(what) + " index " + std::to_string(raw) + " out of range");
    return static_cast<int>(idx);
}

} // namespace detail

/// Parses Wavefront OBJ text. Polygons are fan-triangulated from their first corner.
/// A position referenced with several distinct texture coordinates is split; splits
/// are appended after the file's vertices in first-encounter order.
inline TriangleMesh parse_obj(std::string_view text) {
    std::vector<Vec3> pos;
    std::vector<Vec2> tex;
    struct Corner {
        int v;
        int vt;  // -1 when absent
    };
    std::vector<std::array<Corner, 3>> tris;

    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        ++line_no;
        start = end + 1;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        const auto tok = detail::split_ws(line);
        if (tok.empty()) {
            if (end == text.size()) break;
            continue;
        }
        if (tok[0] == "v") {
            if (tok.size() < 4) throw ParseError(line_no, "vertex needs 3 coordinates");
            pos.emplace_back(detail::parse_real(tok[1], line_no), detail::parse_real(tok[2], line_no),
                             detail::parse_real(tok[3], line_no));
        } else if (tok[0] == "vt") {
            if (tok.size() < 3) throw ParseError(line_no, "texture coordinate needs 2 values");
            tex.emplace_back(detail::parse_real(tok[1], line_no), detail::parse_real(tok[2], line_no));
        } else if (tok[0] == "f") {
            if (tok.size() < 4) throw ParseError(line_no, "face needs at least 3 corners");
            std::vector<Corner> poly;
            for (std::size_t k = 1; k < tok.size(); ++k) {
                const std::string_view c = tok[k];
                const auto s1 = c.find('/');
                Corner corner{detail::resolve_index(detail::parse_index(c.substr(0, s1), line_no), pos.size(),
                                                    line_no, "vertex"),
                              -1};
                if (s1 != std::string_view::npos) {
                    const auto rest = c.substr(s1 + 1);
                    const auto s2 = rest.find('/');
                    const auto vt = rest.substr(0, s2);
                    if (!vt.empty())
                        corner.vt = detail::resolve_index(detail::parse_index(vt, line_no), tex.size(), line_no,
                                                          "texture");
                }
                poly.push_back(corner);
            }
            for (std::size_t k = 1; k + 1 < poly.size(); ++k)
                tris.push_back({poly[0], poly[k], poly[k + 1]});
        }
        // vn, o, g, s, usemtl, mtllib and friends carry nothing we keep.
        if (end == text.size()) break;
    }

    const bool has_uv = std::any_of(tris.begin(), tris.end(), [](const auto& t) {
        return t[0].vt >= 0 || t[1].vt >= 0 || t[2].vt >= 0;
    });

    std::vector<Vec3> out_pos = pos;
    std::vector<Vec2> out_uv(pos.size(), Vec2::Zero());
    std::vector<int> first_vt(pos.size(), -1);
    std::map<std::pair<int, int>, int> splits;
    Triangles triangles(static_cast<Eigen::Index>(tris.size()), 3);
    for (std::size_t t = 0; t < tris.size(); ++t) {
        for (int k = 0; k < 3; ++k) {
            const Corner& c = tris[t][k];
            int idx = c.v;
            if (c.vt >= 0) {
                if (first_vt[c.v] < 0) {
                    first_vt[c.v] = c.vt;
                    out_uv[c.v] = tex[c.vt];
                } else if (first_vt[c.v] != c.vt) {
                    auto [it, inserted] = splits.try_emplace({c.v, c.vt}, static_cast<int>(out_pos.size()));
                    if (inserted) {
                        out_pos.push_back(pos[c.v]);
                        out_uv.push_back(tex[c.vt]);
                    }
                    idx = it->second;
                }
            }
            triangles(static_cast<Eigen::Index>(t), k) = idx;
        }
    }

    TriangleMesh mesh;
    mesh.positions.resize(static_cast<Eigen::Index>(out_pos.size()), 3);
    for (std::size_t i = 0; i < out_pos.size(); ++i)
        mesh.positions.row(static_cast<Eigen::Index>(i)) = out_pos[i].transpose();
    mesh.triangles = std::move(triangles);
    if (has_uv) {
        UVs uv(static_cast<Eigen::Index>(out_uv.size()), 2);
        for (std::size_t i = 0; i < out_uv.size(); ++i)
            uv.row(static_cast<Eigen::Index>(i)) = out_uv[i].transpose();
        mesh.uvs = std::move(uv);
    }
    validate(mesh);
    return mesh;
}

inline TriangleMesh load_obj(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_obj(buf.str());
}

/// OBJ text with 9 significant digits; faces use v/vt when uvs are present.
inline std::string format_obj(const TriangleMesh& mesh) {
    if (mesh.empty()) throw InvalidArgument("refusing to write an empty mesh");
    validate(mesh);
    std::string out;
    char buf[128];
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", mesh.positions(i, 0), mesh.positions(i, 1),
                      mesh.positions(i, 2));
        out += buf;
    }
    if (mesh.uvs) {
        for (int i = 0; i < mesh.vertex_count(); ++i) {
            std::snprintf(buf, sizeof buf, "vt %.9g %.9g\n", (*mesh.uvs)(i, 0), (*mesh.uvs)(i, 1));
            out += buf;
        }
    }
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const int a = mesh.triangles(t, 0) + 1, b = mesh.triangles(t, 1) + 1, c = mesh.triangles(t, 2) + 1;
        if (mesh.uvs)
            std::snprintf(buf, sizeof buf, "f %d/%d %d/%d %d/%d\n", a, a, b, b, c, c);
        else
            std::snprintf(buf, sizeof buf, "f %d %d %d\n", a, b, c);
        out += buf;
    }
    return out;
}

inline void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
    const std::string text = format_obj(mesh);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

} // namespace sculpt
