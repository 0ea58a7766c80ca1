// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "sculpt/mesh/triangle_mesh.hpp"

namespace sculpt {

/// Binary geometry: u32 vertex count, u32 triangle count, f32 xyz per vertex,
/// u32 index triple per triangle. Everything little-endian.
struct GeometryBuffer {
    std::vector<float> positions;
    std::vector<std::uint32_t> indices;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t at) {
    if (at + 4 > in.size()) throw ParseError(0, "geometry buffer is truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

} // namespace detail

inline std::string encode_geometry(const TriangleMesh& m) {
    std::string out;
    out.reserve(8 + 12 * (m.positions.rows() + m.triangles.rows()));
    detail::put_u32(out, static_cast<std::uint32_t>(m.positions.rows()));
    detail::put_u32(out, static_cast<std::uint32_t>(m.triangles.rows()));
    for (Eigen::Index v = 0; v < m.positions.rows(); ++v)
        for (int k = 0; k < 3; ++k) {
            const float f = static_cast<float>(m.positions(v, k));
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            detail::put_u32(out, bits);
        }
    for (Eigen::Index t = 0; t < m.triangles.rows(); ++t)
        for (int k = 0; k < 3; ++k) detail::put_u32(out, static_cast<std::uint32_t>(m.triangles(t, k)));
    return out;
}

inline GeometryBuffer decode_geometry(const std::string& bytes) {
    const std::uint32_t nv = detail::get_u32(bytes, 0), nf = detail::get_u32(bytes, 4);
    if (bytes.size() != 8 + 12ull * nv + 12ull * nf) throw ParseError(0, "geometry buffer size does not match its counts");
    GeometryBuffer g;
    g.positions.resize(3ull * nv);
    g.indices.resize(3ull * nf);
    std::size_t at = 8;
    for (auto& f : g.positions) {
        const std::uint32_t bits = detail::get_u32(bytes, at);
        std::memcpy(&f, &bits, 4);
        at += 4;
    }
    for (auto& i : g.indices) {
        i = detail::get_u32(bytes, at);
        at += 4;
    }
    return g;
}

} // namespace sculpt
