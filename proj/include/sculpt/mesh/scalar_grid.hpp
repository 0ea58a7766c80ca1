// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <vector>

#include "sculpt/mesh/triangle_mesh.hpp"

namespace sculpt {

/// Regular samples of a scalar field, x-fastest. SDF convention: negative inside.
struct ScalarGrid {
    std::array<int, 3> dims{2, 2, 2};
    Vec3 origin = Vec3::Zero();
    Vec3 spacing = Vec3::Ones();
    std::vector<double> values;

    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
    }
    double at(int i, int j, int k) const { return values[index(i, j, k)]; }
    Vec3 point(int i, int j, int k) const {
        return origin + spacing.cwiseProduct(Vec3(i, j, k));
    }
    std::size_t size() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }

    /// Samples `f` at every node.
    static ScalarGrid sample(std::array<int, 3> dims, const Vec3& origin, const Vec3& spacing,
                             const std::function<double(const Vec3&)>& f) {
        ScalarGrid g{dims, origin, spacing, {}};
        g.values.resize(g.size());
        for (int k = 0; k < dims[2]; ++k)
            for (int j = 0; j < dims[1]; ++j)
                for (int i = 0; i < dims[0]; ++i)
                    g.values[g.index(i, j, k)] = f(g.point(i, j, k));
        return g;
    }
};

inline void validate(const ScalarGrid& g) {
    for (int d : g.dims)
        if (d < 2) throw GeometryError("scalar grid needs at least 2 samples per axis");
    if ((g.spacing.array() <= 0.0).any() || !g.spacing.allFinite())
        throw GeometryError("scalar grid spacing must be positive");
    if (g.values.size() != g.size())
        throw GeometryError("scalar grid value count does not match dims");
    for (double v : g.values)
        if (!std::isfinite(v)) throw GeometryError("scalar grid holds non-finite values");
}

// Binary layout, little-endian:
//   "SGRD" | u32 nx ny nz | f64 origin[3] | f64 spacing[3] | f32 values[nx*ny*nz]
namespace detail {

template <class T>
void put_le(std::string& out, T v) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
    char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    out.append(bytes, sizeof(T));
}

template <class T>
T get_le(const std::string& in, std::size_t& off) {
    if (off + sizeof(T) > in.size()) throw ParseError(0, "scalar grid file truncated");
    T v;
    std::memcpy(&v, in.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

} // namespace detail

inline std::string encode_grid(const ScalarGrid& g) {
    validate(g);
    std::string out = "SGRD";
    for (int d : g.dims) detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (int a = 0; a < 3; ++a) detail::put_le<double>(out, g.origin[a]);
    for (int a = 0; a < 3; ++a) detail::put_le<double>(out, g.spacing[a]);
    for (double v : g.values) detail::put_le<float>(out, static_cast<float>(v));
    return out;
}

inline ScalarGrid decode_grid(const std::string& bytes) {
    if (bytes.size() < 4 || bytes.compare(0, 4, "SGRD") != 0)
        throw ParseError(0, "missing SGRD magic");
    std::size_t off = 4;
    ScalarGrid g;
    for (int a = 0; a < 3; ++a) g.dims[a] = static_cast<int>(detail::get_le<std::uint32_t>(bytes, off));
    for (int a = 0; a < 3; ++a) g.origin[a] = detail::get_le<double>(bytes, off);
    for (int a = 0; a < 3; ++a) g.spacing[a] = detail::get_le<double>(bytes, off);
    for (int d : g.dims)
        if (d < 2) throw ParseError(0, "scalar grid dims must be >= 2");
    g.values.resize(g.size());
    for (auto& v : g.values) v = detail::get_le<float>(bytes, off);
    if (off != bytes.size()) throw ParseError(0, "trailing bytes after scalar grid values");
    validate(g);
    return g;
}

inline ScalarGrid load_grid(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_grid(bytes);
}

inline void save_grid(const ScalarGrid& g, const std::filesystem::path& path) {
    const std::string bytes = encode_grid(g);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

} // namespace sculpt
