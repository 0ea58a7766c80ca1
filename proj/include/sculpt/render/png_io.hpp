// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "sculpt/render/image.hpp"

namespace sculpt {

/// Decoded PNG samples, row-major, `channels` interleaved samples per pixel.
struct PngData {
    int width = 0;
    int height = 0;
    int channels = 0;   // 1 = gray, 3 = RGB
    int bit_depth = 0;  // 8 or 16
    std::vector<std::uint16_t> samples;
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IoError("cannot open '" + path.string() + "'");
    return f;
}

} // namespace detail

/// Writes gray (channels = 1) or RGB (channels = 3) samples at 8 or 16 bits.
inline void write_png(const std::filesystem::path& path, const PngData& img) {
    if (img.channels != 1 && img.channels != 3) throw InvalidArgument("png: channels must be 1 or 3");
    if (img.bit_depth != 8 && img.bit_depth != 16) throw InvalidArgument("png: bit depth must be 8 or 16");
    if (img.samples.size() != static_cast<std::size_t>(img.width) * img.height * img.channels)
        throw InvalidArgument("png: sample count does not match dimensions");
    auto file = detail::open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png: out of memory");
    }
    const int bytes = img.bit_depth / 8;
    std::vector<png_byte> row(static_cast<std::size_t>(img.width) * img.channels * bytes);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png: failed writing '" + path.string() + "'");
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, img.width, img.height, img.bit_depth,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t per_row = static_cast<std::size_t>(img.width) * img.channels;
    for (int y = 0; y < img.height; ++y) {
        const std::uint16_t* src = img.samples.data() + y * per_row;
        for (std::size_t i = 0; i < per_row; ++i) {
            if (bytes == 1) {
                row[i] = static_cast<png_byte>(src[i]);
            } else {  // PNG stores 16-bit samples big-endian
                row[2 * i] = static_cast<png_byte>(src[i] >> 8);
                row[2 * i + 1] = static_cast<png_byte>(src[i] & 0xff);
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// Reads 8/16-bit gray or RGB PNGs (palette and alpha are expanded or stripped).
inline PngData read_png(const std::filesystem::path& path) {
    auto file = detail::open_file(path, "rb");
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8))
        throw IoError("'" + path.string() + "' is not a PNG file");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png: out of memory");
    }
    PngData out;
    std::vector<png_byte> row;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png: failed reading '" + path.string() + "'");
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.bit_depth = depth = png_get_bit_depth(png, info);
    const std::size_t per_row = static_cast<std::size_t>(out.width) * out.channels;
    row.resize(png_get_rowbytes(png, info));
    out.samples.resize(per_row * out.height);
    for (int y = 0; y < out.height; ++y) {
        png_read_row(png, row.data(), nullptr);
        std::uint16_t* dst = out.samples.data() + y * per_row;
        for (std::size_t i = 0; i < per_row; ++i)
            dst[i] = depth == 16 ? static_cast<std::uint16_t>((row[2 * i] << 8) | row[2 * i + 1]) : row[i];
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

inline void write_color_png(const std::filesystem::path& path, const RasterImage& img) {
    PngData d{img.width, img.height, 3, 8, {img.rgb.begin(), img.rgb.end()}};
    write_png(path, d);
}

inline void write_mask_png(const std::filesystem::path& path, const MaskImage& mask) {
    PngData d{mask.width, mask.height, 1, 8, {}};
    d.samples.reserve(mask.bits.size());
    for (auto b : mask.bits) d.samples.push_back(b ? 255 : 0);
    write_png(path, d);
}

inline RasterImage read_color_png(const std::filesystem::path& path) {
    const PngData d = read_png(path);
    if (d.channels != 3 || d.bit_depth != 8) throw IoError("'" + path.string() + "' is not an 8-bit RGB PNG");
    RasterImage img(d.width, d.height);
    for (std::size_t i = 0; i < d.samples.size(); ++i) img.rgb[i] = static_cast<std::uint8_t>(d.samples[i]);
    return img;
}

inline MaskImage read_mask_png(const std::filesystem::path& path) {
    const PngData d = read_png(path);
    if (d.channels != 1 || d.bit_depth != 8) throw IoError("'" + path.string() + "' is not an 8-bit gray PNG");
    MaskImage m(d.width, d.height);
    for (std::size_t i = 0; i < d.samples.size(); ++i) m.bits[i] = d.samples[i] >= 128;
    return m;
}

} // namespace sculpt
