#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <png.h>

#include "cellseg/raster.hpp"

namespace cellseg {
namespace detail {

struct PngReader {
    FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;

    explicit PngReader(const std::string& path) {
        fp = std::fopen(path.c_str(), "rb");
        if (!fp) throw std::runtime_error("cannot open " + path);
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        info = png ? png_create_info_struct(png) : nullptr;
        if (!png || !info) {
            close();
            throw std::runtime_error("libpng init failed for " + path);
        }
    }
    ~PngReader() { close(); }
    void close() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
        png = nullptr;
        info = nullptr;
        fp = nullptr;
    }
};

struct PngWriter {
    FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;

    explicit PngWriter(const std::string& path) {
        fp = std::fopen(path.c_str(), "wb");
        if (!fp) throw std::runtime_error("cannot open " + path + " for writing");
        png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        info = png ? png_create_info_struct(png) : nullptr;
        if (!png || !info) {
            close();
            throw std::runtime_error("libpng init failed for " + path);
        }
    }
    ~PngWriter() { close(); }
    void close() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
        png = nullptr;
        info = nullptr;
        fp = nullptr;
    }
};

// Decode a single-channel 8/16-bit grayscale PNG into 16-bit samples.
// Returns the effective bit depth (8 or 16) after low-depth expansion.
inline int read_gray_png(const std::string& path, int& height, int& width,
                         std::vector<uint16_t>& out) {
    PngReader r(path);
    if (setjmp(png_jmpbuf(r.png))) throw std::runtime_error("libpng failed reading " + path);
    png_init_io(r.png, r.fp);
    png_read_info(r.png, r.info);

    const int color_type = png_get_color_type(r.png, r.info);
    const int channels = png_get_channels(r.png, r.info);
    if (color_type == PNG_COLOR_TYPE_PALETTE)
        throw std::runtime_error(path + ": paletted PNG not supported, need grayscale");
    if (color_type != PNG_COLOR_TYPE_GRAY)
        throw std::runtime_error(path + ": expected 1-channel grayscale PNG, got " +
                                 std::to_string(channels) + " channels");
    int bit_depth = png_get_bit_depth(r.png, r.info);
    if (bit_depth < 8) {
        png_set_expand_gray_1_2_4_to_8(r.png);
        bit_depth = 8;
    }
    if (bit_depth == 16) png_set_swap(r.png);  // PNG stores big-endian
    png_set_interlace_handling(r.png);
    png_read_update_info(r.png, r.info);

    height = static_cast<int>(png_get_image_height(r.png, r.info));
    width = static_cast<int>(png_get_image_width(r.png, r.info));
    out.assign(static_cast<size_t>(height) * width, 0);

    if (bit_depth == 16) {
        std::vector<png_bytep> rows(height);
        for (int y = 0; y < height; ++y)
            rows[y] = reinterpret_cast<png_bytep>(out.data() + static_cast<size_t>(y) * width);
        png_read_image(r.png, rows.data());
    } else {
        std::vector<uint8_t> raw(static_cast<size_t>(height) * width);
        std::vector<png_bytep> rows(height);
        for (int y = 0; y < height; ++y) rows[y] = raw.data() + static_cast<size_t>(y) * width;
        png_read_image(r.png, rows.data());
        for (size_t i = 0; i < raw.size(); ++i) out[i] = raw[i];
    }
    png_read_end(r.png, nullptr);
    return bit_depth;
}

inline void write_gray_png(const std::string& path, int height, int width,
                           const uint16_t* data, int bit_depth) {
    PngWriter w(path);
    if (setjmp(png_jmpbuf(w.png))) throw std::runtime_error("libpng failed writing " + path);
    png_init_io(w.png, w.fp);
    png_set_IHDR(w.png, w.info, width, height, bit_depth, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);

    if (bit_depth == 16) {
        png_set_swap(w.png);
        std::vector<png_bytep> rows(height);
        for (int y = 0; y < height; ++y)
            rows[y] = reinterpret_cast<png_bytep>(
                const_cast<uint16_t*>(data + static_cast<size_t>(y) * width));
        png_write_image(w.png, rows.data());
    } else {
        std::vector<uint8_t> raw(static_cast<size_t>(height) * width);
        for (size_t i = 0; i < raw.size(); ++i)
            raw[i] = static_cast<uint8_t>(std::min<uint16_t>(data[i], 255));
        std::vector<png_bytep> rows(height);
        for (int y = 0; y < height; ++y) rows[y] = raw.data() + static_cast<size_t>(y) * width;
        png_write_image(w.png, rows.data());
    }
    png_write_end(w.png, nullptr);
}

}  // namespace detail

/// Read an 8/16-bit grayscale PNG as an instance mask (pixel value = label).
inline LabelMask read_label_png(const std::string& path) {
    LabelMask mask;
    std::vector<uint16_t> px;
    detail::read_gray_png(path, mask.height, mask.width, px);
    mask.labels = std::move(px);
    return mask;
}

inline void write_label_png(const LabelMask& mask, const std::string& path) {
    detail::write_gray_png(path, mask.height, mask.width, mask.labels.data(), 16);
}

/// Read an 8/16-bit grayscale PNG as floats scaled to [0, 1].
inline ImageGrid read_image_png(const std::string& path) {
    int h = 0, w = 0;
    std::vector<uint16_t> px;
    const int depth = detail::read_gray_png(path, h, w, px);
    const float scale = depth == 16 ? 65535.0f : 255.0f;

    ImageGrid img(h, w);
    for (size_t i = 0; i < px.size(); ++i) img.data[i] = px[i] / scale;
    return img;
}

/// Write floats in [0, 1] as a grayscale PNG (values clamped).
inline void write_image_png(const ImageGrid& img, const std::string& path, int bit_depth = 16) {
    if (bit_depth != 8 && bit_depth != 16)
        throw std::invalid_argument("write_image_png: bit depth must be 8 or 16");
    const float scale = bit_depth == 16 ? 65535.0f : 255.0f;
    std::vector<uint16_t> px(img.size());
    for (size_t i = 0; i < img.size(); ++i) {
        const float v = std::clamp(img.data[i], 0.0f, 1.0f);
        px[i] = static_cast<uint16_t>(std::lround(v * scale));
    }
    detail::write_gray_png(path, img.height, img.width, px.data(), bit_depth);
}

inline void write_rgb_png(const RgbImage& img, const std::string& path) {
    detail::PngWriter w(path);
    if (setjmp(png_jmpbuf(w.png))) throw std::runtime_error("libpng failed writing " + path);
    png_init_io(w.png, w.fp);
    png_set_IHDR(w.png, w.info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.data.data() + static_cast<size_t>(y) * img.width * 3);
    png_write_image(w.png, rows.data());
    png_write_end(w.png, nullptr);
}

}  // namespace cellseg
