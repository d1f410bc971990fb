#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "cellseg/raster.hpp"

namespace cellseg {

// DCF1: 16-byte header ("DCF1", u32 LE channels/height/width) followed by
// channel-planar row-major float32 LE payload. Bit-exact round trip.

namespace detail {

inline void put_u32_le(std::string& buf, uint32_t v) {
    buf.push_back(static_cast<char>(v & 0xFF));
    buf.push_back(static_cast<char>((v >> 8) & 0xFF));
    buf.push_back(static_cast<char>((v >> 16) & 0xFF));
    buf.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline void write_dcf1(const PlanarField& field, const std::string& path) {
    std::string buf;
    buf.reserve(16 + 4 * field.data.size());
    buf += "DCF1";
    detail::put_u32_le(buf, static_cast<uint32_t>(field.channels));
    detail::put_u32_le(buf, static_cast<uint32_t>(field.height));
    detail::put_u32_le(buf, static_cast<uint32_t>(field.width));
    for (float f : field.data) detail::put_u32_le(buf, std::bit_cast<uint32_t>(f));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_dcf1: cannot open " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("write_dcf1: write failed for " + path);
}

inline PlanarField read_dcf1(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_dcf1: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 16 || buf.compare(0, 4, "DCF1") != 0)
        throw std::runtime_error("read_dcf1: " + path + " is not a DCF1 file");
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
    const uint32_t c = detail::get_u32_le(p + 4);
    const uint32_t h = detail::get_u32_le(p + 8);
    const uint32_t w = detail::get_u32_le(p + 12);
    const uint64_t count = static_cast<uint64_t>(c) * h * w;
    if (c == 0 || h == 0 || w == 0 || count > (uint64_t{1} << 31))
        throw std::runtime_error("read_dcf1: implausible dimensions in " + path);
    if (buf.size() != 16 + 4 * count)
        throw std::runtime_error("read_dcf1: size mismatch in " + path + " (expected " +
                                 std::to_string(16 + 4 * count) + " bytes, got " +
                                 std::to_string(buf.size()) + ")");
    PlanarField field(static_cast<int>(c), static_cast<int>(h), static_cast<int>(w));
    for (uint64_t i = 0; i < count; ++i)
        field.data[i] = std::bit_cast<float>(detail::get_u32_le(p + 16 + 4 * i));
    return field;
}

}  // namespace cellseg
