#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "inper/errors.hpp"

// Little-endian primitives shared by every binary file format in the library.
// Reads throw FormatError on a short stream so callers never see torn values.

namespace inper::io {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), std::streamsize(n));
    if (!os) throw FormatError("write failed");
}

inline void read_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
    is.read(static_cast<char*>(p), std::streamsize(n));
    if (std::size_t(is.gcount()) != n) {
        throw FormatError(std::string("unexpected end of stream while reading ") + what);
    }
}

inline void write_u8(std::ostream& os, std::uint8_t v) { write_bytes(os, &v, 1); }

inline void write_u16(std::ostream& os, std::uint16_t v) {
    const std::uint8_t b[2] = {std::uint8_t(v & 0xff), std::uint8_t(v >> 8)};
    write_bytes(os, b, 2);
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
    const std::uint8_t b[4] = {std::uint8_t(v & 0xff), std::uint8_t((v >> 8) & 0xff),
                               std::uint8_t((v >> 16) & 0xff), std::uint8_t(v >> 24)};
    write_bytes(os, b, 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    write_u32(os, std::uint32_t(v & 0xffffffffu));
    write_u32(os, std::uint32_t(v >> 32));
}

inline void write_f32(std::ostream& os, float v) {
    write_u32(os, std::bit_cast<std::uint32_t>(v));
}

inline std::uint8_t read_u8(std::istream& is, const char* what = "u8") {
    std::uint8_t v;
    read_bytes(is, &v, 1, what);
    return v;
}

inline std::uint16_t read_u16(std::istream& is, const char* what = "u16") {
    std::uint8_t b[2];
    read_bytes(is, b, 2, what);
    return std::uint16_t(b[0] | (std::uint16_t(b[1]) << 8));
}

inline std::uint32_t read_u32(std::istream& is, const char* what = "u32") {
    std::uint8_t b[4];
    read_bytes(is, b, 4, what);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

inline std::uint64_t read_u64(std::istream& is, const char* what = "u64") {
    const std::uint64_t lo = read_u32(is, what);
    const std::uint64_t hi = read_u32(is, what);
    return lo | (hi << 32);
}

inline float read_f32(std::istream& is, const char* what = "f32") {
    return std::bit_cast<float>(read_u32(is, what));
}

inline void write_magic(std::ostream& os, const char magic[4]) { write_bytes(os, magic, 4); }

inline void expect_magic(std::istream& is, const char magic[4], const char* format_name) {
    char got[4];
    read_bytes(is, got, 4, "magic");
    if (got[0] != magic[0] || got[1] != magic[1] || got[2] != magic[2] || got[3] != magic[3]) {
        throw FormatError(std::string("bad magic for ") + format_name + " file");
    }
}

}  // namespace inper::io
