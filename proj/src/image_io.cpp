#include "xrfpid/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "xrfpid/errors.hpp"

namespace xrfpid {

namespace {

std::uint16_t to_u16(float v) {
    const double clamped = std::clamp(static_cast<double>(v), 0.0, 1.0);
    return static_cast<std::uint16_t>(std::lround(clamped * 65535.0));
}

std::uint8_t to_u8(float v) {
    const double clamped = std::clamp(static_cast<double>(v), 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(clamped * 255.0));
}

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& payload) {
    put_u32_be(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const auto crc =
        crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
    put_u32_be(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

void write_pgm16(const std::vector<float>& values, int width, int height,
                 const std::string& path) {
    if (values.size() != static_cast<std::size_t>(width) * height)
        throw DimensionError("raster size does not match dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write \"" + path + "\"");
    out << "P5\n" << width << " " << height << "\n65535\n";
    for (float v : values) {
        const std::uint16_t word = to_u16(v);
        const char bytes[2] = {static_cast<char>(word >> 8),
                               static_cast<char>(word & 0xff)};
        out.write(bytes, 2);
    }
    if (!out) throw IoError("short write to \"" + path + "\"");
}

void write_png_rgb(const OverlayImage& image, const std::string& path) {
    const int w = image.width;
    const int h = image.height;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    if (image.r.size() != n || image.g.size() != n || image.b.size() != n)
        throw DimensionError("overlay channels do not match dimensions");

    // filter byte 0 + RGB triples per scanline
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(h) * (1 + 3 * w));
    for (int y = 0; y < h; ++y) {
        raw.push_back(0);
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            raw.push_back(to_u8(image.r[i]));
            raw.push_back(to_u8(image.g[i]));
            raw.push_back(to_u8(image.b[i]));
        }
    }

    uLongf compressed_size = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(compressed_size);
    if (compress2(compressed.data(), &compressed_size, raw.data(),
                  static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw IoError("zlib compression failed for \"" + path + "\"");
    compressed.resize(compressed_size);

    std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<std::uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<std::uint32_t>(w));
    put_u32_be(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // truecolor
    ihdr.push_back(0);   // deflate
    ihdr.push_back(0);   // adaptive filtering
    ihdr.push_back(0);   // no interlace
    append_chunk(png, "IHDR", ihdr);
    append_chunk(png, "IDAT", compressed);
    append_chunk(png, "IEND", {});

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write \"" + path + "\"");
    out.write(reinterpret_cast<const char*>(png.data()),
              static_cast<std::streamsize>(png.size()));
    if (!out) throw IoError("short write to \"" + path + "\"");
}

}  // namespace xrfpid
