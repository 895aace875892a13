#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xray/errors.hpp"

namespace xray {

/// 8-bit RGB raster, interleaved row-major (r,g,b per pixel).
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // size == width * height * 3

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    std::uint8_t& at(int x, int y, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::uint8_t at(int x, int y, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
};

// Binary netpbm codec. P6 (maxval 255) read/write, P5 read-only with the gray
// channel replicated to R,G,B. No color management, no gamma: bytes in, bytes out.
Image read_image(const std::string& path);
void write_ppm(const std::string& path, const Image& img);

// In-memory forms, used by the codec round-trip tests.
Image decode_netpbm(const std::vector<std::uint8_t>& bytes, const std::string& origin);
std::vector<std::uint8_t> encode_ppm(const Image& img);

}  // namespace xray
