#include "xray/image.hpp"

#include <fstream>

namespace xray {

namespace {

// Netpbm header tokens are separated by whitespace; '#' starts a comment that
// runs to end of line.
struct TokenReader {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;
    const std::string& origin;

    int next_int() {
        skip_space_and_comments();
        if (pos >= bytes.size() || !is_digit(bytes[pos])) {
            throw IoError("malformed netpbm header in " + origin);
        }
        long v = 0;
        while (pos < bytes.size() && is_digit(bytes[pos])) {
            v = v * 10 + (bytes[pos] - '0');
            if (v > 1'000'000'000L) throw IoError("absurd dimension in " + origin);
            ++pos;
        }
        return static_cast<int>(v);
    }

    void skip_space_and_comments() {
        while (pos < bytes.size()) {
            std::uint8_t c = bytes[pos];
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (is_space(c)) {
                ++pos;
            } else {
                break;
            }
        }
    }

    static bool is_space(std::uint8_t c) {
        return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
    }
    static bool is_digit(std::uint8_t c) { return c >= '0' && c <= '9'; }
};

}  // namespace

Image decode_netpbm(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw IoError("not a binary PPM/PGM file: " + origin);
    }
    const bool gray = bytes[1] == '5';

    TokenReader tr{bytes, 2, origin};
    const int width = tr.next_int();
    const int height = tr.next_int();
    const int maxval = tr.next_int();
    if (width <= 0 || height <= 0) throw IoError("bad dimensions in " + origin);
    if (maxval != 255) throw IoError("unsupported maxval (only 255) in " + origin);
    // Exactly one whitespace byte separates the header from the raster.
    if (tr.pos >= bytes.size() || !TokenReader::is_space(bytes[tr.pos])) {
        throw IoError("malformed netpbm header in " + origin);
    }
    ++tr.pos;

    const std::size_t npix = static_cast<std::size_t>(width) * height;
    const std::size_t need = gray ? npix : npix * 3;
    if (bytes.size() - tr.pos < need) throw IoError("truncated raster in " + origin);

    Image img(width, height);
    if (gray) {
        for (std::size_t i = 0; i < npix; ++i) {
            std::uint8_t v = bytes[tr.pos + i];
            img.pixels[i * 3 + 0] = v;
            img.pixels[i * 3 + 1] = v;
            img.pixels[i * 3 + 2] = v;
        }
    } else {
        std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(tr.pos),
                  bytes.begin() + static_cast<std::ptrdiff_t>(tr.pos + need), img.pixels.begin());
    }
    return img;
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
    std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                         "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

Image read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_netpbm(bytes, path);
}

void write_ppm(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    auto bytes = encode_ppm(img);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path);
}

}  // namespace xray
