// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#include "relight/imageio.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace relight {

namespace {

static_assert(std::endian::native == std::endian::little,
              "PFM writer assumes a little-endian host");

void append_u32_be(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

uint32_t read_u32_be(const unsigned char* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

uint32_t crc32_of(const std::string& bytes) {
    return static_cast<uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

std::string zlib_compress(const std::string& raw) {
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::string out(bound, '\0');
    int rc = ::compress2(reinterpret_cast<Bytef*>(out.data()), &bound,
                         reinterpret_cast<const Bytef*>(raw.data()),
                         static_cast<uLong>(raw.size()), 6);
    if (rc != Z_OK) throw std::runtime_error("zlib compression failed");
    out.resize(bound);
    return out;
}

std::string zlib_decompress(const std::string& comp, size_t expected) {
    std::string out(expected, '\0');
    uLongf dest_len = static_cast<uLongf>(expected);
    int rc = ::uncompress(reinterpret_cast<Bytef*>(out.data()), &dest_len,
                          reinterpret_cast<const Bytef*>(comp.data()),
                          static_cast<uLong>(comp.size()));
    if (rc != Z_OK || dest_len != expected) throw std::runtime_error("zlib decompression failed");
    return out;
}

}  // namespace

void atomic_write_bytes(const std::string& path, const std::string& bytes) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open for write: " + tmp.string());
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, target);
}

std::string read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// --------------------------------- PFM --------------------------------------

FloatImage read_pfm(const std::string& path) {
    std::string bytes = read_file_bytes(path);
    std::istringstream in(bytes);
    std::string magic;
    in >> magic;
    if (magic != "PF") throw std::runtime_error("malformed PFM header (expected PF): " + path);
    int w = 0, h = 0;
    double scale = 0;
    in >> w >> h >> scale;
    if (!in || w <= 0 || h <= 0 || scale == 0)
        throw std::runtime_error("malformed PFM header dimensions/scale: " + path);
    in.get();  // single whitespace after scale
    size_t offset = static_cast<size_t>(in.tellg());
    size_t count = static_cast<size_t>(w) * h * 3;
    if (bytes.size() - offset < count * 4) throw std::runtime_error("PFM truncated: " + path);

    bool little = scale < 0;
    FloatImage img;
    img.width = w;
    img.height = h;
    img.data.resize(count);
    // PFM scanlines run bottom-to-top.
    const unsigned char* src = reinterpret_cast<const unsigned char*>(bytes.data()) + offset;
    for (int y = 0; y < h; ++y) {
        int src_row = h - 1 - y;
        for (int x = 0; x < w * 3; ++x) {
            const unsigned char* p = src + (static_cast<size_t>(src_row) * w * 3 + x) * 4;
            unsigned char b[4];
            if (little) {
                b[0] = p[0]; b[1] = p[1]; b[2] = p[2]; b[3] = p[3];
            } else {
                b[0] = p[3]; b[1] = p[2]; b[2] = p[1]; b[3] = p[0];
            }
            float v;
            std::memcpy(&v, b, 4);
            img.data[static_cast<size_t>(y) * w * 3 + x] = v;
        }
    }
    return img;
}

void write_pfm(const std::string& path, const FloatImage& img) {
    std::string out;
    out += "PF\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n-1.0\n";
    out.reserve(out.size() + img.data.size() * 4);
    for (int y = img.height - 1; y >= 0; --y) {
        const char* row = reinterpret_cast<const char*>(img.data.data()) +
                          static_cast<size_t>(y) * img.width * 3 * 4;
        out.append(row, static_cast<size_t>(img.width) * 3 * 4);
    }
    atomic_write_bytes(path, out);
}

// --------------------------------- PNG --------------------------------------

void write_png(const std::string& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3)
        throw std::runtime_error("PNG writer supports 1 or 3 channels");
    int color_type = img.channels == 1 ? 0 : 2;

    std::string raw;
    raw.reserve(static_cast<size_t>(img.height) * (1 + img.width * img.channels));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back('\0');  // filter type None
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                raw.push_back(static_cast<char>(quantize8(img.at(x, y, c))));
    }
    std::string idat = zlib_compress(raw);

    std::string out("\x89PNG\r\n\x1a\n", 8);
    auto chunk = [&out](const char* tag, const std::string& payload) {
        append_u32_be(out, static_cast<uint32_t>(payload.size()));
        std::string body = std::string(tag, 4) + payload;
        out += body;
        append_u32_be(out, crc32_of(body));
    };

    std::string ihdr;
    append_u32_be(ihdr, static_cast<uint32_t>(img.width));
    append_u32_be(ihdr, static_cast<uint32_t>(img.height));
    ihdr.push_back(8);                             // bit depth
    ihdr.push_back(static_cast<char>(color_type)); // gray or RGB
    ihdr.push_back(0);                             // compression
    ihdr.push_back(0);                             // filter method
    ihdr.push_back(0);                             // no interlace
    chunk("IHDR", ihdr);
    chunk("IDAT", idat);
    chunk("IEND", "");
    atomic_write_bytes(path, out);
}

Image read_png(const std::string& path) {
    std::string bytes = read_file_bytes(path);
    if (bytes.size() < 8 || bytes.compare(0, 8, "\x89PNG\r\n\x1a\n", 8) != 0)
        throw std::runtime_error("not a PNG file: " + path);

    const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data());
    size_t pos = 8;
    int w = 0, h = 0, bit_depth = 0, color_type = 0;
    std::string idat;
    while (pos + 8 <= bytes.size()) {
        uint32_t len = read_u32_be(p + pos);
        std::string tag(bytes, pos + 4, 4);
        if (pos + 12 + len > bytes.size()) throw std::runtime_error("PNG truncated: " + path);
        const char* payload = bytes.data() + pos + 8;
        if (tag == "IHDR") {
            w = static_cast<int>(read_u32_be(p + pos + 8));
            h = static_cast<int>(read_u32_be(p + pos + 12));
            bit_depth = payload[8];
            color_type = payload[9];
            if (payload[12] != 0) throw std::runtime_error("interlaced PNG unsupported: " + path);
        } else if (tag == "IDAT") {
            idat.append(payload, len);
        } else if (tag == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (w <= 0 || h <= 0) throw std::runtime_error("PNG missing IHDR: " + path);
    if (bit_depth != 8) throw std::runtime_error("only 8-bit PNG supported: " + path);
    int nc;
    switch (color_type) {
        case 0: nc = 1; break;
        case 2: nc = 3; break;
        case 6: nc = 4; break;
        default: throw std::runtime_error("unsupported PNG color type: " + path);
    }

    size_t stride = static_cast<size_t>(w) * nc;
    std::string raw = zlib_decompress(idat, (stride + 1) * h);

    // Undo per-scanline filters.
    std::vector<unsigned char> pix(stride * h);
    for (int y = 0; y < h; ++y) {
        unsigned char filter = static_cast<unsigned char>(raw[(stride + 1) * y]);
        const unsigned char* src = reinterpret_cast<const unsigned char*>(raw.data()) +
                                   (stride + 1) * y + 1;
        unsigned char* cur = pix.data() + stride * y;
        const unsigned char* prev = y > 0 ? pix.data() + stride * (y - 1) : nullptr;
        for (size_t i = 0; i < stride; ++i) {
            int a = i >= static_cast<size_t>(nc) ? cur[i - nc] : 0;
            int b = prev ? prev[i] : 0;
            int c = (prev && i >= static_cast<size_t>(nc)) ? prev[i - nc] : 0;
            int x = src[i];
            int v;
            switch (filter) {
                case 0: v = x; break;
                case 1: v = x + a; break;
                case 2: v = x + b; break;
                case 3: v = x + (a + b) / 2; break;
                case 4: {
                    int pa = std::abs(b - c), pb = std::abs(a - c), pc = std::abs(a + b - 2 * c);
                    int pred = (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
                    v = x + pred;
                    break;
                }
                default: throw std::runtime_error("bad PNG filter type: " + path);
            }
            cur[i] = static_cast<unsigned char>(v & 0xff);
        }
    }

    int out_c = nc == 4 ? 3 : nc;
    Image img(w, h, out_c);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < out_c; ++c)
                img.at(x, y, c) = dequantize8(pix[stride * y + static_cast<size_t>(x) * nc + c]);
    return img;
}

}  // namespace relight
