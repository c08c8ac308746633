// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "relight/image.hpp"

namespace relight {

// ---------------------------------------------------------------------------
// PFM (portable float map). Binary float32, "PF" header, scanlines stored
// bottom-to-top, negative scale marks little-endian data. Used for HDR
// environment maps; round-trips bit-exactly.
// ---------------------------------------------------------------------------

struct FloatImage {
    int width = 0;
    int height = 0;
    std::vector<float> data;  // RGB interleaved, row-major top-to-bottom

    float& at(int x, int y, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    float at(int x, int y, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
};

FloatImage read_pfm(const std::string& path);
void write_pfm(const std::string& path, const FloatImage& img);

// ---------------------------------------------------------------------------
// PNG, 8-bit gray or RGB, zlib-compressed. Writer always emits filter 0;
// reader handles all five standard filters plus RGBA (alpha dropped).
// ---------------------------------------------------------------------------

void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

// Atomic file write: temp file in the same directory, then rename.
void atomic_write_bytes(const std::string& path, const std::string& bytes);
std::string read_file_bytes(const std::string& path);

}  // namespace relight
