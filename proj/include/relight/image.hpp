// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace relight {

// Row-major, channel-interleaved image. Values are linear and nominally in
// [0,1] for LDR data; HDR intermediates may exceed 1.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;  // size = width * height * channels

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {
        if (w < 0 || h < 0 || c < 0) throw std::runtime_error("negative image dims");
    }

    double& at(int x, int y, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }

    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

// Bilinear resize with edge clamping.
Image resize_bilinear(const Image& src, int out_w, int out_h);

// Channel-mean grayscale (1-channel copy for c==1 inputs).
Image to_gray(const Image& img);

// Per-element clamp to [lo, hi].
Image clamp_image(const Image& img, double lo, double hi);

// Separable Gaussian blur; sigma <= 0 returns the input unchanged.
Image gaussian_blur(const Image& img, double sigma);

// Binary mask helpers; a pixel is foreground when channel 0 > 0.5.
struct Centroid {
    double x = 0, y = 0;
    size_t count = 0;
};
Centroid mask_centroid(const Image& mask);

// 8-bit quantization used by PNG I/O: round(x*255) clamped.
uint8_t quantize8(double v);
double dequantize8(uint8_t v);

}  // namespace relight
