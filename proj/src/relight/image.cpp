// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#include "relight/image.hpp"

#include <algorithm>
#include <cmath>

namespace relight {

Image resize_bilinear(const Image& src, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0) throw std::runtime_error("resize: bad target size");
    if (src.width == out_w && src.height == out_h) return src;
    Image out(out_w, out_h, src.channels);
    double sx = static_cast<double>(src.width) / out_w;
    double sy = static_cast<double>(src.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y0c = std::clamp(y0, 0, src.height - 1);
        int y1c = std::clamp(y0 + 1, 0, src.height - 1);
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int x0c = std::clamp(x0, 0, src.width - 1);
            int x1c = std::clamp(x0 + 1, 0, src.width - 1);
            for (int c = 0; c < src.channels; ++c) {
                double top = src.at(x0c, y0c, c) * (1 - wx) + src.at(x1c, y0c, c) * wx;
                double bot = src.at(x0c, y1c, c) * (1 - wx) + src.at(x1c, y1c, c) * wx;
                out.at(x, y, c) = top * (1 - wy) + bot * wy;
            }
        }
    }
    return out;
}

Image to_gray(const Image& img) {
    Image out(img.width, img.height, 1);
    for (size_t p = 0; p < img.pixel_count(); ++p) {
        double s = 0;
        for (int c = 0; c < img.channels; ++c) s += img.data[p * img.channels + c];
        out.data[p] = s / img.channels;
    }
    return out;
}

Image clamp_image(const Image& img, double lo, double hi) {
    Image out = img;
    for (double& v : out.data) v = std::clamp(v, lo, hi);
    return out;
}

Image gaussian_blur(const Image& img, double sigma) {
    if (sigma <= 0) return img;
    int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        kernel[i + radius] = v;
        sum += v;
    }
    for (double& k : kernel) k /= sum;

    Image tmp(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0;
                for (int i = -radius; i <= radius; ++i) {
                    int xs = std::clamp(x + i, 0, img.width - 1);
                    acc += kernel[i + radius] * img.at(xs, y, c);
                }
                tmp.at(x, y, c) = acc;
            }
    Image out(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0;
                for (int i = -radius; i <= radius; ++i) {
                    int ys = std::clamp(y + i, 0, img.height - 1);
                    acc += kernel[i + radius] * tmp.at(x, ys, c);
                }
                out.at(x, y, c) = acc;
            }
    return out;
}

Centroid mask_centroid(const Image& mask) {
    Centroid c;
    double sx = 0, sy = 0;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y, 0) > 0.5) {
                sx += x;
                sy += y;
                ++c.count;
            }
    if (c.count > 0) {
        c.x = sx / c.count;
        c.y = sy / c.count;
    }
    return c;
}

uint8_t quantize8(double v) {
    double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<uint8_t>(q);
}

double dequantize8(uint8_t v) { return v / 255.0; }

}  // namespace relight
