// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "relight/common.hpp"
#include "relight/image.hpp"
#include "relight/imageio.hpp"

using namespace relight;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    fs::path dir = fs::temp_directory_path() / "relight_test_imageio";
    fs::create_directories(dir);
    return dir;
}

Image random_image(int w, int h, int c, uint64_t seed, double scale = 1.0) {
    Image img(w, h, c);
    Rng rng(seed);
    for (auto& v : img.data) v = rng.uniform() * scale;
    return img;
}

FloatImage random_float_image(int w, int h, uint64_t seed, double scale = 1.0) {
    FloatImage img;
    img.width = w;
    img.height = h;
    img.data.resize(static_cast<size_t>(w) * h * 3);
    Rng rng(seed);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform() * scale);
    return img;
}

}  // namespace

TEST_CASE("pfm round trip is bit exact, including HDR values") {
    FloatImage img = random_float_image(13, 7, 42, 20.0);
    img.at(0, 0, 0) = 0.0f;
    img.at(12, 6, 2) = 1e-12f;
    fs::path p = temp_dir() / "rt.pfm";
    write_pfm(p.string(), img);
    FloatImage back = read_pfm(p.string());
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    REQUIRE(back.data.size() == img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) CHECK(img.data[i] == back.data[i]);
}

TEST_CASE("pfm rewrite of a loaded file produces identical bytes") {
    FloatImage img = random_float_image(8, 5, 7, 3.0);
    fs::path a = temp_dir() / "a.pfm";
    fs::path b = temp_dir() / "b.pfm";
    write_pfm(a.string(), img);
    write_pfm(b.string(), read_pfm(a.string()));
    CHECK(read_file_bytes(a.string()) == read_file_bytes(b.string()));
}

TEST_CASE("png round trip preserves 8-bit data exactly") {
    Image img = random_image(17, 9, 3, 99);
    fs::path p = temp_dir() / "rt.png";
    write_png(p.string(), img);
    Image back = read_png(p.string());
    REQUIRE(back.same_shape(img));
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(back.data[i] == dequantize8(quantize8(img.data[i])));
}

TEST_CASE("png grayscale round trip") {
    Image img = random_image(6, 11, 1, 3);
    fs::path p = temp_dir() / "gray.png";
    write_png(p.string(), img);
    Image back = read_png(p.string());
    REQUIRE(back.channels == 1);
    REQUIRE(back.width == 6);
    REQUIRE(back.height == 11);
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(back.data[i] == dequantize8(quantize8(img.data[i])));
}

TEST_CASE("png writing is deterministic") {
    Image img = random_image(16, 16, 3, 5);
    fs::path a = temp_dir() / "d1.png";
    fs::path b = temp_dir() / "d2.png";
    write_png(a.string(), img);
    write_png(b.string(), img);
    CHECK(read_file_bytes(a.string()) == read_file_bytes(b.string()));
}

TEST_CASE("png values outside [0,1] are clamped by quantization") {
    Image img(2, 1, 3);
    img.at(0, 0, 0) = -0.5;
    img.at(1, 0, 0) = 2.5;
    fs::path p = temp_dir() / "clamp.png";
    write_png(p.string(), img);
    Image back = read_png(p.string());
    CHECK(back.at(0, 0, 0) == 0.0);
    CHECK(back.at(1, 0, 0) == 1.0);
}

TEST_CASE("atomic_write_bytes leaves no partial file behind") {
    fs::path p = temp_dir() / "atomic.bin";
    std::string payload(100000, 'x');
    atomic_write_bytes(p.string(), payload);
    CHECK(read_file_bytes(p.string()) == payload);
    atomic_write_bytes(p.string(), "short");
    CHECK(read_file_bytes(p.string()) == "short");
    for (const auto& e : fs::directory_iterator(temp_dir()))
        CHECK(e.path().extension() != ".tmp");
}

TEST_CASE("read errors throw") {
    CHECK_THROWS(read_pfm((temp_dir() / "missing.pfm").string()));
    CHECK_THROWS(read_png((temp_dir() / "missing.png").string()));
    fs::path bad = temp_dir() / "bad.png";
    atomic_write_bytes(bad.string(), "not a png");
    CHECK_THROWS(read_png(bad.string()));
}
