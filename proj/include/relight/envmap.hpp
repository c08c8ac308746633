// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "relight/common.hpp"
#include "relight/image.hpp"

namespace relight {

// ---------------------------------------------------------------------------
// Equirectangular HDR environment map.
//
// Conventions: z-up world; row v spans polar angle theta in [0, pi] from +z
// top-to-bottom, column u spans azimuth phi in [0, 2*pi) from +x toward +y;
// texel centers at (u+0.5, v+0.5). width == 2 * height always.
// ---------------------------------------------------------------------------

enum class EnvFrame { World, Camera };

struct Rgb {
    float r = 0, g = 0, b = 0;
    Rgb() = default;
    Rgb(float r_, float g_, float b_) : r(r_), g(g_), b(b_) {}
    Rgb operator*(float s) const { return {r * s, g * s, b * s}; }
    Rgb operator+(const Rgb& o) const { return {r + o.r, g + o.g, b + o.b}; }
};

struct EnvironmentMap {
    int width = 0;
    int height = 0;
    std::vector<float> data;  // RGB interleaved, linear radiance, >= 0
    EnvFrame frame = EnvFrame::World;

    EnvironmentMap() = default;
    EnvironmentMap(int h, EnvFrame f = EnvFrame::World)
        : width(2 * h), height(h), data(static_cast<size_t>(2 * h) * h * 3, 0.0f), frame(f) {}

    float& at(int u, int v, int c) { return data[(static_cast<size_t>(v) * width + u) * 3 + c]; }
    float at(int u, int v, int c) const {
        return data[(static_cast<size_t>(v) * width + u) * 3 + c];
    }
    Rgb texel(int u, int v) const { return {at(u, v, 0), at(u, v, 1), at(u, v, 2)}; }

    void validate() const;  // throws on broken invariants
};

struct CameraIntrinsics {
    double fx = 0, fy = 0;  // focal lengths, pixels
    double cx = 0, cy = 0;  // principal point, pixels
};

struct CameraPose {
    Mat3 rotation;          // world-to-camera
    Vec3 position;          // camera center in world, meters
    CameraIntrinsics intrinsics;
    int image_width = 0;
    int image_height = 0;

    void validate() const;  // orthonormality within 1e-6, focal lengths > 0

    // Ray through pixel center (px+0.5, py+0.5), in world coordinates.
    // Camera looks along +z in its own frame, x right, y down.
    Vec3 ray_direction(double px, double py) const;

    // Camera placed at `position` looking at `target`, up along +z world.
    static CameraPose look_at(const Vec3& position, const Vec3& target, double focal_px,
                              int image_w, int image_h);
};

// Texel geometry.
Vec3 texel_to_dir(int u, int v, int width, int height);
void dir_to_texel(const Vec3& dir, int width, int height, int& u, int& v);
double texel_solid_angle(int v, int height);

// Environment-map constructors.
EnvironmentMap make_uniform(const Rgb& radiance, int height);
EnvironmentMap make_olat(const Vec3& direction, double angular_radius, const Rgb& intensity,
                         int height);

// PFM-backed persistence; load rejects non-2:1 aspect, NaN, and negative texels.
EnvironmentMap load_pfm_env(const std::string& path);
void save_pfm_env(const std::string& path, const EnvironmentMap& map);

// Bilinear radiance lookup with azimuth wraparound and polar clamping.
Rgb sample_radiance(const EnvironmentMap& map, const Vec3& direction);

// Reinhard x -> x/(1+x), per channel. Output in [0,1).
EnvironmentMap reinhard_tonemap(const EnvironmentMap& map);
Image reinhard_tonemap(const Image& hdr);

// Resamples a world-frame map into the camera frame: each camera-frame texel
// direction d looks up the world map at R_world_from_cam * d.
EnvironmentMap project_to_view(const EnvironmentMap& map, const CameraPose& camera);

// Solid-angle-weighted box downsample to the given height (for light sums).
EnvironmentMap downsample_env(const EnvironmentMap& map, int target_height);

// Texel-for-texel copy into a regular image (previews, conditioning input).
Image env_to_image(const EnvironmentMap& map);

}  // namespace relight
