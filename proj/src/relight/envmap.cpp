// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#include "relight/envmap.hpp"

#include <algorithm>
#include <cmath>

#include "relight/imageio.hpp"

namespace relight {

void EnvironmentMap::validate() const {
    if (width != 2 * height || height < 1)
        throw std::runtime_error("environment map aspect must be 2:1");
    if (data.size() != static_cast<size_t>(width) * height * 3)
        throw std::runtime_error("environment map data size mismatch");
    for (float v : data) {
        if (!std::isfinite(v)) throw std::runtime_error("environment map has non-finite radiance");
        if (v < 0) throw std::runtime_error("environment map has negative radiance");
    }
}

void CameraPose::validate() const {
    if (rotation.orthonormality_error() > 1e-6)
        throw std::runtime_error("camera rotation not orthonormal");
    if (intrinsics.fx <= 0 || intrinsics.fy <= 0)
        throw std::runtime_error("camera focal lengths must be positive");
}

Vec3 CameraPose::ray_direction(double px, double py) const {
    Vec3 cam_dir{(px + 0.5 - intrinsics.cx) / intrinsics.fx,
                 (py + 0.5 - intrinsics.cy) / intrinsics.fy, 1.0};
    // rotation is world-to-camera; transpose maps camera -> world.
    return (rotation.transposed() * cam_dir).normalized();
}

CameraPose CameraPose::look_at(const Vec3& position, const Vec3& target, double focal_px,
                               int image_w, int image_h) {
    Vec3 fwd = (target - position).normalized();
    Vec3 up{0, 0, 1};
    if (std::abs(fwd.dot(up)) > 0.999) up = Vec3{0, 1, 0};
    Vec3 right = fwd.cross(up).normalized();
    Vec3 down = fwd.cross(right).normalized();  // y axis points down in image space
    CameraPose pose;
    // Rows of world-to-camera are the camera axes expressed in world coords.
    pose.rotation = Mat3::from_rows(right, down, fwd);
    pose.position = position;
    pose.intrinsics = {focal_px, focal_px, image_w / 2.0, image_h / 2.0};
    pose.image_width = image_w;
    pose.image_height = image_h;
    return pose;
}

Vec3 texel_to_dir(int u, int v, int width, int height) {
    double theta = kPi * (v + 0.5) / height;
    double phi = 2.0 * kPi * (u + 0.5) / width;
    double st = std::sin(theta);
    return {st * std::cos(phi), st * std::sin(phi), std::cos(theta)};
}

void dir_to_texel(const Vec3& dir, int width, int height, int& u, int& v) {
    double theta = std::acos(std::clamp(dir.z / dir.norm(), -1.0, 1.0));
    double phi = std::atan2(dir.y, dir.x);
    if (phi < 0) phi += 2.0 * kPi;
    u = std::clamp(static_cast<int>(phi / (2.0 * kPi) * width), 0, width - 1);
    v = std::clamp(static_cast<int>(theta / kPi * height), 0, height - 1);
}

double texel_solid_angle(int v, int height) {
    int width = 2 * height;
    // Exact row band: delta_phi * (cos theta_v - cos theta_{v+1}); rows
    // telescope so the texels partition 4*pi to rounding error.
    double theta0 = kPi * v / height;
    double theta1 = kPi * (v + 1) / height;
    return (2.0 * kPi / width) * (std::cos(theta0) - std::cos(theta1));
}

EnvironmentMap make_uniform(const Rgb& radiance, int height) {
    if (height < 1) throw std::runtime_error("make_uniform: height must be >= 1");
    if (radiance.r < 0 || radiance.g < 0 || radiance.b < 0)
        throw std::runtime_error("make_uniform: radiance must be >= 0");
    EnvironmentMap map(height);
    for (int v = 0; v < map.height; ++v)
        for (int u = 0; u < map.width; ++u) {
            map.at(u, v, 0) = radiance.r;
            map.at(u, v, 1) = radiance.g;
            map.at(u, v, 2) = radiance.b;
        }
    return map;
}

EnvironmentMap make_olat(const Vec3& direction, double angular_radius, const Rgb& intensity,
                         int height) {
    if (std::abs(direction.norm() - 1.0) > 1e-6)
        throw std::runtime_error("make_olat: direction must be a unit vector");
    if (!(angular_radius > 0 && angular_radius < kPi / 2))
        throw std::runtime_error("make_olat: angular_radius out of (0, pi/2)");
    EnvironmentMap map(height);
    double cos_r = std::cos(angular_radius);
    for (int v = 0; v < map.height; ++v)
        for (int u = 0; u < map.width; ++u) {
            if (texel_to_dir(u, v, map.width, map.height).dot(direction) >= cos_r) {
                map.at(u, v, 0) = intensity.r;
                map.at(u, v, 1) = intensity.g;
                map.at(u, v, 2) = intensity.b;
            }
        }
    return map;
}

EnvironmentMap load_pfm_env(const std::string& path) {
    FloatImage img = read_pfm(path);
    if (img.width != 2 * img.height)
        throw std::runtime_error("environment map aspect must be 2:1: " + path);
    EnvironmentMap map(img.height);
    map.data = std::move(img.data);
    for (float v : map.data) {
        if (!std::isfinite(v))
            throw std::runtime_error("environment map has non-finite radiance: " + path);
        if (v < 0) throw std::runtime_error("environment map has negative radiance: " + path);
    }
    return map;
}

void save_pfm_env(const std::string& path, const EnvironmentMap& map) {
    FloatImage img;
    img.width = map.width;
    img.height = map.height;
    img.data = map.data;
    write_pfm(path, img);
}

Rgb sample_radiance(const EnvironmentMap& map, const Vec3& direction) {
    Vec3 d = direction.normalized();
    double theta = std::acos(std::clamp(d.z, -1.0, 1.0));
    double phi = std::atan2(d.y, d.x);
    if (phi < 0) phi += 2.0 * kPi;

    // Continuous texel coordinates with centers at integer+0.5.
    double fu = phi / (2.0 * kPi) * map.width - 0.5;
    double fv = theta / kPi * map.height - 0.5;
    int u0 = static_cast<int>(std::floor(fu));
    int v0 = static_cast<int>(std::floor(fv));
    double wu = fu - u0;
    double wv = fv - v0;

    auto wrap_u = [&](int u) {
        int w = map.width;
        return ((u % w) + w) % w;
    };
    int u0w = wrap_u(u0), u1w = wrap_u(u0 + 1);
    int v0c = std::clamp(v0, 0, map.height - 1);
    int v1c = std::clamp(v0 + 1, 0, map.height - 1);

    Rgb out;
    for (int c = 0; c < 3; ++c) {
        double top = map.at(u0w, v0c, c) * (1 - wu) + map.at(u1w, v0c, c) * wu;
        double bot = map.at(u0w, v1c, c) * (1 - wu) + map.at(u1w, v1c, c) * wu;
        double val = top * (1 - wv) + bot * wv;
        (c == 0 ? out.r : c == 1 ? out.g : out.b) = static_cast<float>(val);
    }
    return out;
}

EnvironmentMap reinhard_tonemap(const EnvironmentMap& map) {
    EnvironmentMap out = map;
    for (float& v : out.data) v = v / (1.0f + v);
    return out;
}

Image reinhard_tonemap(const Image& hdr) {
    Image out = hdr;
    for (double& v : out.data) v = v / (1.0 + v);
    return out;
}

EnvironmentMap project_to_view(const EnvironmentMap& map, const CameraPose& camera) {
    if (map.frame != EnvFrame::World)
        throw std::runtime_error("project_to_view expects a world-frame map");
    EnvironmentMap out(map.height, EnvFrame::Camera);
    Mat3 world_from_cam = camera.rotation.transposed();
    for (int v = 0; v < out.height; ++v)
        for (int u = 0; u < out.width; ++u) {
            Vec3 d = texel_to_dir(u, v, out.width, out.height);
            Rgb s = sample_radiance(map, world_from_cam * d);
            out.at(u, v, 0) = s.r;
            out.at(u, v, 1) = s.g;
            out.at(u, v, 2) = s.b;
        }
    return out;
}

EnvironmentMap downsample_env(const EnvironmentMap& map, int target_height) {
    if (target_height >= map.height) return map;
    if (map.height % target_height != 0)
        throw std::runtime_error("downsample_env: height must divide source height");
    int f = map.height / target_height;
    EnvironmentMap out(target_height, map.frame);
    for (int v = 0; v < out.height; ++v)
        for (int u = 0; u < out.width; ++u) {
            // Solid-angle-weighted mean radiance over the fine block.
            double wsum = 0;
            double acc[3] = {0, 0, 0};
            for (int dv = 0; dv < f; ++dv)
                for (int du = 0; du < f; ++du) {
                    int fv = v * f + dv, fu = u * f + du;
                    double w = texel_solid_angle(fv, map.height);
                    wsum += w;
                    for (int c = 0; c < 3; ++c) acc[c] += w * map.at(fu, fv, c);
                }
            for (int c = 0; c < 3; ++c)
                out.at(u, v, c) = static_cast<float>(acc[c] / wsum);
        }
    return out;
}

Image env_to_image(const EnvironmentMap& map) {
    Image img(map.width, map.height, 3);
    for (int v = 0; v < map.height; ++v)
        for (int u = 0; u < map.width; ++u)
            for (int c = 0; c < 3; ++c) img.at(u, v, c) = map.at(u, v, c);
    return img;
}

}  // namespace relight
