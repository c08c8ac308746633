// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "relight/envmap.hpp"
#include "relight/image.hpp"

namespace relight {

// ---------------------------------------------------------------------------
// Synthetic light stage: an analytic sphere-assembly subject rendered under
// arbitrary HDR environments. Deterministic, so rendered images double as
// exact ground truth for evaluation.
// ---------------------------------------------------------------------------

inline constexpr int kAlbedoTexSize = 16;

struct SphereSpec {
    Vec3 base_center;
    double radius = 0.1;
    // Offset curve: offset(t) = a_motion * (amp_unit / freq) * sin(freq*t + phase), per axis.
    Vec3 motion_amp_unit;   // in [0.5, 1], peak per-axis speed = a_motion * amp_unit
    Vec3 motion_freq;       // rad per frame
    Vec3 motion_phase;
    Vec3 spin_axis;         // unit
    double spin_rate = 0;   // rad per frame
    std::vector<double> albedo;  // 16*16*3, row-major, [0,1]
    double specular = 0;    // k_s in [0,1]
    double shininess = 1;   // Blinn-Phong exponent >= 1

    Vec3 albedo_texel(int tu, int tv) const {
        size_t i = (static_cast<size_t>(tv) * kAlbedoTexSize + tu) * 3;
        return {albedo[i], albedo[i + 1], albedo[i + 2]};
    }
};

struct SceneSpec {
    uint64_t subject_id = 0;
    int complexity = 1;
    std::vector<SphereSpec> spheres;
    Vec3 background{0.2, 0.2, 0.2};  // constant RGB behind the subject
};

struct MotionState {
    double t = 0;
    std::vector<Vec3> centers;    // sphere centers at time t
    std::vector<Mat3> rotations;  // sphere spin at time t

    double max_offset = 0;        // bound used for placement margins
};

// Deterministic subject from (id, complexity). Complexity 1..4 maps to
// 2/3/5/8 spheres and increasing albedo texture frequency.
SceneSpec make_subject(uint64_t subject_id, int complexity);

MotionState motion_at(const SceneSpec& scene, double t, double a_motion = 0.01);

// Ring of cameras around +z axis, looking at the origin.
std::vector<CameraPose> make_ring_cameras(int count, int image_size, double distance = 3.0,
                                          double subject_radius = 0.95);

struct RenderResult {
    Image rgb;   // clamped to [0,1]
    Image mask;  // 1 channel, {0,1}
};

struct RelitRenderResult {
    Image rgb;   // exposure-scaled, clamped to [0,1]
    Image hdr;   // pre-clamp radiance (subject pixels), background already composited
    Image mask;
};

// Albedo pass: subject pixels show the sphere texture, no shading.
RenderResult render_flat(const SceneSpec& scene, const MotionState& motion,
                         const CameraPose& camera);

// Lambertian + normalized Blinn-Phong shading with hard shadows. Light sums
// run over a height-16 downsample of the environment. Directions at or below
// the surface horizon count as self-occluded.
RelitRenderResult render_relit(const SceneSpec& scene, const MotionState& motion,
                               const CameraPose& camera, const EnvironmentMap& env,
                               double exposure = 1.0);

// ---------------------------------------------------------------------------
// Light pool: 70% smooth multi-lobe HDRI-like maps, 30% OLATs.
// ---------------------------------------------------------------------------

struct LightPool {
    std::vector<EnvironmentMap> maps;
    uint64_t seed = 0;
};

LightPool make_light_pool(int count, int env_height, uint64_t seed);

// ---------------------------------------------------------------------------
// Capture assembly: interleaved flat/relit pairs over time and cameras.
// ---------------------------------------------------------------------------

struct FramePair {
    int t = 0;
    int camera_id = 0;
    int light_id = 0;
    Image flat;
    Image relit;
    Image mask;        // flat-frame subject coverage
    Image relit_mask;  // relit-frame coverage; equals mask when aligned
};

struct CaptureSet {
    uint64_t subject_id = 0;
    int complexity = 1;
    int n_pairs = 0;              // time steps; pairs.size() == n_pairs * cameras.size()
    std::vector<CameraPose> cameras;
    LightPool lights;
    std::vector<int> light_ids;   // per t
    std::vector<FramePair> pairs; // t-major, then camera
    double misalignment_px = 0;
    double a_motion = 0.01;
    SceneSpec scene;
};

struct CaptureConfig {
    int n_pairs = 128;            // time steps, shared across cameras
    int image_size = 64;
    int n_cameras = 4;
    int env_height = 64;
    int n_lights = 32;
    double misalignment_px = 0;
    double a_motion = 0.01;
    uint64_t seed = 1;
};

CaptureSet make_capture(const SceneSpec& scene, const CaptureConfig& config);

// Image-plane speed estimate (pixels per frame) for misalignment calibration.
double estimate_pixels_per_frame(const SceneSpec& scene, const CameraPose& camera,
                                 double a_motion, int n_pairs);

// Gaussian blur (sigma = 2*level px) + additive Gaussian noise (sigma =
// 0.05*level), clamped to [0,1]. Level 0 is the identity.
Image degrade(const Image& image, double level, uint64_t seed = 0xDE64ADEull);

}  // namespace relight
