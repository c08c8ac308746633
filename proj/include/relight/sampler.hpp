// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "relight/envmap.hpp"
#include "relight/train.hpp"

namespace relight {

// ---------------------------------------------------------------------------
// DDIM sampling on the x0-regression model, plus chunked video assembly.
// ---------------------------------------------------------------------------

struct DdimConfig {
    int steps = 15;
    double eta = 0.0;   // 0 = fully deterministic given seed
    uint64_t seed = 0;  // fixes the initial noise
};

// Descending timestep subsequence from T to 1, `steps` entries.
std::vector<int> ddim_timesteps(int T, int steps);

// Core update loop with a pluggable x0 predictor so tests can swap in
// oracles. predict(z, t) must return x0_hat with z's shape.
Tensor<float> ddim_sample_with(
    const DiffusionSchedule& schedule, const std::vector<int>& shape, const DdimConfig& cfg,
    const std::function<Tensor<float>(const Tensor<float>&, int)>& predict_x0);

// Network-driven sampler: builds the conditioning stack around each z.
Tensor<float> ddim_sample(const UNet<float>& model, const DiffusionSchedule& schedule,
                          const Tensor<float>& g, const Tensor<float>& cenv,
                          const DdimConfig& cfg);

// Full single-frame pipeline: world env -> camera frame -> Reinhard ->
// resize -> conditioning stack -> DDIM. Output clamped to [0,1].
Image relight_frame(const UNet<float>& model, const DiffusionSchedule& schedule,
                    const Image& flat, const EnvironmentMap& env, const CameraPose& camera,
                    const DdimConfig& cfg);

// Camera-frame env conditioning image at the given resolution.
Image env_conditioning_image(const EnvironmentMap& env, const CameraPose& camera, int out_w,
                             int out_h);

// Overlap-blended concatenation. Frame i of the overlap takes weight
// w_i = (i+1)/(overlap+1) from the second chunk.
std::vector<Image> linear_blend(const std::vector<Image>& a, const std::vector<Image>& b,
                                int overlap);

struct ChunkPlan {
    int chunk_len = 9;
    int overlap = 4;
    int total_frames = 0;
};

// [start, end) windows with stride chunk_len - overlap; the final window is
// shifted back so the plan exactly covers [0, total_frames).
std::vector<std::pair<int, int>> plan_chunks(const ChunkPlan& plan);

// Renders each chunk independently (frames of a chunk share one initial
// noise, drawn from that chunk's seed) and folds the results left to right.
std::vector<Image> long_video(const UNet<float>& model, const DiffusionSchedule& schedule,
                              const std::vector<Image>& flats,
                              const std::vector<const EnvironmentMap*>& envs,
                              const CameraPose& camera, const ChunkPlan& plan,
                              const std::vector<uint64_t>& chunk_seeds, const DdimConfig& base);

struct ConsistencyReport {
    Image std_map;        // per-pixel std across seeds, channel-mean
    double mean_std = 0;  // averaged over the mask (or everywhere if null)
};

ConsistencyReport consistency_report(const std::vector<Image>& outputs, const Image* mask);

// Video persistence: numbered PNGs plus metadata JSON (fps, plan, seeds).
void write_video(const std::string& dir, const std::vector<Image>& frames, double fps,
                 const ChunkPlan& plan, const std::vector<uint64_t>& seeds);
std::vector<Image> read_video(const std::string& dir);

}  // namespace relight
