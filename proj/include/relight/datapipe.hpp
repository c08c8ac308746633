// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relight/capture_io.hpp"
#include "relight/image.hpp"

namespace relight {

// Pairs an interleaved flat/relit row sequence. Throws on odd length or when
// a row's role breaks the flat, relit, flat, relit pattern.
std::vector<std::pair<ManifestRow, ManifestRow>> demux(const std::vector<ManifestRow>& rows);

// Per-pixel temporal median with a centered window; edge frames use the
// clipped window. Binary in, binary out. Even-count ties keep the center
// frame's value.
std::vector<Image> temporal_mask_filter(const std::vector<Image>& masks, int window = 5);

// composite = pred * alpha + bg * (1 - alpha). Alpha may be 1-channel.
Image composite_background(const Image& pred, const Image& alpha, const Image& bg);

// Zero-pads to the target size, centered; odd leftovers go right/bottom.
Image pad_to_canvas(const Image& image, int target_w, int target_h);
Image crop_from_canvas(const Image& image, int orig_w, int orig_h);

struct DatasetSplit {
    std::vector<int> train_pairs;     // indices into the pair list
    std::vector<int> test_pairs;
    std::vector<int> heldout_lights;  // light ids
    std::vector<int> heldout_cameras;
    int frame_threshold = 0;          // t >= threshold routes to test
    uint64_t seed = 0;
};

struct PairKey {
    int t = 0;
    int camera_id = 0;
    int light_id = 0;
};

// Holds out a uniform sample of lights plus everything at t >= ceil(frame_frac
// * n_steps) and any listed camera. Throws if the train side comes up empty.
DatasetSplit split_dataset(const std::vector<PairKey>& pairs, int n_steps, int n_lights,
                           double light_holdout_frac, double frame_frac,
                           const std::vector<int>& heldout_cameras, uint64_t seed);

void save_split(const std::string& path, const DatasetSplit& split);
DatasetSplit load_split(const std::string& path);

enum class BackgroundMode { Keep, Remove };

// Remove zeroes background pixels of both images in place; Keep is identity.
void mask_background(Image& flat, Image& relit, const Image& mask, BackgroundMode mode);

BackgroundMode background_mode_from_string(const std::string& s);

}  // namespace relight
