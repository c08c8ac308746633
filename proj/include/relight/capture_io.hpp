// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "relight/synthstage.hpp"

namespace relight {

// One JSON object per manifest line. Paths are relative to the capture dir.
struct ManifestRow {
    int t = 0;
    int camera_id = 0;
    std::string role;  // "flat" | "relit"
    std::string image_path;
    std::string mask_path;
    std::string env_path;
    uint64_t subject_id = 0;
};

std::vector<ManifestRow> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows);

struct CaptureMeta {
    uint64_t subject_id = 0;
    int complexity = 1;
    int n_pairs = 0;
    int image_size = 64;
    int n_cameras = 4;
    int env_height = 64;
    int n_lights = 32;
    double misalignment_px = 0;
    double a_motion = 0.01;
    uint64_t seed = 1;
    std::vector<int> light_ids;
};

// Layout under dir: manifest.jsonl, capture.json, images/, masks/, env/.
void save_capture(const std::string& dir, const CaptureSet& cap, const CaptureConfig& config);

CaptureMeta load_capture_meta(const std::string& dir);
std::vector<CameraPose> cameras_for(const CaptureMeta& meta);

// A pair rebuilt from disk. Images are dequantized to [0,1] doubles.
struct LoadedPair {
    int t = 0;
    int camera_id = 0;
    std::string env_path;  // relative
    Image flat;
    Image relit;
    Image mask;
    Image relit_mask;
};

std::vector<LoadedPair> load_pairs(const std::string& dir, const std::vector<ManifestRow>& rows);

// Environment maps referenced by manifest rows, keyed by relative path.
std::map<std::string, EnvironmentMap> load_envs(const std::string& dir,
                                                const std::vector<ManifestRow>& rows);

// Light id encoded in an env path ("env/light_0007.pfm" -> 7); -1 if unparseable.
int light_id_from_path(const std::string& env_path);

// Rebuilds a full in-memory CaptureSet from a saved directory. Prefers
// manifest_filtered.jsonl (written by preprocessing) over manifest.jsonl.
// The scene description is not serialized and is left default-constructed.
CaptureSet load_capture_set(const std::string& dir);

}  // namespace relight
