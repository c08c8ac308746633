// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#include "relight/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "relight/common.hpp"
#include "relight/imageio.hpp"

namespace relight {

using nlohmann::json;

std::vector<std::pair<ManifestRow, ManifestRow>> demux(const std::vector<ManifestRow>& rows) {
    if (rows.size() % 2 != 0) throw std::runtime_error("demux: odd-length sequence");
    std::vector<std::pair<ManifestRow, ManifestRow>> pairs;
    pairs.reserve(rows.size() / 2);
    for (size_t i = 0; i + 1 < rows.size(); i += 2) {
        if (rows[i].role != "flat" || rows[i + 1].role != "relit")
            throw std::runtime_error("demux: role mismatch at row " + std::to_string(i));
        pairs.emplace_back(rows[i], rows[i + 1]);
    }
    return pairs;
}

std::vector<Image> temporal_mask_filter(const std::vector<Image>& masks, int window) {
    if (window < 3 || window % 2 == 0)
        throw std::invalid_argument("temporal_mask_filter: window must be odd and >= 3");
    if (masks.empty()) return {};
    for (size_t i = 1; i < masks.size(); ++i)
        if (!masks[i].same_shape(masks[0]))
            throw std::invalid_argument("temporal_mask_filter: mask shapes differ");

    int n = static_cast<int>(masks.size());
    int half = window / 2;
    std::vector<Image> out(masks.size(), Image(masks[0].width, masks[0].height, 1));
    for (int i = 0; i < n; ++i) {
        int lo = std::max(0, i - half);
        int hi = std::min(n - 1, i + half);
        int count = hi - lo + 1;
        Image& dst = out[i];
        for (size_t p = 0; p < dst.data.size(); ++p) {
            int ones = 0;
            for (int j = lo; j <= hi; ++j) ones += masks[j].data[p] > 0.5 ? 1 : 0;
            double center = masks[i].data[p] > 0.5 ? 1.0 : 0.0;
            if (2 * ones > count)
                dst.data[p] = 1.0;
            else if (2 * ones == count)
                dst.data[p] = center;
            else
                dst.data[p] = 0.0;
        }
    }
    return out;
}

Image composite_background(const Image& pred, const Image& alpha, const Image& bg) {
    if (!pred.same_shape(bg) || alpha.width != pred.width || alpha.height != pred.height ||
        (alpha.channels != 1 && alpha.channels != pred.channels))
        throw std::invalid_argument("composite_background: shape mismatch");
    Image out(pred.width, pred.height, pred.channels);
    for (int y = 0; y < pred.height; ++y) {
        for (int x = 0; x < pred.width; ++x) {
            for (int c = 0; c < pred.channels; ++c) {
                double a = alpha.channels == 1 ? alpha.at(x, y, 0) : alpha.at(x, y, c);
                out.at(x, y, c) = pred.at(x, y, c) * a + bg.at(x, y, c) * (1.0 - a);
            }
        }
    }
    return out;
}

Image pad_to_canvas(const Image& image, int target_w, int target_h) {
    if (target_w < image.width || target_h < image.height)
        throw std::invalid_argument("pad_to_canvas: target smaller than source");
    int left = (target_w - image.width) / 2;
    int top = (target_h - image.height) / 2;
    Image out(target_w, target_h, image.channels);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < image.channels; ++c)
                out.at(x + left, y + top, c) = image.at(x, y, c);
    return out;
}

Image crop_from_canvas(const Image& image, int orig_w, int orig_h) {
    if (orig_w > image.width || orig_h > image.height)
        throw std::invalid_argument("crop_from_canvas: original larger than canvas");
    int left = (image.width - orig_w) / 2;
    int top = (image.height - orig_h) / 2;
    Image out(orig_w, orig_h, image.channels);
    for (int y = 0; y < orig_h; ++y)
        for (int x = 0; x < orig_w; ++x)
            for (int c = 0; c < image.channels; ++c)
                out.at(x, y, c) = image.at(x + left, y + top, c);
    return out;
}

DatasetSplit split_dataset(const std::vector<PairKey>& pairs, int n_steps, int n_lights,
                           double light_holdout_frac, double frame_frac,
                           const std::vector<int>& heldout_cameras, uint64_t seed) {
    if (light_holdout_frac <= 0 || light_holdout_frac >= 1 || frame_frac <= 0 || frame_frac >= 1)
        throw std::invalid_argument("split_dataset: fractions must be in (0,1)");
    if (n_lights < 1 || n_steps < 1) throw std::invalid_argument("split_dataset: empty capture");

    DatasetSplit split;
    split.seed = seed;
    split.heldout_cameras = heldout_cameras;
    split.frame_threshold = static_cast<int>(std::ceil(frame_frac * n_steps));

    int holdout_count =
        std::clamp(static_cast<int>(std::lround(light_holdout_frac * n_lights)), 1, n_lights - 1);
    std::vector<int> light_order(n_lights);
    for (int i = 0; i < n_lights; ++i) light_order[i] = i;
    Rng rng(derive_seed(seed, "light-holdout"));
    for (int i = 0; i < holdout_count; ++i) {
        size_t j = i + rng.uniform_index(light_order.size() - i);
        std::swap(light_order[i], light_order[j]);
    }
    split.heldout_lights.assign(light_order.begin(), light_order.begin() + holdout_count);
    std::sort(split.heldout_lights.begin(), split.heldout_lights.end());

    std::set<int> ho_lights(split.heldout_lights.begin(), split.heldout_lights.end());
    std::set<int> ho_cams(heldout_cameras.begin(), heldout_cameras.end());
    for (size_t i = 0; i < pairs.size(); ++i) {
        const PairKey& k = pairs[i];
        bool test = ho_lights.count(k.light_id) || ho_cams.count(k.camera_id) ||
                    k.t >= split.frame_threshold;
        (test ? split.test_pairs : split.train_pairs).push_back(static_cast<int>(i));
    }
    if (split.train_pairs.empty()) throw std::runtime_error("split_dataset: empty train set");
    return split;
}

void save_split(const std::string& path, const DatasetSplit& split) {
    json j;
    j["train_pairs"] = split.train_pairs;
    j["test_pairs"] = split.test_pairs;
    j["heldout_lights"] = split.heldout_lights;
    j["heldout_cameras"] = split.heldout_cameras;
    j["frame_threshold"] = split.frame_threshold;
    j["seed"] = split.seed;
    atomic_write_bytes(path, j.dump(2) + "\n");
}

DatasetSplit load_split(const std::string& path) {
    json j = json::parse(read_file_bytes(path));
    DatasetSplit s;
    s.train_pairs = j.at("train_pairs").get<std::vector<int>>();
    s.test_pairs = j.at("test_pairs").get<std::vector<int>>();
    s.heldout_lights = j.at("heldout_lights").get<std::vector<int>>();
    s.heldout_cameras = j.at("heldout_cameras").get<std::vector<int>>();
    s.frame_threshold = j.at("frame_threshold").get<int>();
    s.seed = j.at("seed").get<uint64_t>();
    return s;
}

void mask_background(Image& flat, Image& relit, const Image& mask, BackgroundMode mode) {
    if (mode == BackgroundMode::Keep) return;
    if (mask.width != flat.width || mask.height != flat.height || !flat.same_shape(relit))
        throw std::invalid_argument("mask_background: shape mismatch");
    for (int y = 0; y < flat.height; ++y) {
        for (int x = 0; x < flat.width; ++x) {
            if (mask.at(x, y, 0) > 0.5) continue;
            for (int c = 0; c < flat.channels; ++c) {
                flat.at(x, y, c) = 0.0;
                relit.at(x, y, c) = 0.0;
            }
        }
    }
}

BackgroundMode background_mode_from_string(const std::string& s) {
    if (s == "keep") return BackgroundMode::Keep;
    if (s == "remove") return BackgroundMode::Remove;
    throw std::invalid_argument("background mode must be keep or remove");
}

}  // namespace relight
