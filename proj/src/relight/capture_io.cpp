// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#include "relight/capture_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "relight/imageio.hpp"

namespace relight {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string frame_name(int t, int camera_id, const char* role) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "t%05d_cam%02d_%s.png", t, camera_id, role);
    return buf;
}

std::string light_name(int id) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "light_%04d.pfm", id);
    return buf;
}

}  // namespace

std::vector<ManifestRow> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_manifest: cannot open " + path);
    std::vector<ManifestRow> rows;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw std::runtime_error("read_manifest: bad JSON at line " + std::to_string(lineno));
        ManifestRow r;
        r.t = j.at("t").get<int>();
        r.camera_id = j.at("camera_id").get<int>();
        r.role = j.at("role").get<std::string>();
        r.image_path = j.at("image_path").get<std::string>();
        r.mask_path = j.at("mask_path").get<std::string>();
        r.env_path = j.at("env_path").get<std::string>();
        r.subject_id = j.at("subject_id").get<uint64_t>();
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
    std::ostringstream out;
    for (const auto& r : rows) {
        json j;
        j["t"] = r.t;
        j["camera_id"] = r.camera_id;
        j["role"] = r.role;
        j["image_path"] = r.image_path;
        j["mask_path"] = r.mask_path;
        j["env_path"] = r.env_path;
        j["subject_id"] = r.subject_id;
        out << j.dump() << '\n';
    }
    atomic_write_bytes(path, out.str());
}

void save_capture(const std::string& dir, const CaptureSet& cap, const CaptureConfig& config) {
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "masks");
    fs::create_directories(fs::path(dir) / "env");

    for (size_t i = 0; i < cap.lights.maps.size(); ++i)
        save_pfm_env((fs::path(dir) / "env" / light_name(static_cast<int>(i))).string(),
                     cap.lights.maps[i]);

    std::vector<ManifestRow> rows;
    rows.reserve(cap.pairs.size() * 2);
    for (const auto& pair : cap.pairs) {
        std::string env_rel = "env/" + light_name(pair.light_id);
        std::string flat_name = frame_name(pair.t, pair.camera_id, "flat");
        std::string relit_name = frame_name(pair.t, pair.camera_id, "relit");

        write_png((fs::path(dir) / "images" / flat_name).string(), pair.flat);
        write_png((fs::path(dir) / "masks" / flat_name).string(), pair.mask);
        write_png((fs::path(dir) / "images" / relit_name).string(), pair.relit);
        write_png((fs::path(dir) / "masks" / relit_name).string(), pair.relit_mask);

        rows.push_back({pair.t, pair.camera_id, "flat", "images/" + flat_name,
                        "masks/" + flat_name, env_rel, cap.subject_id});
        rows.push_back({pair.t, pair.camera_id, "relit", "images/" + relit_name,
                        "masks/" + relit_name, env_rel, cap.subject_id});
    }
    write_manifest((fs::path(dir) / "manifest.jsonl").string(), rows);

    json j;
    j["subject_id"] = cap.subject_id;
    j["complexity"] = cap.complexity;
    j["n_pairs"] = cap.n_pairs;
    j["image_size"] = config.image_size;
    j["n_cameras"] = config.n_cameras;
    j["env_height"] = config.env_height;
    j["n_lights"] = static_cast<int>(cap.lights.maps.size());
    j["misalignment_px"] = cap.misalignment_px;
    j["a_motion"] = cap.a_motion;
    j["seed"] = config.seed;
    j["light_ids"] = cap.light_ids;
    atomic_write_bytes((fs::path(dir) / "capture.json").string(), j.dump(2) + "\n");
}

CaptureMeta load_capture_meta(const std::string& dir) {
    std::string text = read_file_bytes((fs::path(dir) / "capture.json").string());
    json j = json::parse(text);
    CaptureMeta m;
    m.subject_id = j.at("subject_id").get<uint64_t>();
    m.complexity = j.at("complexity").get<int>();
    m.n_pairs = j.at("n_pairs").get<int>();
    m.image_size = j.at("image_size").get<int>();
    m.n_cameras = j.at("n_cameras").get<int>();
    m.env_height = j.at("env_height").get<int>();
    m.n_lights = j.at("n_lights").get<int>();
    m.misalignment_px = j.at("misalignment_px").get<double>();
    m.a_motion = j.at("a_motion").get<double>();
    m.seed = j.at("seed").get<uint64_t>();
    m.light_ids = j.at("light_ids").get<std::vector<int>>();
    return m;
}

std::vector<CameraPose> cameras_for(const CaptureMeta& meta) {
    return make_ring_cameras(meta.n_cameras, meta.image_size);
}

std::vector<LoadedPair> load_pairs(const std::string& dir, const std::vector<ManifestRow>& rows) {
    if (rows.size() % 2 != 0)
        throw std::runtime_error("load_pairs: manifest has odd number of rows");
    std::vector<LoadedPair> pairs;
    pairs.reserve(rows.size() / 2);
    for (size_t i = 0; i + 1 < rows.size(); i += 2) {
        const ManifestRow& a = rows[i];
        const ManifestRow& b = rows[i + 1];
        if (a.role != "flat" || b.role != "relit")
            throw std::runtime_error("load_pairs: role mismatch at manifest row " +
                                     std::to_string(i));
        if (a.t != b.t || a.camera_id != b.camera_id)
            throw std::runtime_error("load_pairs: pair rows disagree at manifest row " +
                                     std::to_string(i));
        LoadedPair p;
        p.t = a.t;
        p.camera_id = a.camera_id;
        p.env_path = b.env_path;
        p.flat = read_png((fs::path(dir) / a.image_path).string());
        p.mask = read_png((fs::path(dir) / a.mask_path).string());
        p.relit = read_png((fs::path(dir) / b.image_path).string());
        p.relit_mask = read_png((fs::path(dir) / b.mask_path).string());
        pairs.push_back(std::move(p));
    }
    return pairs;
}

std::map<std::string, EnvironmentMap> load_envs(const std::string& dir,
                                                const std::vector<ManifestRow>& rows) {
    std::map<std::string, EnvironmentMap> envs;
    for (const auto& r : rows) {
        if (r.env_path.empty() || envs.count(r.env_path)) continue;
        envs.emplace(r.env_path, load_pfm_env((fs::path(dir) / r.env_path).string()));
    }
    return envs;
}

CaptureSet load_capture_set(const std::string& dir) {
    CaptureMeta meta = load_capture_meta(dir);
    std::string manifest = (fs::path(dir) / "manifest_filtered.jsonl").string();
    if (!fs::exists(manifest)) manifest = (fs::path(dir) / "manifest.jsonl").string();
    std::vector<ManifestRow> rows = read_manifest(manifest);
    std::vector<LoadedPair> loaded = load_pairs(dir, rows);

    CaptureSet cap;
    cap.subject_id = meta.subject_id;
    cap.complexity = meta.complexity;
    cap.n_pairs = meta.n_pairs;
    cap.cameras = cameras_for(meta);
    cap.light_ids = meta.light_ids;
    cap.misalignment_px = meta.misalignment_px;
    cap.a_motion = meta.a_motion;

    cap.lights.maps.resize(meta.n_lights);
    cap.lights.seed = meta.seed;
    std::vector<bool> have(meta.n_lights, false);
    for (int id = 0; id < meta.n_lights; ++id) {
        fs::path p = fs::path(dir) / "env" / light_name(id);
        if (fs::exists(p)) {
            cap.lights.maps[id] = load_pfm_env(p.string());
            have[id] = true;
        }
    }

    cap.pairs.reserve(loaded.size());
    for (auto& lp : loaded) {
        FramePair p;
        p.t = lp.t;
        p.camera_id = lp.camera_id;
        p.light_id = light_id_from_path(lp.env_path);
        if (p.light_id < 0 || p.light_id >= meta.n_lights || !have[p.light_id])
            throw std::runtime_error("load_capture_set: missing env for " + lp.env_path);
        p.flat = std::move(lp.flat);
        p.relit = std::move(lp.relit);
        p.mask = std::move(lp.mask);
        p.relit_mask = std::move(lp.relit_mask);
        cap.pairs.push_back(std::move(p));
    }
    return cap;
}

int light_id_from_path(const std::string& env_path) {
    auto us = env_path.rfind('_');
    auto dot = env_path.rfind('.');
    if (us == std::string::npos || dot == std::string::npos || dot <= us + 1) return -1;
    try {
        return std::stoi(env_path.substr(us + 1, dot - us - 1));
    } catch (...) {
        return -1;
    }
}

}  // namespace relight
