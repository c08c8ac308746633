// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
//
// relightkit: synthetic light-stage capture, diffusion relighting training,
// chunked video inference, evaluation, and the ablation matrix.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "relight/capture_io.hpp"
#include "relight/checkpoint.hpp"
#include "relight/datapipe.hpp"
#include "relight/experiments.hpp"
#include "relight/imageio.hpp"
#include "relight/metrics.hpp"
#include "relight/sampler.hpp"
#include "relight/synthstage.hpp"
#include "relight/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace relight;

namespace {

void write_echo(const std::string& path, const std::string& command, const json& flags) {
    json j;
    j["command"] = command;
    j["flags"] = flags;
    atomic_write_bytes(path, j.dump(2) + "\n");
}

std::string frame_png_name(int t, int camera_id, const char* role) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "t%05d_cam%02d_%s.png", t, camera_id, role);
    return buf;
}

// Frames from a video dir (video.json) or any directory of PNGs, sorted.
std::vector<Image> read_frames(const std::string& dir) {
    if (fs::exists(fs::path(dir) / "video.json")) return read_video(dir);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".png") names.push_back(e.path().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw std::runtime_error("no PNG frames in " + dir);
    std::vector<Image> frames;
    frames.reserve(names.size());
    for (const auto& n : names) frames.push_back(read_png(n));
    return frames;
}

const FramePair& pair_at(const CaptureSet& cap, int t, int camera_id) {
    size_t idx = static_cast<size_t>(t) * cap.cameras.size() + camera_id;
    if (idx < cap.pairs.size() && cap.pairs[idx].t == t &&
        cap.pairs[idx].camera_id == camera_id)
        return cap.pairs[idx];
    for (const auto& p : cap.pairs)
        if (p.t == t && p.camera_id == camera_id) return p;
    throw std::runtime_error("capture has no pair for t=" + std::to_string(t) + " camera=" +
                             std::to_string(camera_id));
}

struct SynthCaptureArgs {
    uint64_t subject_id = 0;
    int complexity = 2;
    int pairs = 128;
    int cameras = 4;
    double misalign_px = 0;
    int size = 64;
    int env_height = 64;
    int lights = 32;
    double a_motion = 0.01;
    uint64_t seed = 1;
    std::string out;
};

int cmd_synth_capture(const SynthCaptureArgs& a) {
    SceneSpec scene = make_subject(a.subject_id, a.complexity);
    CaptureConfig cc;
    cc.n_pairs = a.pairs;
    cc.image_size = a.size;
    cc.n_cameras = a.cameras;
    cc.env_height = a.env_height;
    cc.n_lights = a.lights;
    cc.misalignment_px = a.misalign_px;
    cc.a_motion = a.a_motion;
    cc.seed = a.seed;
    CaptureSet cap = make_capture(scene, cc);
    save_capture(a.out, cap, cc);

    json flags{{"subject_id", a.subject_id}, {"complexity", a.complexity},
               {"pairs", a.pairs},           {"cameras", a.cameras},
               {"misalign_px", a.misalign_px}, {"size", a.size},
               {"env_height", a.env_height}, {"lights", a.lights},
               {"a_motion", a.a_motion},     {"seed", a.seed},
               {"out", a.out}};
    write_echo((fs::path(a.out) / "cli_config.json").string(), "synth-capture", flags);
    std::printf("wrote capture: %zu pairs to %s\n", cap.pairs.size(), a.out.c_str());
    return 0;
}

struct PreprocessArgs {
    std::string in;
    int window = 5;
    std::string background = "keep";
    uint64_t split_seed = 1;
    double light_holdout = 0.25;
    double frame_frac = 0.85;
};

int cmd_preprocess(const PreprocessArgs& a) {
    background_mode_from_string(a.background);  // validate
    CaptureMeta meta = load_capture_meta(a.in);
    std::vector<ManifestRow> rows = read_manifest((fs::path(a.in) / "manifest.jsonl").string());

    // Majority-filter each (camera, role) mask sequence over time.
    fs::create_directories(fs::path(a.in) / "masks_filtered");
    std::map<std::pair<int, std::string>, std::vector<const ManifestRow*>> groups;
    for (const auto& r : rows) groups[{r.camera_id, r.role}].push_back(&r);
    for (auto& [key, group] : groups) {
        std::sort(group.begin(), group.end(),
                  [](const ManifestRow* x, const ManifestRow* y) { return x->t < y->t; });
        std::vector<Image> masks;
        masks.reserve(group.size());
        for (const auto* r : group)
            masks.push_back(read_png((fs::path(a.in) / r->mask_path).string()));
        std::vector<Image> filtered = temporal_mask_filter(masks, a.window);
        for (size_t i = 0; i < group.size(); ++i) {
            std::string name = frame_png_name(group[i]->t, group[i]->camera_id,
                                              group[i]->role.c_str());
            write_png((fs::path(a.in) / "masks_filtered" / name).string(), filtered[i]);
        }
    }
    std::vector<ManifestRow> filtered_rows = rows;
    for (auto& r : filtered_rows)
        r.mask_path = "masks_filtered/" + frame_png_name(r.t, r.camera_id, r.role.c_str());
    write_manifest((fs::path(a.in) / "manifest_filtered.jsonl").string(), filtered_rows);

    auto pairs = demux(rows);
    std::vector<PairKey> keys;
    keys.reserve(pairs.size());
    for (const auto& [flat, relit] : pairs)
        keys.push_back({flat.t, flat.camera_id, light_id_from_path(relit.env_path)});
    DatasetSplit split = split_dataset(keys, meta.n_pairs, meta.n_lights, a.light_holdout,
                                       a.frame_frac, {}, a.split_seed);
    save_split((fs::path(a.in) / "split.json").string(), split);

    json flags{{"in", a.in},
               {"mask_filter_window", a.window},
               {"background", a.background},
               {"split_seed", a.split_seed},
               {"light_holdout", a.light_holdout},
               {"frame_frac", a.frame_frac}};
    write_echo((fs::path(a.in) / "preprocess.json").string(), "preprocess", flags);
    std::printf("preprocess: %zu pairs, %zu train / %zu test, %zu held-out lights\n",
                keys.size(), split.train_pairs.size(), split.test_pairs.size(),
                split.heldout_lights.size());
    return 0;
}

struct PretrainArgs {
    int subjects = 6;
    int steps = 1500;
    std::string out;
    int size = 32;
    int pairs = 48;
    int cameras = 2;
    int lights = 12;
    int env_height = 16;
    int complexity = 2;
    int base_width = 16;
    int batch = 4;
    double lr = 3e-4;
    uint64_t seed = 1;
};

int cmd_pretrain(const PretrainArgs& a) {
    ExpOptions eo;
    eo.image_size = a.size;
    eo.n_steps = a.pairs;
    eo.n_cameras = a.cameras;
    eo.n_lights = a.lights;
    eo.env_height = a.env_height;
    eo.complexity = a.complexity;
    eo.base_width = a.base_width;
    eo.batch_size = a.batch;
    eo.pretrain_subjects = a.subjects;
    eo.pretrain_steps = a.steps;
    eo.pretrain_lr = a.lr;
    eo.seed = a.seed;

    std::vector<SubjectSet> sets;
    uint64_t cap_base = derive_seed(a.seed, "pretrain-cap");
    for (int i = 0; i < a.subjects; ++i) {
        CaptureSet cap = make_experiment_capture(1000 + static_cast<uint64_t>(i),
                                                 derive_seed(cap_base, static_cast<uint64_t>(i)),
                                                 0.0, eo.a_motion, eo);
        sets.push_back(assemble_items(std::move(cap), AssembleOptions{}, eo));
    }
    std::vector<const SubjectSet*> ptrs;
    for (const auto& s : sets) ptrs.push_back(&s);

    fs::path out(a.out);
    fs::path train_dir = out.parent_path().empty() ? fs::path(out.string() + ".train")
                                                   : out.parent_path() / (out.stem().string() +
                                                                          ".train");
    TrainResult tr = pretrain_prior(ptrs, eo, train_dir.string());
    atomic_write_bytes(a.out, read_file_bytes(tr.checkpoint_path));

    json flags{{"subjects", a.subjects}, {"steps", a.steps},   {"out", a.out},
               {"size", a.size},         {"pairs", a.pairs},   {"cameras", a.cameras},
               {"lights", a.lights},     {"env_height", a.env_height},
               {"complexity", a.complexity}, {"base_width", a.base_width},
               {"batch", a.batch},       {"lr", a.lr},         {"seed", a.seed}};
    write_echo(a.out + ".config.json", "pretrain", flags);
    std::printf("pretrain: %d steps over %zu pooled pairs, final loss %.6f -> %s\n", a.steps,
                [&] {
                    size_t n = 0;
                    for (const auto& s : sets) n += s.train_items.size();
                    return n;
                }(),
                tr.loss_history.empty() ? 0.0 : tr.loss_history.back(), a.out.c_str());
    return 0;
}

struct AdaptArgs {
    std::string mode = "lora";
    std::string base;
    std::string subject;
    std::string input_source = "flat";
    std::string background;  // empty: preprocess.json else keep
    int steps = 600;
    int batch = 4;
    double lr = 0;  // 0: mode default
    double degrade_level = 0.6;
    int lora_rank = 8;
    double lora_alpha = 16.0;
    int base_width = 16;
    uint64_t seed = 1;
    std::string out;
};

int cmd_adapt(const AdaptArgs& a) {
    if (a.mode == "none") {
        if (a.base.empty()) throw std::invalid_argument("adapt: --mode none needs --base");
        atomic_write_bytes(a.out, read_file_bytes(a.base));
        json flags{{"mode", a.mode}, {"base", a.base}, {"out", a.out}};
        write_echo(a.out + ".config.json", "adapt", flags);
        std::printf("adapt: zero-shot prior copied to %s\n", a.out.c_str());
        return 0;
    }
    if (a.input_source != "flat" && a.input_source != "degraded")
        throw std::invalid_argument("adapt: bad --input-source " + a.input_source);
    TrainMode mode = train_mode_from_string(a.mode);

    std::string background = a.background;
    if (background.empty()) {
        background = "keep";
        fs::path pp = fs::path(a.subject) / "preprocess.json";
        if (fs::exists(pp)) {
            json j = json::parse(read_file_bytes(pp.string()));
            if (j.contains("flags") && j["flags"].contains("background"))
                background = j["flags"]["background"].get<std::string>();
        }
    }

    CaptureSet cap = load_capture_set(a.subject);

    ExpOptions eo;
    eo.image_size = cap.pairs.empty() ? 0 : cap.pairs[0].flat.width;
    eo.batch_size = a.batch;
    eo.degrade_level = a.degrade_level;
    eo.lora_rank = a.lora_rank;
    eo.lora_alpha = a.lora_alpha;
    eo.base_width = a.base_width;
    eo.seed = a.seed;

    AssembleOptions as;
    as.background = background_mode_from_string(background);
    as.degraded_input = a.input_source == "degraded";
    as.degrade_seed = derive_seed(a.seed, "adapt-degrade");

    DatasetSplit split;
    const DatasetSplit* split_ptr = nullptr;
    fs::path split_path = fs::path(a.subject) / "split.json";
    if (fs::exists(split_path)) {
        split = load_split(split_path.string());
        split_ptr = &split;
    }
    SubjectSet subj = assemble_items(std::move(cap), as, eo, split_ptr);

    TrainConfig tc;
    tc.batch_size = a.batch;
    tc.steps = a.steps;
    tc.seed = derive_seed(a.seed, "adapt-" + a.mode);
    tc.mode = mode;
    tc.input_source = a.input_source;
    tc.background = background;
    tc.lora_rank = a.lora_rank;
    tc.lora_alpha = a.lora_alpha;
    tc.schedule_T = eo.schedule_T;

    UNet<float> base_model;
    const UNet<float>* init = nullptr;
    if (mode == TrainMode::Lora || mode == TrainMode::Full) {
        if (a.base.empty()) throw std::invalid_argument("adapt: --mode " + a.mode +
                                                        " needs --base");
        base_model = load_checkpoint(a.base).model;
        tc.net = base_model.cfg;
        init = &base_model;
    } else {
        tc.net.base = a.base_width;
    }
    if (a.lr > 0) {
        tc.lr = a.lr;
    } else {
        switch (mode) {
            case TrainMode::Lora: tc.lr = 1e-3; break;
            default: tc.lr = 3e-4; break;
        }
    }

    fs::path out(a.out);
    fs::path train_dir = out.parent_path().empty() ? fs::path(out.string() + ".train")
                                                   : out.parent_path() / (out.stem().string() +
                                                                          ".train");
    fs::create_directories(train_dir);
    tc.out_dir = train_dir.string();
    TrainResult tr = train(tc, subj.train_items, init);
    atomic_write_bytes(a.out, read_file_bytes(tr.checkpoint_path));

    json flags{{"mode", a.mode},
               {"base", a.base},
               {"subject", a.subject},
               {"input_source", a.input_source},
               {"background", background},
               {"steps", a.steps},
               {"batch", a.batch},
               {"lr", tc.lr},
               {"degrade_level", a.degrade_level},
               {"lora_rank", a.lora_rank},
               {"lora_alpha", a.lora_alpha},
               {"base_width", a.base_width},
               {"seed", a.seed},
               {"out", a.out}};
    write_echo(a.out + ".config.json", "adapt", flags);
    std::printf("adapt(%s): %d steps on %zu pairs, final loss %.6f -> %s\n", a.mode.c_str(),
                a.steps, subj.train_items.size(),
                tr.loss_history.empty() ? 0.0 : tr.loss_history.back(), a.out.c_str());
    return 0;
}

struct InferArgs {
    std::string ckpt;
    std::string capture;
    int camera = 0;
    int chunk_len = 9;
    int overlap = 4;
    int ddim_steps = 15;
    uint64_t seed = 0;
    double fps = 24.0;
    std::string out;
    std::string gt_out;
    std::string masks_out;
    std::string background;     // empty: checkpoint config
    std::string input_source;   // empty: checkpoint config
    double degrade_level = 0.6;
};

int cmd_infer(const InferArgs& a) {
    Checkpoint ck = load_checkpoint(a.ckpt);
    UNet<float> model = ck.adapter ? apply_lora(ck.model, *ck.adapter) : ck.model;

    TrainConfig tcfg;
    try {
        tcfg = train_config_from_json(ck.config_json);
    } catch (...) {
    }
    std::string background = a.background.empty() ? tcfg.background : a.background;
    std::string input_source = a.input_source.empty() ? tcfg.input_source : a.input_source;
    BackgroundMode bg = background_mode_from_string(background);

    CaptureSet cap = load_capture_set(a.capture);
    if (a.camera < 0 || a.camera >= static_cast<int>(cap.cameras.size()))
        throw std::runtime_error("infer: camera out of range");

    DiffusionSchedule schedule = DiffusionSchedule::make(tcfg.schedule_T);
    std::vector<Image> flats;
    std::vector<const EnvironmentMap*> envs;
    std::vector<Image> gts, masks;
    uint64_t degrade_base = derive_seed(a.seed, "infer-degrade");
    for (int t = 0; t < cap.n_pairs; ++t) {
        const FramePair& p = pair_at(cap, t, a.camera);
        Image g = p.flat;
        if (input_source == "degraded")
            g = degrade(g, a.degrade_level, derive_seed(degrade_base, static_cast<uint64_t>(t)));
        if (bg == BackgroundMode::Remove) {
            Image scratch = g;
            mask_background(g, scratch, p.mask, bg);
        }
        flats.push_back(std::move(g));
        envs.push_back(&cap.lights.maps[p.light_id]);
        gts.push_back(p.relit);
        masks.push_back(p.relit_mask);
    }

    ChunkPlan plan{a.chunk_len, a.overlap, cap.n_pairs};
    std::vector<uint64_t> chunk_seeds;
    uint64_t chunk_base = derive_seed(a.seed, "chunk");
    for (size_t i = 0; i < plan_chunks(plan).size(); ++i)
        chunk_seeds.push_back(derive_seed(chunk_base, static_cast<uint64_t>(i)));

    DdimConfig base;
    base.steps = a.ddim_steps;
    base.seed = a.seed;
    std::vector<Image> frames =
        long_video(model, schedule, flats, envs, cap.cameras[a.camera], plan, chunk_seeds, base);

    write_video(a.out, frames, a.fps, plan, chunk_seeds);
    if (!a.gt_out.empty()) write_video(a.gt_out, gts, a.fps, plan, {});
    if (!a.masks_out.empty()) write_video(a.masks_out, masks, a.fps, plan, {});

    json flags{{"ckpt", a.ckpt},
               {"capture", a.capture},
               {"camera", a.camera},
               {"chunk_len", a.chunk_len},
               {"overlap", a.overlap},
               {"ddim_steps", a.ddim_steps},
               {"seed", a.seed},
               {"fps", a.fps},
               {"out", a.out},
               {"gt_out", a.gt_out},
               {"masks_out", a.masks_out},
               {"background", background},
               {"input_source", input_source},
               {"degrade_level", a.degrade_level}};
    write_echo((fs::path(a.out) / "config.json").string(), "infer", flags);
    std::printf("infer: %zu frames (%zu chunks) -> %s\n", frames.size(), chunk_seeds.size(),
                a.out.c_str());
    return 0;
}

struct EvalArgs {
    std::string pred;
    std::string gt;
    std::string masks;
    bool heldout_only = false;
    std::string capture;
    int camera = 0;
    std::string out;
};

int cmd_eval(const EvalArgs& a) {
    std::vector<Image> preds = read_frames(a.pred);
    std::vector<Image> gts = read_frames(a.gt);
    if (preds.size() != gts.size())
        throw std::runtime_error("eval: pred/gt frame count mismatch");
    std::vector<Image> masks;
    if (!a.masks.empty()) {
        masks = read_frames(a.masks);
        if (masks.size() != preds.size())
            throw std::runtime_error("eval: mask frame count mismatch");
    }

    std::vector<size_t> selected;
    if (a.heldout_only) {
        if (a.capture.empty())
            throw std::invalid_argument("eval: --heldout-only needs --capture");
        CaptureMeta meta = load_capture_meta(a.capture);
        DatasetSplit split = load_split((fs::path(a.capture) / "split.json").string());
        for (size_t t = 0; t < preds.size(); ++t) {
            int light = t < meta.light_ids.size() ? meta.light_ids[t] : -1;
            bool heldout = std::binary_search(split.heldout_lights.begin(),
                                              split.heldout_lights.end(), light) ||
                           static_cast<int>(t) >= split.frame_threshold;
            if (heldout) selected.push_back(t);
        }
        if (selected.empty()) throw std::runtime_error("eval: no held-out frames selected");
    } else {
        for (size_t t = 0; t < preds.size(); ++t) selected.push_back(t);
    }

    MetricFn psnr_fn = [](const Image& x, const Image& y) { return psnr(x, y); };
    std::vector<ReportRow> frame_rows;
    double mean_psnr = 0, mean_ssim = 0, mean_mpsnr = 0;
    int mpsnr_count = 0;
    for (size_t t : selected) {
        ReportRow row;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "frame-%05zu", t);
        row.variant = buf;
        double p = psnr(preds[t], gts[t]);
        double s = ssim(preds[t], gts[t]);
        row.values["psnr"] = p;
        row.values["ssim"] = s;
        mean_psnr += p;
        mean_ssim += s;
        if (!masks.empty()) {
            try {
                double mp = masked_metric(psnr_fn, preds[t], gts[t], masks[t]);
                row.values["masked-psnr"] = mp;
                mean_mpsnr += mp;
                ++mpsnr_count;
            } catch (const std::runtime_error&) {
            }
        }
        frame_rows.push_back(std::move(row));
    }
    mean_psnr /= static_cast<double>(selected.size());
    mean_ssim /= static_cast<double>(selected.size());

    ReportRow overall;
    overall.variant = "overall";
    overall.values["psnr"] = mean_psnr;
    overall.values["ssim"] = mean_ssim;
    if (mpsnr_count > 0) overall.values["masked-psnr"] = mean_mpsnr / mpsnr_count;
    if (preds.size() >= 2) {
        overall.values["flicker-pred"] = flicker_energy(preds);
        overall.values["flicker-gt"] = flicker_energy(gts);
    }

    std::vector<std::string> metrics{"psnr", "ssim", "masked-psnr", "flicker-pred",
                                     "flicker-gt", "lpips"};
    std::string table = format_report_table({overall}, metrics);

    std::string out_dir = a.out.empty() ? (fs::path(a.pred) / "eval").string() : a.out;
    fs::create_directories(out_dir);
    atomic_write_bytes((fs::path(out_dir) / "report.txt").string(), table);
    std::vector<ReportRow> all_rows = frame_rows;
    all_rows.push_back(overall);
    atomic_write_bytes((fs::path(out_dir) / "report.jsonl").string(),
                       format_report_jsonl(all_rows));
    json flags{{"pred", a.pred},     {"gt", a.gt},
               {"masks", a.masks},   {"heldout_only", a.heldout_only},
               {"capture", a.capture}, {"camera", a.camera},
               {"out", out_dir}};
    write_echo((fs::path(out_dir) / "config.json").string(), "eval", flags);
    std::printf("%s", table.c_str());
    return 0;
}

struct AblateArgs {
    std::string matrix;
    std::string workdir;
    ExpOptions opt;
    std::string run_seeds_csv;
};

int cmd_ablate(AblateArgs& a) {
    if (!a.run_seeds_csv.empty()) {
        a.opt.run_seeds.clear();
        std::string cur;
        for (char c : a.run_seeds_csv + ",") {
            if (c == ',') {
                if (!cur.empty()) a.opt.run_seeds.push_back(std::stoull(cur));
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (a.opt.run_seeds.empty())
            throw std::invalid_argument("ablate: empty --run-seeds");
    }

    AblationOutput out;
    if (a.matrix == "prior") {
        out = run_prior_ablation(a.workdir, a.opt);
    } else if (a.matrix == "enhance") {
        out = run_enhance_ablation(a.workdir, a.opt);
    } else if (a.matrix == "masks") {
        out = run_masks_ablation(a.workdir, a.opt);
    } else if (a.matrix == "misalign") {
        out = run_misalign_experiment(a.workdir, a.opt);
    } else if (a.matrix == "consistency") {
        out = run_consistency_experiment(a.workdir, a.opt);
    } else {
        throw std::invalid_argument("ablate: unknown matrix " + a.matrix);
    }
    write_echo((fs::path(a.workdir) / "cli_config.json").string(), "ablate " + a.matrix,
               json::parse(exp_options_to_json(a.opt)));
    std::printf("%s", out.table_text.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"relightkit: synthetic light-stage diffusion relighting pipeline"};
    app.require_subcommand(1);

    SynthCaptureArgs sc;
    auto* sub_sc = app.add_subcommand("synth-capture", "Render a paired flat/relit capture");
    sub_sc->add_option("--subject-id", sc.subject_id)->required();
    sub_sc->add_option("--complexity", sc.complexity)->check(CLI::Range(1, 4));
    sub_sc->add_option("--pairs", sc.pairs, "Time steps (pairs per camera)");
    sub_sc->add_option("--cameras", sc.cameras);
    sub_sc->add_option("--misalign-px", sc.misalign_px);
    sub_sc->add_option("--size", sc.size);
    sub_sc->add_option("--env-height", sc.env_height);
    sub_sc->add_option("--lights", sc.lights);
    sub_sc->add_option("--a-motion", sc.a_motion);
    sub_sc->add_option("--seed", sc.seed);
    sub_sc->add_option("--out", sc.out)->required();

    PreprocessArgs pp;
    auto* sub_pp = app.add_subcommand("preprocess", "Filter masks and write the dataset split");
    sub_pp->add_option("--in", pp.in)->required();
    sub_pp->add_option("--mask-filter-window", pp.window);
    sub_pp->add_option("--background", pp.background)
        ->check(CLI::IsMember({"keep", "remove"}));
    sub_pp->add_option("--split-seed", pp.split_seed);
    sub_pp->add_option("--light-holdout", pp.light_holdout);
    sub_pp->add_option("--frame-frac", pp.frame_frac);

    PretrainArgs pt;
    auto* sub_pt = app.add_subcommand("pretrain", "Train the relighting prior");
    sub_pt->add_option("--subjects", pt.subjects);
    sub_pt->add_option("--steps", pt.steps);
    sub_pt->add_option("--out", pt.out)->required();
    sub_pt->add_option("--size", pt.size);
    sub_pt->add_option("--pairs", pt.pairs);
    sub_pt->add_option("--cameras", pt.cameras);
    sub_pt->add_option("--lights", pt.lights);
    sub_pt->add_option("--env-height", pt.env_height);
    sub_pt->add_option("--complexity", pt.complexity);
    sub_pt->add_option("--base-width", pt.base_width);
    sub_pt->add_option("--batch", pt.batch);
    sub_pt->add_option("--lr", pt.lr);
    sub_pt->add_option("--seed", pt.seed);

    AdaptArgs ad;
    auto* sub_ad = app.add_subcommand("adapt", "Adapt the prior to one subject");
    sub_ad->add_option("--mode", ad.mode)
        ->check(CLI::IsMember({"lora", "full", "scratch", "none"}));
    sub_ad->add_option("--base", ad.base);
    sub_ad->add_option("--subject", ad.subject);
    sub_ad->add_option("--input-source", ad.input_source)
        ->check(CLI::IsMember({"flat", "degraded"}));
    sub_ad->add_option("--background", ad.background)
        ->check(CLI::IsMember({"keep", "remove"}));
    sub_ad->add_option("--steps", ad.steps);
    sub_ad->add_option("--batch", ad.batch);
    sub_ad->add_option("--lr", ad.lr);
    sub_ad->add_option("--degrade-level", ad.degrade_level);
    sub_ad->add_option("--lora-rank", ad.lora_rank);
    sub_ad->add_option("--lora-alpha", ad.lora_alpha);
    sub_ad->add_option("--base-width", ad.base_width);
    sub_ad->add_option("--seed", ad.seed);
    sub_ad->add_option("--out", ad.out)->required();

    InferArgs in;
    auto* sub_in = app.add_subcommand("infer", "Relight a capture as chunked video");
    sub_in->add_option("--ckpt", in.ckpt)->required();
    sub_in->add_option("--capture", in.capture)->required();
    sub_in->add_option("--camera", in.camera);
    sub_in->add_option("--chunk-len", in.chunk_len);
    sub_in->add_option("--overlap", in.overlap);
    sub_in->add_option("--ddim-steps", in.ddim_steps);
    sub_in->add_option("--seed", in.seed);
    sub_in->add_option("--fps", in.fps);
    sub_in->add_option("--out", in.out)->required();
    sub_in->add_option("--gt-out", in.gt_out);
    sub_in->add_option("--masks-out", in.masks_out);
    sub_in->add_option("--background", in.background)
        ->check(CLI::IsMember({"keep", "remove"}));
    sub_in->add_option("--input-source", in.input_source)
        ->check(CLI::IsMember({"flat", "degraded"}));
    sub_in->add_option("--degrade-level", in.degrade_level);

    EvalArgs ev;
    auto* sub_ev = app.add_subcommand("eval", "Score predicted frames against ground truth");
    sub_ev->add_option("--pred", ev.pred)->required();
    sub_ev->add_option("--gt", ev.gt)->required();
    sub_ev->add_option("--masks", ev.masks);
    sub_ev->add_flag("--heldout-only", ev.heldout_only);
    sub_ev->add_option("--capture", ev.capture);
    sub_ev->add_option("--camera", ev.camera);
    sub_ev->add_option("--out", ev.out);

    AblateArgs ab;
    auto* sub_ab = app.add_subcommand("ablate", "Run an experiment matrix end to end");
    sub_ab->add_option("matrix", ab.matrix, "prior|enhance|masks|misalign|consistency")
        ->required();
    sub_ab->add_option("--workdir", ab.workdir)->required();
    sub_ab->add_option("--seed", ab.opt.seed);
    sub_ab->add_option("--run-seeds", ab.run_seeds_csv, "Comma-separated training seeds");
    sub_ab->add_option("--size", ab.opt.image_size);
    sub_ab->add_option("--pairs", ab.opt.n_steps);
    sub_ab->add_option("--cameras", ab.opt.n_cameras);
    sub_ab->add_option("--lights", ab.opt.n_lights);
    sub_ab->add_option("--env-height", ab.opt.env_height);
    sub_ab->add_option("--complexity", ab.opt.complexity);
    sub_ab->add_option("--base-width", ab.opt.base_width);
    sub_ab->add_option("--batch", ab.opt.batch_size);
    sub_ab->add_option("--pretrain-subjects", ab.opt.pretrain_subjects);
    sub_ab->add_option("--pretrain-steps", ab.opt.pretrain_steps);
    sub_ab->add_option("--adapt-steps", ab.opt.adapt_steps);
    sub_ab->add_option("--consistency-adapt-steps", ab.opt.consistency_adapt_steps);
    sub_ab->add_option("--pretrain-lr", ab.opt.pretrain_lr);
    sub_ab->add_option("--adapt-lr", ab.opt.adapt_lr);
    sub_ab->add_option("--lora-lr", ab.opt.lora_lr);
    sub_ab->add_option("--scratch-lr", ab.opt.scratch_lr);
    sub_ab->add_option("--ddim-steps", ab.opt.ddim_steps);
    sub_ab->add_option("--eval-pairs", ab.opt.eval_pairs);
    sub_ab->add_option("--degrade-level", ab.opt.degrade_level);
    sub_ab->add_option("--misalign-px", ab.opt.misalign_px);
    sub_ab->add_option("--misalign-a-motion", ab.opt.misalign_a_motion);
    sub_ab->add_option("--prior", ab.opt.prior_ckpt, "Reuse an existing prior checkpoint");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sub_sc->parsed()) return cmd_synth_capture(sc);
        if (sub_pp->parsed()) return cmd_preprocess(pp);
        if (sub_pt->parsed()) return cmd_pretrain(pt);
        if (sub_ad->parsed()) return cmd_adapt(ad);
        if (sub_in->parsed()) return cmd_infer(in);
        if (sub_ev->parsed()) return cmd_eval(ev);
        if (sub_ab->parsed()) return cmd_ablate(ab);
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
