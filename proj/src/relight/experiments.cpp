// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#include "relight/experiments.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "relight/checkpoint.hpp"
#include "relight/imageio.hpp"

namespace relight {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median: empty");
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void zero_off_mask(Image& img, const Image& mask) {
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (mask.at(x, y, 0) <= 0.5)
                for (int c = 0; c < img.channels; ++c) img.at(x, y, c) = 0.0;
}

Image luminance_mask(const Image& img, double threshold) {
    Image out(img.width, img.height, 1);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double s = 0;
            for (int c = 0; c < img.channels; ++c) s += img.at(x, y, c);
            out.at(x, y, 0) = s / img.channels > threshold ? 1.0 : 0.0;
        }
    return out;
}

std::vector<int> stride_select(const std::vector<int>& candidates, int k) {
    std::vector<int> out;
    if (candidates.empty() || k <= 0) return out;
    if (static_cast<int>(candidates.size()) <= k) return candidates;
    for (int i = 0; i < k; ++i) {
        size_t idx = (static_cast<size_t>(i) * (candidates.size() - 1)) / (k - 1 > 0 ? k - 1 : 1);
        out.push_back(candidates[idx]);
    }
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Masked SSIM; subjects smaller than the SSIM window fall back to the
// zeroed full canvas.
double masked_ssim(const Image& a, const Image& b, const Image& mask) {
    MetricFn fn = [](const Image& x, const Image& y) { return ssim(x, y); };
    try {
        return masked_metric(fn, a, b, mask);
    } catch (const std::runtime_error&) {
        Image za = a, zb = b;
        zero_off_mask(za, mask);
        zero_off_mask(zb, mask);
        return ssim(za, zb);
    }
}

double masked_psnr(const Image& a, const Image& b, const Image& mask) {
    MetricFn fn = [](const Image& x, const Image& y) { return psnr(x, y); };
    return masked_metric(fn, a, b, mask);
}

UNetConfig net_config(const ExpOptions& opt) {
    UNetConfig nc;
    nc.base = opt.base_width;
    return nc;
}

void write_reports(const std::string& workdir, const AblationOutput& out,
                   const std::string& config_json) {
    if (workdir.empty()) return;
    fs::create_directories(workdir);
    atomic_write_bytes((fs::path(workdir) / "report.txt").string(), out.table_text);
    atomic_write_bytes((fs::path(workdir) / "report.jsonl").string(),
                       format_report_jsonl(out.run_rows));
    atomic_write_bytes((fs::path(workdir) / "config.json").string(), config_json);
}

// Aggregates per-seed run rows into median table rows, preserving the given
// variant order.
std::vector<ReportRow> median_rows(const std::vector<ReportRow>& runs,
                                   const std::vector<std::string>& variant_order,
                                   const std::vector<std::string>& metrics) {
    std::vector<ReportRow> out;
    for (const auto& variant : variant_order) {
        ReportRow row;
        row.variant = variant;
        for (const auto& metric : metrics) {
            std::vector<double> vals;
            for (const auto& r : runs)
                if (r.variant == variant && r.values.count(metric))
                    vals.push_back(r.values.at(metric));
            if (!vals.empty()) row.values[metric] = median(vals);
        }
        out.push_back(std::move(row));
    }
    return out;
}

UNet<float> obtain_prior(const std::string& workdir, const ExpOptions& opt) {
    if (!opt.prior_ckpt.empty()) return load_checkpoint(opt.prior_ckpt).model;

    std::vector<SubjectSet> sets;
    sets.reserve(opt.pretrain_subjects);
    uint64_t cap_base = derive_seed(opt.seed, "pretrain-cap");
    for (int i = 0; i < opt.pretrain_subjects; ++i) {
        CaptureSet cap = make_experiment_capture(1000 + static_cast<uint64_t>(i),
                                                 derive_seed(cap_base, static_cast<uint64_t>(i)),
                                                 0.0, opt.a_motion, opt);
        sets.push_back(assemble_items(std::move(cap), AssembleOptions{}, opt));
    }
    std::vector<const SubjectSet*> ptrs;
    for (const auto& s : sets) ptrs.push_back(&s);
    std::string out_dir = workdir.empty() ? std::string() : (fs::path(workdir) / "prior").string();
    return pretrain_prior(ptrs, opt, out_dir).model;
}

}  // namespace

std::string exp_options_to_json(const ExpOptions& o) {
    json j;
    j["image_size"] = o.image_size;
    j["env_height"] = o.env_height;
    j["n_steps"] = o.n_steps;
    j["n_cameras"] = o.n_cameras;
    j["n_lights"] = o.n_lights;
    j["complexity"] = o.complexity;
    j["a_motion"] = o.a_motion;
    j["light_holdout_frac"] = o.light_holdout_frac;
    j["frame_frac"] = o.frame_frac;
    j["base_width"] = o.base_width;
    j["schedule_T"] = o.schedule_T;
    j["lora_rank"] = o.lora_rank;
    j["lora_alpha"] = o.lora_alpha;
    j["pretrain_subjects"] = o.pretrain_subjects;
    j["pretrain_steps"] = o.pretrain_steps;
    j["adapt_steps"] = o.adapt_steps;
    j["consistency_adapt_steps"] = o.consistency_adapt_steps;
    j["batch_size"] = o.batch_size;
    j["pretrain_lr"] = o.pretrain_lr;
    j["adapt_lr"] = o.adapt_lr;
    j["lora_lr"] = o.lora_lr;
    j["scratch_lr"] = o.scratch_lr;
    j["degrade_level"] = o.degrade_level;
    j["misalign_px"] = o.misalign_px;
    j["misalign_a_motion"] = o.misalign_a_motion;
    j["ddim_steps"] = o.ddim_steps;
    j["eval_pairs"] = o.eval_pairs;
    j["seed"] = o.seed;
    j["run_seeds"] = o.run_seeds;
    j["prior_ckpt"] = o.prior_ckpt;
    return j.dump(2) + "\n";
}

CaptureSet make_experiment_capture(uint64_t subject_id, uint64_t capture_seed,
                                   double misalign_px, double a_motion, const ExpOptions& opt) {
    SceneSpec scene = make_subject(subject_id, opt.complexity);
    CaptureConfig cc;
    cc.n_pairs = opt.n_steps;
    cc.image_size = opt.image_size;
    cc.n_cameras = opt.n_cameras;
    cc.env_height = opt.env_height;
    cc.n_lights = opt.n_lights;
    cc.misalignment_px = misalign_px;
    cc.a_motion = a_motion;
    cc.seed = capture_seed;
    return make_capture(scene, cc);
}

SubjectSet assemble_items(CaptureSet cap, const AssembleOptions& as, const ExpOptions& opt,
                          const DatasetSplit* split) {
    SubjectSet subj;
    subj.cap = std::move(cap);
    const CaptureSet& c = subj.cap;

    if (split) {
        subj.split = *split;
    } else {
        std::vector<PairKey> keys;
        keys.reserve(c.pairs.size());
        for (const auto& p : c.pairs) keys.push_back({p.t, p.camera_id, p.light_id});
        subj.split = split_dataset(keys, c.n_pairs, static_cast<int>(c.lights.maps.size()),
                                   opt.light_holdout_frac, opt.frame_frac, {},
                                   derive_seed(opt.seed, "split"));
    }

    std::map<std::pair<int, int>, Tensor<float>> cond;
    auto cenv_for = [&](int light_id, int camera_id) -> const Tensor<float>& {
        auto key = std::make_pair(light_id, camera_id);
        auto it = cond.find(key);
        if (it == cond.end()) {
            Image img = env_conditioning_image(c.lights.maps[light_id], c.cameras[camera_id],
                                               c.pairs[0].flat.width, c.pairs[0].flat.height);
            it = cond.emplace(key, image_to_tensor(img)).first;
        }
        return it->second;
    };

    uint64_t degrade_base = derive_seed(as.degrade_seed, "degrade");
    auto input_for = [&](const FramePair& p, int index) {
        Image g = p.flat;
        if (as.degraded_input)
            g = degrade(g, opt.degrade_level, derive_seed(degrade_base,
                                                          static_cast<uint64_t>(index)));
        if (as.background == BackgroundMode::Remove) zero_off_mask(g, p.mask);
        return g;
    };

    for (int idx : subj.split.train_pairs) {
        const FramePair& p = c.pairs[idx];
        Image g = input_for(p, idx);
        Image z0 = p.relit;
        if (as.background == BackgroundMode::Remove) zero_off_mask(z0, p.relit_mask);
        subj.train_items.push_back(
            {image_to_tensor(g), image_to_tensor(z0), cenv_for(p.light_id, p.camera_id)});
    }
    if (subj.train_items.empty()) throw std::runtime_error("assemble_items: empty train set");

    const auto& hl = subj.split.heldout_lights;
    auto light_heldout = [&](int id) { return std::binary_search(hl.begin(), hl.end(), id); };
    std::vector<int> candidates;
    for (int idx : subj.split.test_pairs) {
        const FramePair& p = c.pairs[idx];
        bool pick = as.eval_on_heldout_frames
                        ? (p.t >= subj.split.frame_threshold && !light_heldout(p.light_id))
                        : light_heldout(p.light_id);
        if (pick) candidates.push_back(idx);
    }
    if (candidates.empty()) throw std::runtime_error("assemble_items: no eval candidates");

    for (int idx : stride_select(candidates, opt.eval_pairs)) {
        const FramePair& p = c.pairs[idx];
        EvalItem item;
        item.pair_index = idx;
        item.input_image = input_for(p, idx);
        item.g = image_to_tensor(item.input_image);
        item.cenv = cenv_for(p.light_id, p.camera_id);
        item.gt = p.relit;
        item.eval_mask = p.relit_mask;
        item.input_mask = p.mask;
        subj.eval_items.push_back(std::move(item));
    }
    return subj;
}

TrainResult pretrain_prior(const std::vector<const SubjectSet*>& subjects, const ExpOptions& opt,
                           const std::string& out_dir) {
    std::vector<BatchItem<float>> pooled;
    for (const auto* s : subjects)
        pooled.insert(pooled.end(), s->train_items.begin(), s->train_items.end());
    if (pooled.empty()) throw std::invalid_argument("pretrain_prior: no training pairs");

    TrainConfig tc;
    tc.batch_size = opt.batch_size;
    tc.steps = opt.pretrain_steps;
    tc.lr = opt.pretrain_lr;
    tc.seed = derive_seed(opt.seed, "prior");
    tc.mode = TrainMode::Pretrain;
    tc.net = net_config(opt);
    tc.schedule_T = opt.schedule_T;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        tc.out_dir = out_dir;
    }
    return train(tc, pooled);
}

UNet<float> adapt_model(const UNet<float>* prior, const SubjectSet& subj, TrainMode mode,
                        const ExpOptions& opt, uint64_t seed) {
    TrainConfig tc;
    tc.batch_size = opt.batch_size;
    tc.steps = opt.adapt_steps;
    tc.mode = mode;
    tc.net = net_config(opt);
    tc.schedule_T = opt.schedule_T;
    tc.lora_rank = opt.lora_rank;
    tc.lora_alpha = opt.lora_alpha;
    tc.seed = derive_seed(seed, "adapt-" + to_string(mode));
    switch (mode) {
        case TrainMode::Lora: tc.lr = opt.lora_lr; break;
        case TrainMode::Full: tc.lr = opt.adapt_lr; break;
        case TrainMode::Scratch:
        case TrainMode::Pretrain: tc.lr = opt.scratch_lr; break;
    }
    if ((mode == TrainMode::Lora || mode == TrainMode::Full) && !prior)
        throw std::invalid_argument("adapt_model: mode needs a prior");

    TrainResult tr = train(tc, subj.train_items, mode == TrainMode::Scratch ? nullptr : prior);
    if (mode == TrainMode::Lora) return apply_lora(tr.model, *tr.adapter);
    return tr.model;
}

Image sample_eval_image(const UNet<float>& model, const EvalItem& item,
                        const DiffusionSchedule& schedule, const DdimConfig& cfg) {
    Tensor<float> out = ddim_sample(model, schedule, item.g, item.cenv, cfg);
    return clamp_image(tensor_to_image(out), 0.0, 1.0);
}

EvalScores eval_scores(const UNet<float>& model, const SubjectSet& subj, const ExpOptions& opt,
                       uint64_t ddim_seed) {
    DiffusionSchedule schedule = DiffusionSchedule::make(opt.schedule_T);
    size_t n = subj.eval_items.size();
    std::vector<double> ps(n), ss(n);
    parallel_for(static_cast<int64_t>(n), [&](int64_t begin, int64_t end) {
        for (int64_t i = begin; i < end; ++i) {
            const EvalItem& item = subj.eval_items[i];
            DdimConfig cfg;
            cfg.steps = opt.ddim_steps;
            cfg.seed = derive_seed(ddim_seed, static_cast<uint64_t>(item.pair_index));
            Image pred = sample_eval_image(model, item, schedule, cfg);
            ps[i] = masked_psnr(pred, item.gt, item.eval_mask);
            ss[i] = masked_ssim(pred, item.gt, item.eval_mask);
        }
    });
    EvalScores out;
    for (size_t i = 0; i < n; ++i) {
        out.psnr += ps[i];
        out.ssim += ss[i];
    }
    out.psnr /= static_cast<double>(n);
    out.ssim /= static_cast<double>(n);
    return out;
}

double baseline_masked_psnr(const SubjectSet& subj) {
    double total = 0;
    for (const auto& item : subj.eval_items)
        total += masked_psnr(item.input_image, item.gt, item.eval_mask);
    return total / static_cast<double>(subj.eval_items.size());
}

AblationOutput run_prior_ablation(const std::string& workdir, const ExpOptions& opt) {
    UNet<float> prior = obtain_prior(workdir, opt);

    CaptureSet cap = make_experiment_capture(2000, derive_seed(opt.seed, "prior-cap"), 0.0,
                                             opt.a_motion, opt);
    SubjectSet subj = assemble_items(std::move(cap), AssembleOptions{}, opt);

    AblationOutput out;
    const std::vector<std::string> variants{"none", "full", "scratch", "lora"};
    for (uint64_t s : opt.run_seeds) {
        for (const auto& variant : variants) {
            EvalScores scores;
            if (variant == "none") {
                scores = eval_scores(prior, subj, opt, s);
            } else {
                UNet<float> model =
                    adapt_model(&prior, subj, train_mode_from_string(variant), opt, s);
                scores = eval_scores(model, subj, opt, s);
            }
            ReportRow run;
            run.variant = variant;
            run.values["seed"] = static_cast<double>(s);
            run.values["psnr"] = scores.psnr;
            run.values["ssim"] = scores.ssim;
            out.run_rows.push_back(std::move(run));
        }
    }
    const std::vector<std::string> metrics{"psnr", "ssim", "lpips"};
    out.table_rows = median_rows(out.run_rows, variants, metrics);
    out.table_text = format_report_table(out.table_rows, metrics);
    write_reports(workdir, out, exp_options_to_json(opt));
    return out;
}

AblationOutput run_masks_ablation(const std::string& workdir, const ExpOptions& opt) {
    UNet<float> prior = obtain_prior(workdir, opt);

    CaptureSet cap = make_experiment_capture(2100, derive_seed(opt.seed, "masks-cap"), 0.0,
                                             opt.a_motion, opt);

    AssembleOptions keep;
    AssembleOptions remove;
    remove.background = BackgroundMode::Remove;
    SubjectSet subj_keep = assemble_items(cap, keep, opt);
    SubjectSet subj_remove = assemble_items(std::move(cap), remove, opt);

    AblationOutput out;
    for (uint64_t s : opt.run_seeds) {
        for (const auto& [variant, subj] :
             {std::pair<std::string, const SubjectSet*>{"bg-removed", &subj_remove},
              std::pair<std::string, const SubjectSet*>{"bg-kept", &subj_keep}}) {
            UNet<float> model = adapt_model(&prior, *subj, TrainMode::Full, opt, s);
            EvalScores scores = eval_scores(model, *subj, opt, s);
            ReportRow run;
            run.variant = variant;
            run.values["seed"] = static_cast<double>(s);
            run.values["psnr"] = scores.psnr;
            run.values["ssim"] = scores.ssim;
            out.run_rows.push_back(std::move(run));
        }
    }
    const std::vector<std::string> metrics{"psnr", "ssim", "lpips"};
    out.table_rows = median_rows(out.run_rows, {"bg-removed", "bg-kept"}, metrics);
    out.table_text = format_report_table(out.table_rows, metrics);
    write_reports(workdir, out, exp_options_to_json(opt));
    return out;
}

AblationOutput run_enhance_ablation(const std::string& workdir, const ExpOptions& opt) {
    CaptureSet cap = make_experiment_capture(2200, derive_seed(opt.seed, "enhance-cap"), 0.0,
                                             opt.a_motion, opt);

    AssembleOptions clean;
    AssembleOptions degraded;
    degraded.degraded_input = true;
    degraded.degrade_seed = derive_seed(opt.seed, "enhance-degrade");
    SubjectSet subj_clean = assemble_items(cap, clean, opt);
    SubjectSet subj_degraded = assemble_items(std::move(cap), degraded, opt);

    AblationOutput out;
    for (uint64_t s : opt.run_seeds) {
        for (const auto& [variant, subj] :
             {std::pair<std::string, const SubjectSet*>{"relight-only", &subj_clean},
              std::pair<std::string, const SubjectSet*>{"enhance", &subj_degraded}}) {
            UNet<float> model = adapt_model(nullptr, *subj, TrainMode::Scratch, opt, s);
            EvalScores scores = eval_scores(model, *subj, opt, s);
            ReportRow run;
            run.variant = variant;
            run.values["seed"] = static_cast<double>(s);
            run.values["psnr"] = scores.psnr;
            run.values["ssim"] = scores.ssim;
            run.values["baseline-psnr"] = baseline_masked_psnr(*subj);
            out.run_rows.push_back(std::move(run));
        }
    }
    const std::vector<std::string> metrics{"psnr", "ssim", "baseline-psnr", "lpips"};
    out.table_rows = median_rows(out.run_rows, {"relight-only", "enhance"}, metrics);
    out.table_text = format_report_table(out.table_rows, metrics);
    write_reports(workdir, out, exp_options_to_json(opt));
    return out;
}

namespace {

double mean_centroid_shift(const UNet<float>& model, const SubjectSet& subj,
                           const ExpOptions& opt, uint64_t ddim_seed) {
    DiffusionSchedule schedule = DiffusionSchedule::make(opt.schedule_T);
    size_t n = subj.eval_items.size();
    std::vector<double> shift(n, -1.0);
    parallel_for(static_cast<int64_t>(n), [&](int64_t begin, int64_t end) {
        for (int64_t i = begin; i < end; ++i) {
            const EvalItem& item = subj.eval_items[i];
            DdimConfig cfg;
            cfg.steps = opt.ddim_steps;
            cfg.seed = derive_seed(ddim_seed, static_cast<uint64_t>(item.pair_index));
            Image pred = sample_eval_image(model, item, schedule, cfg);
            Centroid out_c = mask_centroid(luminance_mask(pred, 0.05));
            Centroid in_c = mask_centroid(item.input_mask);
            if (out_c.count == 0 || in_c.count == 0) continue;
            shift[i] = std::hypot(out_c.x - in_c.x, out_c.y - in_c.y);
        }
    });
    double total = 0;
    int valid = 0;
    for (double v : shift)
        if (v >= 0) {
            total += v;
            ++valid;
        }
    return valid > 0 ? total / valid : 0.0;
}

}  // namespace

AblationOutput run_misalign_experiment(const std::string& workdir, const ExpOptions& opt) {
    uint64_t cap_seed = derive_seed(opt.seed, "misalign-cap");
    CaptureSet cap_aligned =
        make_experiment_capture(2300, cap_seed, 0.0, opt.misalign_a_motion, opt);
    CaptureSet cap_shifted =
        make_experiment_capture(2300, cap_seed, opt.misalign_px, opt.misalign_a_motion, opt);

    AssembleOptions as;
    as.background = BackgroundMode::Remove;
    as.eval_on_heldout_frames = true;
    SubjectSet subj_aligned = assemble_items(std::move(cap_aligned), as, opt);
    SubjectSet subj_shifted = assemble_items(std::move(cap_shifted), as, opt);

    AblationOutput out;
    for (uint64_t s : opt.run_seeds) {
        for (const auto& [variant, subj] :
             {std::pair<std::string, const SubjectSet*>{"aligned", &subj_aligned},
              std::pair<std::string, const SubjectSet*>{"misaligned", &subj_shifted}}) {
            UNet<float> model = adapt_model(nullptr, *subj, TrainMode::Scratch, opt, s);
            ReportRow run;
            run.variant = variant;
            run.values["seed"] = static_cast<double>(s);
            run.values["centroid-px"] = mean_centroid_shift(model, *subj, opt, s);
            run.values["psnr"] = eval_scores(model, *subj, opt, s).psnr;
            out.run_rows.push_back(std::move(run));
        }
    }
    const std::vector<std::string> metrics{"centroid-px", "psnr", "lpips"};
    out.table_rows = median_rows(out.run_rows, {"aligned", "misaligned"}, metrics);
    out.table_text = format_report_table(out.table_rows, metrics);
    write_reports(workdir, out, exp_options_to_json(opt));
    return out;
}

AblationOutput run_consistency_experiment(const std::string& workdir, const ExpOptions& opt) {
    UNet<float> prior = obtain_prior(workdir, opt);

    CaptureSet cap = make_experiment_capture(2000, derive_seed(opt.seed, "prior-cap"), 0.0,
                                             opt.a_motion, opt);
    SubjectSet subj = assemble_items(std::move(cap), AssembleOptions{}, opt);

    ExpOptions aopt = opt;
    aopt.adapt_steps = opt.consistency_adapt_steps;

    DiffusionSchedule schedule = DiffusionSchedule::make(opt.schedule_T);
    // Spread of one model's outputs across sampling seeds, averaged over the
    // eval frames.
    auto sampling_spread = [&](const UNet<float>& model) {
        double total = 0;
        for (const auto& item : subj.eval_items) {
            std::vector<Image> outs;
            for (uint64_t s : opt.run_seeds) {
                DdimConfig cfg;
                cfg.steps = opt.ddim_steps;
                cfg.seed = derive_seed(s, static_cast<uint64_t>(item.pair_index));
                outs.push_back(sample_eval_image(model, item, schedule, cfg));
            }
            total += consistency_report(outs, &item.eval_mask).mean_std;
        }
        return total / static_cast<double>(subj.eval_items.size());
    };

    AblationOutput out;
    std::vector<double> per_model;
    for (uint64_t s : opt.run_seeds) {
        double v = sampling_spread(adapt_model(&prior, subj, TrainMode::Full, aopt, s));
        per_model.push_back(v);
        ReportRow run;
        run.variant = "adapted";
        run.values["seed"] = static_cast<double>(s);
        run.values["mean-pixel-std"] = v;
        out.run_rows.push_back(std::move(run));
    }
    std::sort(per_model.begin(), per_model.end());
    double adapted_std = per_model[per_model.size() / 2];
    double zero_std = sampling_spread(prior);

    ReportRow a, z;
    a.variant = "adapted";
    a.values["mean-pixel-std"] = adapted_std;
    z.variant = "zero-shot";
    z.values["mean-pixel-std"] = zero_std;
    out.table_rows = {a, z};
    out.run_rows.push_back(z);
    const std::vector<std::string> metrics{"mean-pixel-std", "lpips"};
    out.table_text = format_report_table(out.table_rows, metrics);
    write_reports(workdir, out, exp_options_to_json(opt));
    return out;
}

LearningGateResult run_learning_gate(const std::string& workdir, const LearningGateOptions& opt) {
    if (workdir.empty()) throw std::invalid_argument("run_learning_gate: workdir required");
    fs::create_directories(workdir);

    ExpOptions eo;
    eo.image_size = opt.image_size;
    eo.env_height = opt.env_height;
    eo.n_steps = opt.n_steps;
    eo.n_cameras = opt.n_cameras;
    eo.n_lights = opt.n_lights;
    eo.complexity = opt.complexity;
    eo.a_motion = opt.a_motion;
    eo.light_holdout_frac = opt.light_holdout_frac;
    eo.frame_frac = opt.frame_frac;
    eo.base_width = opt.base_width;
    eo.batch_size = opt.batch_size;
    eo.schedule_T = opt.schedule_T;
    eo.ddim_steps = opt.ddim_steps;
    eo.eval_pairs = opt.eval_pairs;
    eo.seed = opt.seed;

    CaptureSet cap = make_experiment_capture(3000, derive_seed(opt.seed, "gate-cap"), 0.0,
                                             opt.a_motion, eo);
    SubjectSet subj = assemble_items(std::move(cap), AssembleOptions{}, eo);

    LearningGateResult res;
    res.baseline_db = baseline_masked_psnr(subj);

    TrainConfig tc;
    tc.batch_size = opt.batch_size;
    tc.lr = opt.lr;
    tc.seed = derive_seed(opt.seed, "gate-train");
    tc.mode = TrainMode::Scratch;
    tc.net = net_config(eo);
    tc.schedule_T = opt.schedule_T;
    tc.out_dir = (fs::path(workdir) / "train").string();
    fs::create_directories(tc.out_dir);

    uint64_t eval_seed = derive_seed(opt.seed, "gate-eval");
    std::string ckpt;
    int done = 0;
    while (done < opt.max_steps) {
        int next = std::min(done + opt.eval_every, opt.max_steps);
        tc.steps = next;
        TrainResult tr = train(tc, subj.train_items, nullptr, ckpt);
        ckpt = tr.checkpoint_path;
        double p = eval_scores(tr.model, subj, eo, eval_seed).psnr;
        res.curve.emplace_back(next, p);
        res.best_db = std::max(res.best_db, p);
        res.steps_run = next;
        done = next;
        if (p >= res.baseline_db + opt.gain_db) {
            res.passed = true;
            break;
        }
    }

    json j;
    j["baseline_db"] = res.baseline_db;
    j["best_db"] = res.best_db;
    j["steps_run"] = res.steps_run;
    j["passed"] = res.passed;
    json curve = json::array();
    for (const auto& [step, p] : res.curve) curve.push_back({{"step", step}, {"psnr", p}});
    j["curve"] = curve;
    atomic_write_bytes((fs::path(workdir) / "report.json").string(), j.dump(2) + "\n");

    json cfg;
    cfg["image_size"] = opt.image_size;
    cfg["env_height"] = opt.env_height;
    cfg["n_steps"] = opt.n_steps;
    cfg["n_cameras"] = opt.n_cameras;
    cfg["n_lights"] = opt.n_lights;
    cfg["complexity"] = opt.complexity;
    cfg["base_width"] = opt.base_width;
    cfg["batch_size"] = opt.batch_size;
    cfg["lr"] = opt.lr;
    cfg["max_steps"] = opt.max_steps;
    cfg["eval_every"] = opt.eval_every;
    cfg["gain_db"] = opt.gain_db;
    cfg["ddim_steps"] = opt.ddim_steps;
    cfg["eval_pairs"] = opt.eval_pairs;
    cfg["seed"] = opt.seed;
    atomic_write_bytes((fs::path(workdir) / "config.json").string(), cfg.dump(2) + "\n");
    return res;
}

}  // namespace relight
