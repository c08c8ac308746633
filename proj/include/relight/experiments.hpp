// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "relight/capture_io.hpp"
#include "relight/datapipe.hpp"
#include "relight/metrics.hpp"
#include "relight/sampler.hpp"
#include "relight/train.hpp"

namespace relight {

// ---------------------------------------------------------------------------
// Experiment matrix shared by the CLI `ablate` subcommand and the acceptance
// suite. Defaults are desk-scale; every knob is overridable from the CLI.
// ---------------------------------------------------------------------------

struct ExpOptions {
    // capture scale
    int image_size = 32;
    int env_height = 16;
    int n_steps = 48;  // time steps per capture
    int n_cameras = 2;
    int n_lights = 12;
    int complexity = 2;
    double a_motion = 0.01;

    // dataset split
    double light_holdout_frac = 0.25;
    double frame_frac = 0.85;

    // model
    int base_width = 16;
    int schedule_T = 200;
    int lora_rank = 8;
    double lora_alpha = 16.0;

    // budgets
    int pretrain_subjects = 6;
    int pretrain_steps = 1500;
    int adapt_steps = 600;
    // The consistency comparison needs a converged adaptation; mid-training
    // models are more sampling-seed sensitive than the prior.
    int consistency_adapt_steps = 1200;
    int batch_size = 4;
    double pretrain_lr = 3e-4;
    double adapt_lr = 3e-4;
    double lora_lr = 1e-3;
    double scratch_lr = 3e-4;

    // degraded-input and misalignment variants
    double degrade_level = 0.6;
    double misalign_px = 8.0;
    double misalign_a_motion = 0.05;

    // evaluation
    int ddim_steps = 15;
    int eval_pairs = 6;
    uint64_t seed = 1;
    std::vector<uint64_t> run_seeds{1, 2, 3};

    // reuse an existing prior checkpoint instead of pretraining
    std::string prior_ckpt;
};

std::string exp_options_to_json(const ExpOptions& opt);

// One held-out pair prepared for evaluation.
struct EvalItem {
    int pair_index = 0;
    Tensor<float> g;     // model input (background/degradation applied)
    Tensor<float> cenv;  // conditioning env image
    Image input_image;   // g as an image, for baselines and centroid checks
    Image gt;            // raw relit target
    Image eval_mask;     // relit-frame subject mask
    Image input_mask;    // flat-frame subject mask
};

struct SubjectSet {
    CaptureSet cap;
    DatasetSplit split;
    std::vector<BatchItem<float>> train_items;
    std::vector<EvalItem> eval_items;
};

struct AssembleOptions {
    BackgroundMode background = BackgroundMode::Keep;
    bool degraded_input = false;
    // false: evaluate on held-out lights; true: on held-out frames under
    // training lights (used by the misalignment experiment).
    bool eval_on_heldout_frames = false;
    uint64_t degrade_seed = 0;
};

// When `split` is given (e.g. loaded from a preprocessed capture dir) it is
// used as-is; otherwise a split is derived from opt.seed.
SubjectSet assemble_items(CaptureSet cap, const AssembleOptions& as, const ExpOptions& opt,
                          const DatasetSplit* split = nullptr);

CaptureSet make_experiment_capture(uint64_t subject_id, uint64_t capture_seed,
                                   double misalign_px, double a_motion, const ExpOptions& opt);

// Pretrains the shared prior over several subjects' pooled pairs. When
// out_dir is set the final checkpoint lands at out_dir/model.bin.
TrainResult pretrain_prior(const std::vector<const SubjectSet*>& subjects, const ExpOptions& opt,
                           const std::string& out_dir);

// Budget-matched adaptation. prior may be null for Scratch; Lora results are
// returned merged.
UNet<float> adapt_model(const UNet<float>* prior, const SubjectSet& subj, TrainMode mode,
                        const ExpOptions& opt, uint64_t seed);

Image sample_eval_image(const UNet<float>& model, const EvalItem& item,
                        const DiffusionSchedule& schedule, const DdimConfig& cfg);

struct EvalScores {
    double psnr = 0;
    double ssim = 0;
};

// Mean masked scores over the subject's eval items (PSNR/SSIM on the mask
// bounding box with off-mask pixels zeroed).
EvalScores eval_scores(const UNet<float>& model, const SubjectSet& subj, const ExpOptions& opt,
                       uint64_t ddim_seed);

// Masked PSNR of the raw model input against the relit target.
double baseline_masked_psnr(const SubjectSet& subj);

struct AblationOutput {
    std::vector<ReportRow> table_rows;  // medians over run seeds
    std::vector<ReportRow> run_rows;    // one record per (variant, seed) evaluation
    std::string table_text;
};

// Adaptation-mode comparison: rows none / full / scratch / lora.
AblationOutput run_prior_ablation(const std::string& workdir, const ExpOptions& opt);
// Background handling comparison: rows bg-removed / bg-kept.
AblationOutput run_masks_ablation(const std::string& workdir, const ExpOptions& opt);
// Input-source comparison: rows relight-only (clean flat) / enhance (degraded).
AblationOutput run_enhance_ablation(const std::string& workdir, const ExpOptions& opt);
// Capture misalignment comparison: rows aligned / misaligned.
AblationOutput run_misalign_experiment(const std::string& workdir, const ExpOptions& opt);
// Sampling-seed output spread: each adapted model vs the zero-shot prior on
// the same frames and seeds. Reports the median spread over training seeds.
AblationOutput run_consistency_experiment(const std::string& workdir, const ExpOptions& opt);

// ---------------------------------------------------------------------------
// Learning gate: scratch training on one subject must beat the copy-the-input
// baseline by gain_db on held-out lights within max_steps.
// ---------------------------------------------------------------------------

struct LearningGateOptions {
    int image_size = 64;
    int env_height = 16;
    int n_steps = 128;  // time steps; pairs = n_steps * n_cameras
    int n_cameras = 4;
    int n_lights = 16;
    int complexity = 2;
    double a_motion = 0.01;
    double light_holdout_frac = 0.25;
    double frame_frac = 0.85;
    int base_width = 24;
    int batch_size = 4;
    int schedule_T = 200;
    double lr = 3e-4;
    int max_steps = 20000;
    int eval_every = 250;
    double gain_db = 3.0;
    int ddim_steps = 15;
    int eval_pairs = 6;
    uint64_t seed = 1;
};

struct LearningGateResult {
    double baseline_db = 0;
    double best_db = 0;
    int steps_run = 0;
    bool passed = false;
    std::vector<std::pair<int, double>> curve;  // (step, masked PSNR)
};

LearningGateResult run_learning_gate(const std::string& workdir, const LearningGateOptions& opt);

}  // namespace relight
