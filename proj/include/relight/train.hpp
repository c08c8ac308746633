// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "relight/image.hpp"
#include "relight/lora.hpp"
#include "relight/schedule.hpp"
#include "relight/unet.hpp"

namespace relight {

// One training example: flat-lit input, relit target, camera-frame
// tone-mapped environment conditioning. All {3,H,W}.
template <typename T>
struct BatchItem {
    Tensor<T> g;
    Tensor<T> z0;
    Tensor<T> cenv;
};

// Channel layout consumed by the denoiser: noisy target, flat input, env
// conditioning, then five zeroed slots reserved for G-buffer channels.
template <typename T>
Tensor<T> make_conditioning_stack(const Tensor<T>& z, const Tensor<T>& g, const Tensor<T>& cenv);

Tensor<float> image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor<float>& t);

// Mean over batch and elements of |x0_hat - z0|^2 with per-item t drawn
// uniformly from [1, T]. The predictor form exists so tests can substitute
// oracles for the network.
template <typename T>
double diffusion_loss_with_predictor(
    const std::vector<BatchItem<T>>& batch, const DiffusionSchedule& schedule, Rng& rng,
    const std::function<Tensor<T>(const Tensor<T>&, int)>& predictor);

enum class TrainMode { Pretrain, Lora, Full, Scratch };
TrainMode train_mode_from_string(const std::string& s);
std::string to_string(TrainMode mode);

template <typename T>
struct GradResult {
    double loss = 0;
    UNet<T> weight_grads;                     // dense grads w.r.t. effective weights
    std::optional<LoraAdapter<T>> lora_grads; // present in lora mode
};

// Draws (t, noise) per item from rng, runs forward/backward, reduces grads
// in index order so the result is independent of worker count.
template <typename T>
GradResult<T> diffusion_loss_and_grad(const UNet<T>& model, const LoraAdapter<T>* adapter,
                                      const std::vector<BatchItem<T>>& batch,
                                      const DiffusionSchedule& schedule, Rng& rng,
                                      bool lora_mode);

template <typename T>
Tensor<T> denoise_predict(const UNet<T>& model, const LoraAdapter<T>* adapter,
                          const Tensor<T>& stack, int t);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
    std::vector<Tensor<float>> m, v;
    uint64_t step = 0;
};

AdamState make_adam_state(const std::vector<const Tensor<float>*>& params);

void adam_step(const std::vector<Tensor<float>*>& params,
               const std::vector<const Tensor<float>*>& grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

struct TrainConfig {
    int batch_size = 8;
    int steps = 1000;
    double lr = 3e-4;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    uint64_t seed = 1;
    TrainMode mode = TrainMode::Pretrain;
    std::string input_source = "flat";  // flat | degraded; recorded for provenance
    std::string background = "keep";    // keep | remove; recorded for provenance
    int checkpoint_every = 0;           // 0 = final checkpoint only
    std::string out_dir;                // empty = keep everything in memory
    int lora_rank = 8;
    double lora_alpha = 16.0;
    UNetConfig net;
    int schedule_T = 200;
};

struct TrainResult {
    UNet<float> model;  // base weights (unchanged by lora mode)
    std::optional<LoraAdapter<float>> adapter;
    std::vector<double> loss_history;
    std::string checkpoint_path;  // final checkpoint, when out_dir is set
};

// init_model is required for full/lora modes and optional for pretrain;
// resume_from restarts mid-run from a step checkpoint, bit-identically.
TrainResult train(const TrainConfig& cfg, const std::vector<BatchItem<float>>& dataset,
                  const UNet<float>* init_model = nullptr, const std::string& resume_from = {});

}  // namespace relight
