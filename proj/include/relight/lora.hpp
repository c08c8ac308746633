// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "relight/unet.hpp"

namespace relight {

// Low-rank deltas for every convolution kernel, reshaped to
// (fan_out, fan_in*k*k). Effective weight: W + (alpha/rank) * B * A.
template <typename T>
struct LoraLayer {
    Tensor<T> A;  // {rank, fan_in*k*k}, N(0, 0.01^2) init
    Tensor<T> B;  // {fan_out, rank}, zero init
};

template <typename T>
struct LoraAdapter {
    int rank = 8;
    double alpha = 16.0;
    std::vector<std::string> names;  // conv names, visit_convs order
    std::vector<LoraLayer<T>> layers;
};

template <typename T>
LoraAdapter<T> make_lora(const UNet<T>& net, int rank, double alpha, Rng& rng);

// Base stays untouched; returns a model with materialized effective weights.
template <typename T>
UNet<T> apply_lora(const UNet<T>& net, const LoraAdapter<T>& adapter);

// Folds the deltas into the weights in place. Throws on rank/shape mismatch.
template <typename T>
void merge_lora(UNet<T>& net, const LoraAdapter<T>& adapter);

// Maps gradients w.r.t. effective conv weights to (A, B) gradients:
// dB = (alpha/r) dW A^T, dA = (alpha/r) B^T dW. Result reuses the adapter
// layout with gradient values.
template <typename T>
LoraAdapter<T> project_lora_grads(const UNet<T>& weight_grads, const LoraAdapter<T>& adapter);

}  // namespace relight
