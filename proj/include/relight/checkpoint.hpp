// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>

#include "relight/train.hpp"

namespace relight {

// Versioned binary tensor dump: header JSON (step, net shape, lora metadata,
// rng state, config echo) followed by named raw float32 tensors. Round-trips
// bit-exactly.
struct Checkpoint {
    std::string config_json;  // TrainConfig echo, free-form
    std::string rng_state;
    uint64_t step = 0;
    UNet<float> model;
    std::optional<LoraAdapter<float>> adapter;
    std::optional<AdamState> adam;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

}  // namespace relight
