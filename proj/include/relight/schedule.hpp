// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "relight/tensor.hpp"

namespace relight {

// Variance-preserving noising schedule with linearly spaced betas.
// Index convention: alpha_bar[0] == 1 (the clean image), betas apply at
// t = 1..T, so alpha_bar has T+1 entries.
struct DiffusionSchedule {
    int T = 200;
    std::vector<double> beta;       // size T+1, beta[0] unused
    std::vector<double> alpha_bar;  // size T+1, strictly decreasing, in (0,1] with [0]==1

    static DiffusionSchedule make(int T = 200, double beta_min = 1e-4, double beta_max = 0.02);
};

// z_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * noise, 0 <= t <= T.
template <typename T>
Tensor<T> forward_diffuse(const Tensor<T>& x0, int t, const Tensor<T>& noise,
                          const DiffusionSchedule& schedule);

}  // namespace relight
