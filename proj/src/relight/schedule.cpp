// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#include "relight/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace relight {

DiffusionSchedule DiffusionSchedule::make(int T, double beta_min, double beta_max) {
    if (T < 1) throw std::invalid_argument("schedule: T must be >= 1");
    if (beta_min <= 0 || beta_max >= 1 || beta_min > beta_max)
        throw std::invalid_argument("schedule: need 0 < beta_min <= beta_max < 1");
    DiffusionSchedule s;
    s.T = T;
    s.beta.assign(T + 1, 0.0);
    s.alpha_bar.assign(T + 1, 1.0);
    for (int t = 1; t <= T; ++t) {
        s.beta[t] = T == 1 ? beta_min : beta_min + (beta_max - beta_min) * (t - 1) / (T - 1);
        s.alpha_bar[t] = s.alpha_bar[t - 1] * (1.0 - s.beta[t]);
    }
    return s;
}

template <typename T>
Tensor<T> forward_diffuse(const Tensor<T>& x0, int t, const Tensor<T>& noise,
                          const DiffusionSchedule& schedule) {
    if (t < 0 || t > schedule.T) throw std::out_of_range("forward_diffuse: t out of range");
    if (!x0.same_shape(noise)) throw std::invalid_argument("forward_diffuse: shape mismatch");
    double ab = schedule.alpha_bar[t];
    T sa = static_cast<T>(std::sqrt(ab));
    T sn = static_cast<T>(std::sqrt(1.0 - ab));
    Tensor<T> z = x0;
    for (size_t i = 0; i < z.size(); ++i) z.data[i] = sa * x0.data[i] + sn * noise.data[i];
    return z;
}

template Tensor<float> forward_diffuse(const Tensor<float>&, int, const Tensor<float>&,
                                       const DiffusionSchedule&);
template Tensor<double> forward_diffuse(const Tensor<double>&, int, const Tensor<double>&,
                                        const DiffusionSchedule&);

}  // namespace relight
