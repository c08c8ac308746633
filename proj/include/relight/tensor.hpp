// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace relight {

// Dense row-major tensor. Activations use {C,H,W}, conv kernels
// {out,in,kh,kw}, linear weights {out,in}, vectors {n}.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        size_t n = 1;
        for (int d : shape) {
            if (d < 0) throw std::invalid_argument("negative tensor dim");
            n *= static_cast<size_t>(d);
        }
        data.assign(n, T(0));
    }

    size_t size() const { return data.size(); }
    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }
    T& operator[](size_t i) { return data[i]; }
    const T& operator[](size_t i) const { return data[i]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
    if (!dst.same_shape(src)) throw std::invalid_argument("accumulate: shape mismatch");
    for (size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace relight
