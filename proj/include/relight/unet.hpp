// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "relight/common.hpp"
#include "relight/tensor.hpp"

namespace relight {

// ---------------------------------------------------------------------------
// Small conditional U-Net with explicit reverse-mode gradients.
//
//   stem 3x3 (14 -> w) -> res(w) -> pool -> res(w -> 2w) -> pool
//     -> res(2w) -> up+skip -> res(4w -> 2w) -> up+skip -> res(3w -> w)
//     -> head 3x3 (w -> 3)
//
// Each residual block: GN -> SiLU -> conv -> FiLM(t) -> GN -> SiLU -> conv,
// plus a 1x1 projection on the skip path when widths change. Timestep enters
// through a 64-dim sinusoidal embedding, one shared trunk layer with SiLU,
// then a per-block linear map to channel scale/shift.
//
// Everything is templated on the scalar so gradients can be checked against
// finite differences in double while training runs in float.
// ---------------------------------------------------------------------------

template <typename T>
struct Conv2d {
    int in_ch = 0, out_ch = 0, k = 3;  // k in {1,3}; 3x3 convs use pad 1
    Tensor<T> w;                       // {out, in, k, k}
    Tensor<T> b;                       // {out}
};

template <typename T>
struct Linear {
    int in_f = 0, out_f = 0;
    Tensor<T> w;  // {out, in}
    Tensor<T> b;  // {out}
};

template <typename T>
struct GroupNorm {
    int channels = 0, groups = 8;
    Tensor<T> gamma;  // {C}
    Tensor<T> beta;   // {C}
};

template <typename T>
struct ResBlock {
    GroupNorm<T> gn1;
    Conv2d<T> conv1;
    Linear<T> film;  // temb trunk -> {2*out_ch}: first half scale, second shift
    GroupNorm<T> gn2;
    Conv2d<T> conv2;
    std::optional<Conv2d<T>> skip;  // 1x1, present iff in_ch != out_ch
};

struct UNetConfig {
    int in_ch = 14;
    int out_ch = 3;
    int base = 32;      // divisible by the group count
    int temb_dim = 64;
    int groups = 8;

    bool operator==(const UNetConfig&) const = default;
};

template <typename T>
struct UNet {
    UNetConfig cfg;
    Conv2d<T> stem;
    Linear<T> time_trunk;  // temb_dim -> temb_dim
    ResBlock<T> enc1, enc2, mid, dec2, dec1;
    Conv2d<T> head;
};

template <typename T>
UNet<T> make_unet(const UNetConfig& cfg, Rng& rng);

// Deterministic, stable enumeration order; used by Adam, LoRA, checkpoints.
template <typename T>
void visit_params(UNet<T>& net,
                  const std::function<void(const std::string&, Tensor<T>&)>& fn);
template <typename T>
void visit_params(const UNet<T>& net,
                  const std::function<void(const std::string&, const Tensor<T>&)>& fn);

template <typename T>
void visit_convs(UNet<T>& net, const std::function<void(const std::string&, Conv2d<T>&)>& fn);
template <typename T>
void visit_convs(const UNet<T>& net,
                 const std::function<void(const std::string&, const Conv2d<T>&)>& fn);

template <typename T>
UNet<T> zeros_like(const UNet<T>& net);

template <typename T>
void accumulate(UNet<T>& dst, const UNet<T>& src);

uint64_t param_checksum_bits(const UNet<float>& net);

// Opaque forward cache; one per sample in flight.
template <typename T>
struct UNetCache;

template <typename T>
UNetCache<T>* new_unet_cache();
template <typename T>
void free_unet_cache(UNetCache<T>*);

template <typename T>
struct CacheHandle {
    UNetCache<T>* ptr;
    CacheHandle() : ptr(new_unet_cache<T>()) {}
    ~CacheHandle() { free_unet_cache(ptr); }
    CacheHandle(const CacheHandle&) = delete;
    CacheHandle& operator=(const CacheHandle&) = delete;
};

// x: {in_ch, H, W} with H, W divisible by 4. t: integer timestep for the
// sinusoidal embedding. Returns {out_ch, H, W}.
template <typename T>
Tensor<T> unet_forward(const UNet<T>& net, const Tensor<T>& x, int t, UNetCache<T>* cache);

// dy: gradient at the output. Accumulates parameter gradients into `grads`
// (shapes must match `net`); returns gradient w.r.t. x.
template <typename T>
Tensor<T> unet_backward(const UNet<T>& net, const UNetCache<T>& cache, const Tensor<T>& dy,
                        UNet<T>& grads);

// Sinusoidal timestep embedding, dim must be even: first half sines.
template <typename T>
Tensor<T> timestep_embedding(int t, int dim);

}  // namespace relight
