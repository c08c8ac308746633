// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#include "relight/lora.hpp"

#include <stdexcept>

#include <Eigen/Core>

namespace relight {
namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
void check_layer(const Conv2d<T>& conv, const LoraLayer<T>& layer, int rank) {
    int fan_in = conv.in_ch * conv.k * conv.k;
    if (layer.A.shape != std::vector<int>{rank, fan_in} ||
        layer.B.shape != std::vector<int>{conv.out_ch, rank})
        throw std::invalid_argument("lora: rank mismatch");
}

}  // namespace

template <typename T>
LoraAdapter<T> make_lora(const UNet<T>& net, int rank, double alpha, Rng& rng) {
    if (rank < 1) throw std::invalid_argument("lora: rank must be >= 1");
    LoraAdapter<T> ad;
    ad.rank = rank;
    ad.alpha = alpha;
    visit_convs<T>(net, [&](const std::string& name, const Conv2d<T>& conv) {
        LoraLayer<T> layer;
        layer.A = Tensor<T>({rank, conv.in_ch * conv.k * conv.k});
        layer.B = Tensor<T>({conv.out_ch, rank});
        for (auto& v : layer.A.data) v = static_cast<T>(0.01 * rng.normal());
        ad.names.push_back(name);
        ad.layers.push_back(std::move(layer));
    });
    return ad;
}

template <typename T>
void merge_lora(UNet<T>& net, const LoraAdapter<T>& adapter) {
    size_t i = 0;
    T scale = static_cast<T>(adapter.alpha / adapter.rank);
    visit_convs<T>(net, [&](const std::string&, Conv2d<T>& conv) {
        if (i >= adapter.layers.size()) throw std::invalid_argument("lora: layer count mismatch");
        const LoraLayer<T>& layer = adapter.layers[i++];
        check_layer(conv, layer, adapter.rank);
        int fan_in = conv.in_ch * conv.k * conv.k;
        Eigen::Map<MatRM<T>> wm(conv.w.ptr(), conv.out_ch, fan_in);
        Eigen::Map<const MatRM<T>> am(layer.A.ptr(), adapter.rank, fan_in);
        Eigen::Map<const MatRM<T>> bm(layer.B.ptr(), conv.out_ch, adapter.rank);
        wm.noalias() += scale * (bm * am);
    });
    if (i != adapter.layers.size()) throw std::invalid_argument("lora: layer count mismatch");
}

template <typename T>
UNet<T> apply_lora(const UNet<T>& net, const LoraAdapter<T>& adapter) {
    UNet<T> eff = net;
    merge_lora(eff, adapter);
    return eff;
}

template <typename T>
LoraAdapter<T> project_lora_grads(const UNet<T>& weight_grads, const LoraAdapter<T>& adapter) {
    LoraAdapter<T> g = adapter;
    for (auto& layer : g.layers) {
        layer.A.fill(T(0));
        layer.B.fill(T(0));
    }
    size_t i = 0;
    T scale = static_cast<T>(adapter.alpha / adapter.rank);
    visit_convs<T>(weight_grads, [&](const std::string&, const Conv2d<T>& conv) {
        const LoraLayer<T>& layer = adapter.layers[i];
        check_layer(conv, layer, adapter.rank);
        int fan_in = conv.in_ch * conv.k * conv.k;
        Eigen::Map<const MatRM<T>> dwm(conv.w.ptr(), conv.out_ch, fan_in);
        Eigen::Map<const MatRM<T>> am(layer.A.ptr(), adapter.rank, fan_in);
        Eigen::Map<const MatRM<T>> bm(layer.B.ptr(), conv.out_ch, adapter.rank);
        Eigen::Map<MatRM<T>> dam(g.layers[i].A.ptr(), adapter.rank, fan_in);
        Eigen::Map<MatRM<T>> dbm(g.layers[i].B.ptr(), conv.out_ch, adapter.rank);
        dbm.noalias() = scale * (dwm * am.transpose());
        dam.noalias() = scale * (bm.transpose() * dwm);
        ++i;
    });
    return g;
}

#define RELIGHT_LORA_INST(T)                                                       \
    template LoraAdapter<T> make_lora<T>(const UNet<T>&, int, double, Rng&);       \
    template void merge_lora<T>(UNet<T>&, const LoraAdapter<T>&);                  \
    template UNet<T> apply_lora<T>(const UNet<T>&, const LoraAdapter<T>&);         \
    template LoraAdapter<T> project_lora_grads<T>(const UNet<T>&, const LoraAdapter<T>&);

RELIGHT_LORA_INST(float)
RELIGHT_LORA_INST(double)
#undef RELIGHT_LORA_INST

}  // namespace relight
