// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#include "relight/train.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <stdexcept>

#include "relight/checkpoint.hpp"

namespace relight {

namespace fs = std::filesystem;

template <typename T>
Tensor<T> make_conditioning_stack(const Tensor<T>& z, const Tensor<T>& g,
                                  const Tensor<T>& cenv) {
    if (!z.same_shape(g) || !z.same_shape(cenv) || z.shape.size() != 3 || z.shape[0] != 3)
        throw std::invalid_argument("conditioning stack: inputs must share {3,H,W}");
    int H = z.shape[1], W = z.shape[2];
    Tensor<T> s({14, H, W});
    size_t plane3 = static_cast<size_t>(3) * H * W;
    std::memcpy(s.ptr(), z.ptr(), plane3 * sizeof(T));
    std::memcpy(s.ptr() + plane3, g.ptr(), plane3 * sizeof(T));
    std::memcpy(s.ptr() + 2 * plane3, cenv.ptr(), plane3 * sizeof(T));
    return s;  // channels 9..13 stay zero (G-buffer slots)
}

Tensor<float> image_to_tensor(const Image& img) {
    Tensor<float> t({img.channels, img.height, img.width});
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                t.data[(static_cast<size_t>(c) * img.height + y) * img.width + x] =
                    static_cast<float>(img.at(x, y, c));
    return t;
}

Image tensor_to_image(const Tensor<float>& t) {
    if (t.shape.size() != 3) throw std::invalid_argument("tensor_to_image: expected CHW");
    Image img(t.shape[2], t.shape[1], t.shape[0]);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                img.at(x, y, c) =
                    t.data[(static_cast<size_t>(c) * img.height + y) * img.width + x];
    return img;
}

namespace {

template <typename T>
struct Draw {
    int t;
    Tensor<T> noise;
};

template <typename T>
std::vector<Draw<T>> draw_batch_noise(const std::vector<BatchItem<T>>& batch,
                                      const DiffusionSchedule& schedule, Rng& rng) {
    std::vector<Draw<T>> draws;
    draws.reserve(batch.size());
    for (const auto& item : batch) {
        Draw<T> d;
        d.t = 1 + static_cast<int>(rng.uniform_index(static_cast<size_t>(schedule.T)));
        d.noise = Tensor<T>(item.z0.shape);
        for (auto& v : d.noise.data) v = static_cast<T>(rng.normal());
        draws.push_back(std::move(d));
    }
    return draws;
}

}  // namespace

template <typename T>
double diffusion_loss_with_predictor(
    const std::vector<BatchItem<T>>& batch, const DiffusionSchedule& schedule, Rng& rng,
    const std::function<Tensor<T>(const Tensor<T>&, int)>& predictor) {
    if (batch.empty()) throw std::invalid_argument("loss: empty batch");
    auto draws = draw_batch_noise(batch, schedule, rng);
    double total = 0;
    for (size_t i = 0; i < batch.size(); ++i) {
        const auto& item = batch[i];
        Tensor<T> z = forward_diffuse(item.z0, draws[i].t, draws[i].noise, schedule);
        Tensor<T> stack = make_conditioning_stack(z, item.g, item.cenv);
        Tensor<T> pred = predictor(stack, draws[i].t);
        if (!pred.same_shape(item.z0)) throw std::invalid_argument("loss: prediction shape");
        double se = 0;
        for (size_t k = 0; k < pred.size(); ++k) {
            double e = static_cast<double>(pred.data[k]) - static_cast<double>(item.z0.data[k]);
            se += e * e;
        }
        total += se / static_cast<double>(pred.size());
    }
    return total / static_cast<double>(batch.size());
}

template <typename T>
GradResult<T> diffusion_loss_and_grad(const UNet<T>& model, const LoraAdapter<T>* adapter,
                                      const std::vector<BatchItem<T>>& batch,
                                      const DiffusionSchedule& schedule, Rng& rng,
                                      bool lora_mode) {
    if (batch.empty()) throw std::invalid_argument("grad: empty batch");
    if (lora_mode && !adapter) throw std::invalid_argument("grad: lora mode needs adapter");

    UNet<T> eff_storage;
    const UNet<T>* eff = &model;
    if (adapter) {
        eff_storage = apply_lora(model, *adapter);
        eff = &eff_storage;
    }

    auto draws = draw_batch_noise(batch, schedule, rng);

    std::vector<double> item_loss(batch.size(), 0.0);
    std::vector<UNet<T>> item_grads(batch.size());
    parallel_for(batch.size(), [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            const auto& item = batch[i];
            Tensor<T> z = forward_diffuse(item.z0, draws[i].t, draws[i].noise, schedule);
            Tensor<T> stack = make_conditioning_stack(z, item.g, item.cenv);
            CacheHandle<T> cache;
            Tensor<T> pred = unet_forward(*eff, stack, draws[i].t, cache.ptr);
            Tensor<T> dy = pred;
            double se = 0;
            double scale = 2.0 / (static_cast<double>(pred.size()) * batch.size());
            for (size_t k = 0; k < pred.size(); ++k) {
                double e =
                    static_cast<double>(pred.data[k]) - static_cast<double>(item.z0.data[k]);
                se += e * e;
                dy.data[k] = static_cast<T>(e * scale);
            }
            item_loss[i] = se / static_cast<double>(pred.size());
            item_grads[i] = zeros_like(*eff);
            unet_backward(*eff, *cache.ptr, dy, item_grads[i]);
        }
    });

    GradResult<T> out;
    out.weight_grads = std::move(item_grads[0]);
    for (size_t i = 1; i < item_grads.size(); ++i) accumulate(out.weight_grads, item_grads[i]);
    for (double l : item_loss) out.loss += l;
    out.loss /= static_cast<double>(batch.size());

    if (lora_mode) out.lora_grads = project_lora_grads(out.weight_grads, *adapter);
    return out;
}

template <typename T>
Tensor<T> denoise_predict(const UNet<T>& model, const LoraAdapter<T>* adapter,
                          const Tensor<T>& stack, int t) {
    if (adapter) {
        UNet<T> eff = apply_lora(model, *adapter);
        return unet_forward(eff, stack, t, static_cast<UNetCache<T>*>(nullptr));
    }
    return unet_forward(model, stack, t, static_cast<UNetCache<T>*>(nullptr));
}

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "pretrain") return TrainMode::Pretrain;
    if (s == "lora") return TrainMode::Lora;
    if (s == "full") return TrainMode::Full;
    if (s == "scratch") return TrainMode::Scratch;
    throw std::invalid_argument("unknown train mode: " + s);
}

std::string to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::Pretrain: return "pretrain";
        case TrainMode::Lora: return "lora";
        case TrainMode::Full: return "full";
        case TrainMode::Scratch: return "scratch";
    }
    return "?";
}

AdamState make_adam_state(const std::vector<const Tensor<float>*>& params) {
    AdamState st;
    st.m.reserve(params.size());
    st.v.reserve(params.size());
    for (const auto* p : params) {
        st.m.emplace_back(p->shape);
        st.v.emplace_back(p->shape);
    }
    return st;
}

void adam_step(const std::vector<Tensor<float>*>& params,
               const std::vector<const Tensor<float>*>& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam: tensor list mismatch");
    state.step += 1;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (size_t k = 0; k < params.size(); ++k) {
        Tensor<float>& p = *params[k];
        const Tensor<float>& g = *grads[k];
        Tensor<float>& m = state.m[k];
        Tensor<float>& v = state.v[k];
        if (!p.same_shape(g)) throw std::invalid_argument("adam: grad shape mismatch");
        for (size_t i = 0; i < p.size(); ++i) {
            double gi = g.data[i];
            double mi = beta1 * m.data[i] + (1.0 - beta1) * gi;
            double vi = beta2 * v.data[i] + (1.0 - beta2) * gi * gi;
            m.data[i] = static_cast<float>(mi);
            v.data[i] = static_cast<float>(vi);
            p.data[i] -= static_cast<float>(lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps));
        }
    }
}

namespace {

std::vector<Tensor<float>*> trainable_params(UNet<float>& model, LoraAdapter<float>* adapter,
                                             TrainMode mode) {
    std::vector<Tensor<float>*> out;
    if (mode == TrainMode::Lora) {
        for (auto& layer : adapter->layers) {
            out.push_back(&layer.A);
            out.push_back(&layer.B);
        }
    } else {
        visit_params<float>(model,
                            [&](const std::string&, Tensor<float>& t) { out.push_back(&t); });
    }
    return out;
}

std::vector<const Tensor<float>*> grad_ptrs(GradResult<float>& gr, TrainMode mode) {
    std::vector<const Tensor<float>*> out;
    if (mode == TrainMode::Lora) {
        for (auto& layer : gr.lora_grads->layers) {
            out.push_back(&layer.A);
            out.push_back(&layer.B);
        }
    } else {
        visit_params<float>(gr.weight_grads,
                            [&](const std::string&, Tensor<float>& t) { out.push_back(&t); });
    }
    return out;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<BatchItem<float>>& dataset,
                  const UNet<float>* init_model, const std::string& resume_from) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    if (cfg.batch_size < 1 || cfg.steps < 0 || cfg.lr <= 0)
        throw std::invalid_argument("train: bad config");

    DiffusionSchedule schedule = DiffusionSchedule::make(cfg.schedule_T);
    TrainResult res;
    Rng rng(derive_seed(cfg.seed, "train"));
    uint64_t start_step = 0;
    std::optional<AdamState> adam;

    if (!resume_from.empty()) {
        Checkpoint ck = load_checkpoint(resume_from);
        res.model = std::move(ck.model);
        res.adapter = std::move(ck.adapter);
        adam = std::move(ck.adam);
        start_step = ck.step;
        rng.set_state_string(ck.rng_state);
    } else {
        switch (cfg.mode) {
            case TrainMode::Pretrain:
            case TrainMode::Scratch: {
                if (init_model) {
                    res.model = *init_model;
                } else {
                    Rng init_rng(derive_seed(cfg.seed, "init"));
                    res.model = make_unet<float>(cfg.net, init_rng);
                }
                break;
            }
            case TrainMode::Full:
            case TrainMode::Lora: {
                if (!init_model)
                    throw std::invalid_argument("train: full/lora modes need a base model");
                res.model = *init_model;
                break;
            }
        }
        if (cfg.mode == TrainMode::Lora) {
            Rng lora_rng(derive_seed(cfg.seed, "lora"));
            res.adapter = make_lora(res.model, cfg.lora_rank, cfg.lora_alpha, lora_rng);
        }
    }

    LoraAdapter<float>* adapter = res.adapter ? &*res.adapter : nullptr;
    auto params = trainable_params(res.model, adapter, cfg.mode);
    if (!adam) {
        std::vector<const Tensor<float>*> cps(params.begin(), params.end());
        adam = make_adam_state(cps);
    }

    bool lora_mode = cfg.mode == TrainMode::Lora;
    std::string config_json = train_config_to_json(cfg);

    auto save_at = [&](uint64_t step, const std::string& name) -> std::string {
        if (cfg.out_dir.empty()) return {};
        Checkpoint ck;
        ck.config_json = config_json;
        ck.rng_state = rng.state_string();
        ck.step = step;
        ck.model = res.model;
        ck.adapter = res.adapter;
        ck.adam = adam;
        std::string path = (fs::path(cfg.out_dir) / name).string();
        save_checkpoint(path, ck);
        return path;
    };

    for (uint64_t step = start_step + 1; step <= static_cast<uint64_t>(cfg.steps); ++step) {
        std::vector<BatchItem<float>> batch;
        batch.reserve(cfg.batch_size);
        for (int b = 0; b < cfg.batch_size; ++b)
            batch.push_back(dataset[rng.uniform_index(dataset.size())]);

        GradResult<float> gr =
            diffusion_loss_and_grad(res.model, adapter, batch, schedule, rng, lora_mode);
        if (!std::isfinite(gr.loss))
            throw NumericError("train: non-finite loss at step " + std::to_string(step));

        auto gptrs = grad_ptrs(gr, cfg.mode);
        adam_step(params, gptrs, *adam, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
        res.loss_history.push_back(gr.loss);

        if (cfg.checkpoint_every > 0 && step % static_cast<uint64_t>(cfg.checkpoint_every) == 0) {
            char name[32];
            std::snprintf(name, sizeof(name), "ckpt_%06llu.bin",
                          static_cast<unsigned long long>(step));
            save_at(step, name);
        }
    }

    res.checkpoint_path = save_at(static_cast<uint64_t>(cfg.steps), "model.bin");
    return res;
}

#define RELIGHT_TRAIN_INST(T)                                                                  \
    template Tensor<T> make_conditioning_stack<T>(const Tensor<T>&, const Tensor<T>&,          \
                                                  const Tensor<T>&);                           \
    template double diffusion_loss_with_predictor<T>(                                          \
        const std::vector<BatchItem<T>>&, const DiffusionSchedule&, Rng&,                      \
        const std::function<Tensor<T>(const Tensor<T>&, int)>&);                               \
    template GradResult<T> diffusion_loss_and_grad<T>(const UNet<T>&, const LoraAdapter<T>*,   \
                                                      const std::vector<BatchItem<T>>&,        \
                                                      const DiffusionSchedule&, Rng&, bool);   \
    template Tensor<T> denoise_predict<T>(const UNet<T>&, const LoraAdapter<T>*,               \
                                          const Tensor<T>&, int);

RELIGHT_TRAIN_INST(float)
RELIGHT_TRAIN_INST(double)
#undef RELIGHT_TRAIN_INST

}  // namespace relight
