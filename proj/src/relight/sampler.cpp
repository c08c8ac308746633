// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#include "relight/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "relight/imageio.hpp"

namespace relight {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<int> ddim_timesteps(int T, int steps) {
    if (steps < 1 || steps > T) throw std::invalid_argument("ddim: steps must be in [1, T]");
    std::vector<int> ts(steps);
    if (steps == 1) {
        ts[0] = T;
        return ts;
    }
    for (int i = 0; i < steps; ++i) {
        double f = static_cast<double>(steps - 1 - i) / (steps - 1);
        ts[i] = 1 + static_cast<int>(std::lround(f * (T - 1)));
    }
    for (int i = 1; i < steps; ++i)
        if (ts[i] >= ts[i - 1]) ts[i] = ts[i - 1] - 1;
    if (ts.back() < 1) throw std::invalid_argument("ddim: too many steps for schedule");
    return ts;
}

Tensor<float> ddim_sample_with(
    const DiffusionSchedule& schedule, const std::vector<int>& shape, const DdimConfig& cfg,
    const std::function<Tensor<float>(const Tensor<float>&, int)>& predict_x0) {
    if (cfg.eta < 0 || cfg.eta > 1) throw std::invalid_argument("ddim: eta must be in [0,1]");
    std::vector<int> ts = ddim_timesteps(schedule.T, cfg.steps);

    Rng rng(derive_seed(cfg.seed, "ddim-init"));
    Tensor<float> z(shape);
    for (auto& v : z.data) v = static_cast<float>(rng.normal());

    for (size_t i = 0; i < ts.size(); ++i) {
        int t = ts[i];
        int t_next = i + 1 < ts.size() ? ts[i + 1] : 0;
        double ab = schedule.alpha_bar[t];
        double ab_next = schedule.alpha_bar[t_next];

        Tensor<float> x0 = predict_x0(z, t);
        if (!x0.same_shape(z)) throw std::invalid_argument("ddim: predictor shape mismatch");

        double sa = std::sqrt(ab);
        double sn = std::sqrt(1.0 - ab);
        double sigma = 0.0;
        if (cfg.eta > 0 && t_next > 0) {
            sigma = cfg.eta * std::sqrt((1.0 - ab_next) / (1.0 - ab)) *
                    std::sqrt(1.0 - ab / ab_next);
        }
        double dir = std::sqrt(std::max(0.0, 1.0 - ab_next - sigma * sigma));
        double sa_next = std::sqrt(ab_next);

        for (size_t k = 0; k < z.size(); ++k) {
            double eps_hat = (z.data[k] - sa * x0.data[k]) / sn;
            double v = sa_next * x0.data[k] + dir * eps_hat;
            if (sigma > 0) v += sigma * rng.normal();
            z.data[k] = static_cast<float>(v);
        }
    }
    return z;
}

Tensor<float> ddim_sample(const UNet<float>& model, const DiffusionSchedule& schedule,
                          const Tensor<float>& g, const Tensor<float>& cenv,
                          const DdimConfig& cfg) {
    return ddim_sample_with(schedule, g.shape, cfg,
                            [&](const Tensor<float>& z, int t) -> Tensor<float> {
                                Tensor<float> stack = make_conditioning_stack(z, g, cenv);
                                return unet_forward(model, stack, t,
                                                    static_cast<UNetCache<float>*>(nullptr));
                            });
}

Image env_conditioning_image(const EnvironmentMap& env, const CameraPose& camera, int out_w,
                             int out_h) {
    EnvironmentMap cam_env = project_to_view(env, camera);
    EnvironmentMap ldr = reinhard_tonemap(cam_env);
    return resize_bilinear(env_to_image(ldr), out_w, out_h);
}

Image relight_frame(const UNet<float>& model, const DiffusionSchedule& schedule,
                    const Image& flat, const EnvironmentMap& env, const CameraPose& camera,
                    const DdimConfig& cfg) {
    if (flat.channels != 3) throw std::invalid_argument("relight_frame: flat must be RGB");
    Tensor<float> g = image_to_tensor(flat);
    Tensor<float> cenv =
        image_to_tensor(env_conditioning_image(env, camera, flat.width, flat.height));
    Tensor<float> out = ddim_sample(model, schedule, g, cenv, cfg);
    return clamp_image(tensor_to_image(out), 0.0, 1.0);
}

std::vector<Image> linear_blend(const std::vector<Image>& a, const std::vector<Image>& b,
                                int overlap) {
    if (overlap < 0 || overlap > static_cast<int>(a.size()) ||
        overlap > static_cast<int>(b.size()))
        throw std::invalid_argument("linear_blend: overlap exceeds a chunk");
    std::vector<Image> out;
    out.reserve(a.size() + b.size() - overlap);
    for (size_t i = 0; i + overlap < a.size(); ++i) out.push_back(a[i]);
    for (int i = 0; i < overlap; ++i) {
        const Image& fa = a[a.size() - overlap + i];
        const Image& fb = b[i];
        if (!fa.same_shape(fb)) throw std::invalid_argument("linear_blend: shape mismatch");
        double w = static_cast<double>(i + 1) / (overlap + 1);
        Image m = fa;
        for (size_t k = 0; k < m.data.size(); ++k)
            m.data[k] = fa.data[k] + w * (fb.data[k] - fa.data[k]);
        out.push_back(std::move(m));
    }
    for (size_t i = overlap; i < b.size(); ++i) out.push_back(b[i]);
    return out;
}

std::vector<std::pair<int, int>> plan_chunks(const ChunkPlan& plan) {
    if (plan.total_frames < 1) throw std::invalid_argument("plan_chunks: no frames");
    if (plan.overlap < 0 || plan.overlap >= plan.chunk_len)
        throw std::invalid_argument("plan_chunks: need 0 <= overlap < chunk_len");
    int len = std::min(plan.chunk_len, plan.total_frames);
    int stride = plan.chunk_len - plan.overlap;
    std::vector<std::pair<int, int>> chunks;
    for (int start = 0;; start += stride) {
        if (start + len >= plan.total_frames) {
            chunks.emplace_back(plan.total_frames - len, plan.total_frames);
            break;
        }
        chunks.emplace_back(start, start + len);
    }
    // The shifted last chunk can duplicate the previous window.
    if (chunks.size() >= 2 && chunks[chunks.size() - 2] == chunks.back()) chunks.pop_back();
    return chunks;
}

std::vector<Image> long_video(const UNet<float>& model, const DiffusionSchedule& schedule,
                              const std::vector<Image>& flats,
                              const std::vector<const EnvironmentMap*>& envs,
                              const CameraPose& camera, const ChunkPlan& plan,
                              const std::vector<uint64_t>& chunk_seeds, const DdimConfig& base) {
    if (flats.size() != envs.size() ||
        flats.size() != static_cast<size_t>(plan.total_frames))
        throw std::invalid_argument("long_video: plan does not cover the slice");
    auto chunks = plan_chunks(plan);
    if (chunk_seeds.size() != chunks.size())
        throw std::invalid_argument("long_video: need one seed per chunk");

    std::vector<std::vector<Image>> rendered(chunks.size());
    parallel_for(chunks.size(), [&](size_t cb, size_t ce) {
        for (size_t c = cb; c < ce; ++c) {
            auto [start, end] = chunks[c];
            DdimConfig cfg = base;
            cfg.seed = chunk_seeds[c];  // shared by every frame in the chunk
            std::vector<Image> frames;
            frames.reserve(end - start);
            for (int f = start; f < end; ++f)
                frames.push_back(
                    relight_frame(model, schedule, flats[f], *envs[f], camera, cfg));
            rendered[c] = std::move(frames);
        }
    });

    std::vector<Image> merged = std::move(rendered[0]);
    int covered_end = chunks[0].second;
    for (size_t c = 1; c < chunks.size(); ++c) {
        int actual_overlap = covered_end - chunks[c].first;
        merged = linear_blend(merged, rendered[c], actual_overlap);
        covered_end = chunks[c].second;
    }
    return merged;
}

ConsistencyReport consistency_report(const std::vector<Image>& outputs, const Image* mask) {
    if (outputs.size() < 2)
        throw std::invalid_argument("consistency_report: need at least 2 outputs");
    for (const auto& o : outputs)
        if (!o.same_shape(outputs[0]))
            throw std::invalid_argument("consistency_report: shape mismatch");

    const Image& first = outputs[0];
    ConsistencyReport rep;
    rep.std_map = Image(first.width, first.height, 1);
    double sum = 0;
    size_t count = 0;
    double n = static_cast<double>(outputs.size());
    for (int y = 0; y < first.height; ++y) {
        for (int x = 0; x < first.width; ++x) {
            double acc = 0;
            for (int c = 0; c < first.channels; ++c) {
                double mean = 0;
                for (const auto& o : outputs) mean += o.at(x, y, c);
                mean /= n;
                double var = 0;
                for (const auto& o : outputs) {
                    double d = o.at(x, y, c) - mean;
                    var += d * d;
                }
                acc += std::sqrt(var / n);
            }
            double s = acc / first.channels;
            rep.std_map.at(x, y, 0) = s;
            if (!mask || mask->at(x, y, 0) > 0.5) {
                sum += s;
                ++count;
            }
        }
    }
    rep.mean_std = count ? sum / count : 0.0;
    return rep;
}

void write_video(const std::string& dir, const std::vector<Image>& frames, double fps,
                 const ChunkPlan& plan, const std::vector<uint64_t>& seeds) {
    fs::create_directories(dir);
    for (size_t i = 0; i < frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%05zu.png", i);
        write_png((fs::path(dir) / name).string(), frames[i]);
    }
    json meta;
    meta["fps"] = fps;
    meta["frame_count"] = frames.size();
    meta["plan"] = {{"chunk_len", plan.chunk_len},
                    {"overlap", plan.overlap},
                    {"total_frames", plan.total_frames}};
    meta["seeds"] = seeds;
    atomic_write_bytes((fs::path(dir) / "video.json").string(), meta.dump(2) + "\n");
}

std::vector<Image> read_video(const std::string& dir) {
    json meta = json::parse(read_file_bytes((fs::path(dir) / "video.json").string()));
    size_t n = meta.at("frame_count").get<size_t>();
    std::vector<Image> frames;
    frames.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%05zu.png", i);
        frames.push_back(read_png((fs::path(dir) / name).string()));
    }
    return frames;
}

}  // namespace relight
