// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "relight/checkpoint.hpp"
#include "relight/lora.hpp"
#include "relight/schedule.hpp"
#include "relight/train.hpp"
#include "relight/unet.hpp"

using namespace relight;
namespace fs = std::filesystem;

namespace {

UNetConfig micro_config() {
    UNetConfig cfg;
    cfg.base = 8;
    return cfg;
}

template <typename T>
Tensor<T> random_tensor(const std::vector<int>& shape, Rng& rng, double scale = 1.0) {
    Tensor<T> t(shape);
    for (auto& v : t.data) v = static_cast<T>(scale * rng.normal());
    return t;
}

template <typename T>
std::vector<BatchItem<T>> micro_batch(int n, int hw, uint64_t seed) {
    Rng rng(seed);
    std::vector<BatchItem<T>> batch;
    for (int i = 0; i < n; ++i) {
        BatchItem<T> item;
        item.g = random_tensor<T>({3, hw, hw}, rng, 0.3);
        item.z0 = random_tensor<T>({3, hw, hw}, rng, 0.3);
        item.cenv = random_tensor<T>({3, hw, hw}, rng, 0.3);
        batch.push_back(std::move(item));
    }
    return batch;
}

// Deterministic coordinate sample: first, middle, last.
std::vector<size_t> probe_coords(size_t n) {
    if (n == 0) return {};
    if (n == 1) return {0};
    if (n == 2) return {0, 1};
    return {0, n / 2, n - 1};
}

double rel_err(double a, double b) {
    double denom = std::max({std::abs(a), std::abs(b), 1e-7});
    return std::abs(a - b) / denom;
}

}  // namespace

// -----------------------------------------------------------------------------
// schedule
// -----------------------------------------------------------------------------

TEST_CASE("schedule betas are linear and alpha_bar telescopes") {
    DiffusionSchedule s = DiffusionSchedule::make(200, 1e-4, 0.02);
    REQUIRE(s.beta.size() == 201);
    REQUIRE(s.alpha_bar.size() == 201);
    CHECK(s.beta[1] == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(s.beta[200] == doctest::Approx(0.02).epsilon(1e-12));
    double mid_expected = 1e-4 + (100.0 - 1.0) / 199.0 * (0.02 - 1e-4);
    CHECK(s.beta[100] == doctest::Approx(mid_expected).epsilon(1e-12));

    CHECK(s.alpha_bar[0] == 1.0);
    double prod = 1.0;
    for (int t = 1; t <= 200; ++t) {
        prod *= 1.0 - s.beta[t];
        CHECK(s.alpha_bar[t] == doctest::Approx(prod).epsilon(1e-12));
        CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
        CHECK(s.alpha_bar[t] > 0.0);
    }
    // Terminal signal level for this beta range.
    CHECK(s.alpha_bar[200] == doctest::Approx(0.132183).epsilon(1e-4));
}

TEST_CASE("forward diffusion at t=0 returns the clean image") {
    DiffusionSchedule s = DiffusionSchedule::make();
    Rng rng(1);
    Tensor<float> x0 = random_tensor<float>({3, 4, 4}, rng);
    Tensor<float> noise = random_tensor<float>({3, 4, 4}, rng);
    Tensor<float> z = forward_diffuse(x0, 0, noise, s);
    CHECK(z.data == x0.data);
}

TEST_CASE("forward diffusion matches the scheduled mean and variance") {
    DiffusionSchedule s = DiffusionSchedule::make();
    int t = 200;
    Rng rng(7);
    Tensor<double> x0({1, 128, 128});
    x0.fill(1.0);
    Tensor<double> noise = random_tensor<double>({1, 128, 128}, rng);
    Tensor<double> z = forward_diffuse(x0, t, noise, s);

    double mean = 0;
    for (double v : z.data) mean += v;
    mean /= static_cast<double>(z.size());
    double var = 0;
    for (double v : z.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(z.size());

    CHECK(std::abs(mean - std::sqrt(s.alpha_bar[t])) < 0.05 * std::sqrt(s.alpha_bar[t]) + 0.01);
    CHECK(std::abs(var - (1.0 - s.alpha_bar[t])) < 0.05 * (1.0 - s.alpha_bar[t]));
}

// -----------------------------------------------------------------------------
// conditioning stack and embedding
// -----------------------------------------------------------------------------

TEST_CASE("conditioning stack layout: z | flat | env | zeroed G-buffer slots") {
    Rng rng(3);
    Tensor<float> z = random_tensor<float>({3, 4, 4}, rng);
    Tensor<float> g = random_tensor<float>({3, 4, 4}, rng);
    Tensor<float> c = random_tensor<float>({3, 4, 4}, rng);
    Tensor<float> s = make_conditioning_stack(z, g, c);
    REQUIRE(s.shape == std::vector<int>({14, 4, 4}));
    size_t plane = 16;
    for (size_t i = 0; i < 3 * plane; ++i) {
        CHECK(s.data[i] == z.data[i]);
        CHECK(s.data[3 * plane + i] == g.data[i]);
        CHECK(s.data[6 * plane + i] == c.data[i]);
    }
    for (size_t i = 9 * plane; i < 14 * plane; ++i) CHECK(s.data[i] == 0.0f);
}

TEST_CASE("timestep embedding is bounded and separates timesteps") {
    Tensor<float> e1 = timestep_embedding<float>(1, 64);
    Tensor<float> e2 = timestep_embedding<float>(150, 64);
    REQUIRE(e1.size() == 64);
    for (float v : e1.data) {
        CHECK(v <= 1.0f);
        CHECK(v >= -1.0f);
    }
    double diff = 0;
    for (size_t i = 0; i < e1.size(); ++i) diff += std::abs(e1.data[i] - e2.data[i]);
    CHECK(diff > 0.1);
}

// -----------------------------------------------------------------------------
// loss oracles
// -----------------------------------------------------------------------------

TEST_CASE("a perfect x0 predictor has zero loss; a biased one has bias^2") {
    DiffusionSchedule s = DiffusionSchedule::make();
    auto batch = micro_batch<double>(1, 8, 11);

    Rng rng1(5);
    double perfect = diffusion_loss_with_predictor<double>(
        batch, s, rng1, [&](const Tensor<double>& stack, int t) {
            REQUIRE(stack.shape[0] == 14);
            REQUIRE(t >= 1);
            REQUIRE(t <= s.T);
            return batch[0].z0;
        });
    CHECK(perfect == 0.0);

    double c = 0.37;
    Rng rng2(5);
    double biased = diffusion_loss_with_predictor<double>(
        batch, s, rng2, [&](const Tensor<double>&, int) {
            Tensor<double> p = batch[0].z0;
            for (auto& v : p.data) v += c;
            return p;
        });
    CHECK(biased == doctest::Approx(c * c).epsilon(1e-12));
}

TEST_CASE("the predictor sees the noisy target consistent with its draw") {
    // Reconstruct the (t, noise) stream with an identically seeded rng and
    // verify the stack's first three channels are forward_diffuse(z0, t).
    DiffusionSchedule s = DiffusionSchedule::make();
    auto batch = micro_batch<double>(2, 8, 21);
    uint64_t seed = 99;

    Rng shadow(seed);
    std::vector<std::pair<int, Tensor<double>>> draws;
    for (const auto& item : batch) {
        int t = 1 + static_cast<int>(shadow.uniform_index(static_cast<size_t>(s.T)));
        Tensor<double> noise(item.z0.shape);
        for (auto& v : noise.data) v = shadow.normal();
        draws.push_back({t, std::move(noise)});
    }

    Rng rng(seed);
    size_t idx = 0;
    diffusion_loss_with_predictor<double>(
        batch, s, rng, [&](const Tensor<double>& stack, int t) {
            CHECK(t == draws[idx].first);
            Tensor<double> expect =
                forward_diffuse(batch[idx].z0, draws[idx].first, draws[idx].second, s);
            size_t plane = expect.size();
            for (size_t i = 0; i < plane; ++i)
                CHECK(stack.data[i] == doctest::Approx(expect.data[i]).epsilon(1e-12));
            ++idx;
            return batch[idx - 1].z0;
        });
    CHECK(idx == batch.size());
}

// -----------------------------------------------------------------------------
// gradient checks (double precision, micro net)
// -----------------------------------------------------------------------------

TEST_CASE("analytic parameter gradients match central finite differences") {
    Rng init(42);
    UNet<double> net = make_unet<double>(micro_config(), init);
    auto batch = micro_batch<double>(2, 8, 17);
    DiffusionSchedule s = DiffusionSchedule::make();
    uint64_t seed = 1234;

    Rng grad_rng(seed);
    GradResult<double> res = diffusion_loss_and_grad<double>(
        net, static_cast<const LoraAdapter<double>*>(nullptr), batch, s, grad_rng, false);

    auto loss_at = [&](UNet<double>& probe) {
        Rng r(seed);
        return diffusion_loss_and_grad<double>(
                   probe, static_cast<const LoraAdapter<double>*>(nullptr), batch, s, r, false)
            .loss;
    };

    // Collect parallel views of parameters and gradients.
    std::vector<Tensor<double>*> params;
    std::vector<std::string> names;
    visit_params<double>(net, [&](const std::string& name, Tensor<double>& p) {
        params.push_back(&p);
        names.push_back(name);
    });
    std::vector<const Tensor<double>*> grads;
    visit_params<double>(res.weight_grads,
                         [&](const std::string&, const Tensor<double>& g) {
                             grads.push_back(&g);
                         });
    REQUIRE(params.size() == grads.size());
    REQUIRE(params.size() > 30);

    double worst = 0;
    std::string worst_name;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        for (size_t ci : probe_coords(params[pi]->size())) {
            double orig = params[pi]->data[ci];
            double h = 1e-4 * std::max(1.0, std::abs(orig));
            params[pi]->data[ci] = orig + h;
            double lp = loss_at(net);
            params[pi]->data[ci] = orig - h;
            double lm = loss_at(net);
            params[pi]->data[ci] = orig;
            double fd = (lp - lm) / (2.0 * h);
            double an = grads[pi]->data[ci];
            if (std::abs(fd) < 1e-9 && std::abs(an) < 1e-9) continue;
            double e = rel_err(an, fd);
            if (e > worst) {
                worst = e;
                worst_name = names[pi];
            }
        }
    }
    INFO("worst tensor: ", worst_name);
    CHECK(worst < 1e-3);
}

TEST_CASE("input gradients match finite differences") {
    Rng init(7);
    UNet<double> net = make_unet<double>(micro_config(), init);
    Rng data_rng(9);
    Tensor<double> x = random_tensor<double>({14, 8, 8}, data_rng, 0.5);
    Tensor<double> target = random_tensor<double>({3, 8, 8}, data_rng, 0.5);
    int t = 37;

    auto loss_of = [&](const Tensor<double>& input) {
        Tensor<double> y =
            unet_forward<double>(net, input, t, static_cast<UNetCache<double>*>(nullptr));
        double l = 0;
        for (size_t i = 0; i < y.size(); ++i) {
            double e = y.data[i] - target.data[i];
            l += 0.5 * e * e;
        }
        return l;
    };

    CacheHandle<double> cache;
    Tensor<double> y = unet_forward<double>(net, x, t, cache.ptr);
    Tensor<double> dy(y.shape);
    for (size_t i = 0; i < y.size(); ++i) dy.data[i] = y.data[i] - target.data[i];
    UNet<double> grads = zeros_like(net);
    Tensor<double> dx = unet_backward<double>(net, *cache.ptr, dy, grads);
    REQUIRE(dx.same_shape(x));

    double worst = 0;
    for (size_t ci : {size_t(0), x.size() / 3, x.size() / 2, x.size() - 1}) {
        double orig = x.data[ci];
        double h = 1e-5 * std::max(1.0, std::abs(orig));
        x.data[ci] = orig + h;
        double lp = loss_of(x);
        x.data[ci] = orig - h;
        double lm = loss_of(x);
        x.data[ci] = orig;
        double fd = (lp - lm) / (2.0 * h);
        if (std::abs(fd) < 1e-10 && std::abs(dx.data[ci]) < 1e-10) continue;
        worst = std::max(worst, rel_err(dx.data[ci], fd));
    }
    CHECK(worst < 1e-3);
}

// -----------------------------------------------------------------------------
// LoRA algebra
// -----------------------------------------------------------------------------

TEST_CASE("a fresh adapter is an exact identity") {
    Rng init(3);
    UNet<float> net = make_unet<float>(micro_config(), init);
    Rng lora_rng(4);
    LoraAdapter<float> ad = make_lora<float>(net, 4, 8.0, lora_rng);
    REQUIRE(ad.layers.size() == ad.names.size());
    REQUIRE(!ad.layers.empty());
    for (const auto& layer : ad.layers)
        for (float v : layer.B.data) CHECK(v == 0.0f);

    Rng data_rng(5);
    Tensor<float> x = random_tensor<float>({14, 8, 8}, data_rng);
    UNet<float> eff = apply_lora(net, ad);
    Tensor<float> y0 = unet_forward<float>(net, x, 3, static_cast<UNetCache<float>*>(nullptr));
    Tensor<float> y1 = unet_forward<float>(eff, x, 3, static_cast<UNetCache<float>*>(nullptr));
    double max_diff = 0;
    for (size_t i = 0; i < y0.size(); ++i)
        max_diff = std::max(max_diff, std::abs(double(y0.data[i]) - double(y1.data[i])));
    CHECK(max_diff < 1e-7);
}

TEST_CASE("merge_lora and apply_lora produce the same effective model") {
    Rng init(13);
    UNet<float> net = make_unet<float>(micro_config(), init);
    Rng lora_rng(14);
    LoraAdapter<float> ad = make_lora<float>(net, 4, 8.0, lora_rng);
    Rng fill(15);
    for (auto& layer : ad.layers)
        for (auto& v : layer.B.data) v = static_cast<float>(0.05 * fill.normal());

    UNet<float> merged = net;
    merge_lora(merged, ad);
    UNet<float> applied = apply_lora(net, ad);

    Rng data_rng(16);
    Tensor<float> x = random_tensor<float>({14, 8, 8}, data_rng);
    Tensor<float> ym =
        unet_forward<float>(merged, x, 9, static_cast<UNetCache<float>*>(nullptr));
    Tensor<float> ya =
        unet_forward<float>(applied, x, 9, static_cast<UNetCache<float>*>(nullptr));
    double max_diff = 0;
    for (size_t i = 0; i < ym.size(); ++i)
        max_diff = std::max(max_diff, std::abs(double(ym.data[i]) - double(ya.data[i])));
    CHECK(max_diff < 1e-6);

    // And the adapter really changes the model.
    Tensor<float> y0 = unet_forward<float>(net, x, 9, static_cast<UNetCache<float>*>(nullptr));
    double delta = 0;
    for (size_t i = 0; i < ym.size(); ++i)
        delta = std::max(delta, std::abs(double(ym.data[i]) - double(y0.data[i])));
    CHECK(delta > 1e-6);
}

TEST_CASE("lora gradients match finite differences through the adapter") {
    Rng init(23);
    UNet<double> net = make_unet<double>(micro_config(), init);
    Rng lora_rng(24);
    LoraAdapter<double> ad = make_lora<double>(net, 2, 4.0, lora_rng);
    Rng fill(25);
    for (auto& layer : ad.layers)
        for (auto& v : layer.B.data) v = 0.05 * fill.normal();

    auto batch = micro_batch<double>(1, 8, 26);
    DiffusionSchedule s = DiffusionSchedule::make();
    uint64_t seed = 777;

    Rng grad_rng(seed);
    GradResult<double> res = diffusion_loss_and_grad<double>(net, &ad, batch, s, grad_rng, true);
    REQUIRE(res.lora_grads.has_value());

    auto loss_at = [&]() {
        Rng r(seed);
        return diffusion_loss_and_grad<double>(net, &ad, batch, s, r, true).loss;
    };

    double worst = 0;
    for (size_t li : {size_t(0), ad.layers.size() / 2, ad.layers.size() - 1}) {
        auto check_tensor = [&](Tensor<double>& param, const Tensor<double>& grad) {
            for (size_t ci : probe_coords(param.size())) {
                double orig = param.data[ci];
                double h = 1e-4 * std::max(1.0, std::abs(orig));
                param.data[ci] = orig + h;
                double lp = loss_at();
                param.data[ci] = orig - h;
                double lm = loss_at();
                param.data[ci] = orig;
                double fd = (lp - lm) / (2.0 * h);
                double an = grad.data[ci];
                if (std::abs(fd) < 1e-9 && std::abs(an) < 1e-9) continue;
                worst = std::max(worst, rel_err(an, fd));
            }
        };
        check_tensor(ad.layers[li].A, res.lora_grads->layers[li].A);
        check_tensor(ad.layers[li].B, res.lora_grads->layers[li].B);
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("at init only B receives gradient signal") {
    Rng init(33);
    UNet<double> net = make_unet<double>(micro_config(), init);
    Rng lora_rng(34);
    LoraAdapter<double> ad = make_lora<double>(net, 2, 4.0, lora_rng);  // B = 0

    auto batch = micro_batch<double>(1, 8, 35);
    DiffusionSchedule s = DiffusionSchedule::make();
    Rng rng(36);
    GradResult<double> res = diffusion_loss_and_grad<double>(net, &ad, batch, s, rng, true);
    REQUIRE(res.lora_grads.has_value());

    double a_norm = 0, b_norm = 0;
    for (const auto& layer : res.lora_grads->layers) {
        for (double v : layer.A.data) a_norm += v * v;
        for (double v : layer.B.data) b_norm += v * v;
    }
    CHECK(a_norm == 0.0);  // dA = (alpha/r) B^T dW with B = 0
    CHECK(b_norm > 0.0);
}

// -----------------------------------------------------------------------------
// Adam
// -----------------------------------------------------------------------------

TEST_CASE("adam leaves parameters alone under zero gradients") {
    Tensor<float> w({4});
    w.data = {1.0f, -2.0f, 0.5f, 3.0f};
    Tensor<float> g({4});
    g.fill(0.0f);
    AdamState st = make_adam_state({&w});
    std::vector<float> before = w.data;
    adam_step({&w}, {&g}, st, 1e-2);
    CHECK(w.data == before);
}

TEST_CASE("adam's first step is lr-sized and opposes the gradient") {
    Tensor<float> w({3});
    w.data = {0.0f, 1.0f, -1.0f};
    Tensor<float> g({3});
    g.data = {0.5f, -2.0f, 3.0f};
    AdamState st = make_adam_state({&w});
    double lr = 1e-3;
    adam_step({&w}, {&g}, st, lr);
    // With bias correction, step_0 = lr * g / (|g| + eps') ~= lr * sign(g).
    CHECK(w.data[0] == doctest::Approx(0.0 - lr).epsilon(1e-4));
    CHECK(w.data[1] == doctest::Approx(1.0 + lr).epsilon(1e-4));
    CHECK(w.data[2] == doctest::Approx(-1.0 - lr).epsilon(1e-4));
}

TEST_CASE("adam minimizes a quadratic") {
    Tensor<float> w({1});
    w.data = {5.0f};
    AdamState st = make_adam_state({&w});
    double worst_tail = 0;
    for (int i = 0; i < 6000; ++i) {
        Tensor<float> g({1});
        g.data = {2.0f * w.data[0]};
        adam_step({&w}, {&g}, st, 5e-3);
        if (i >= 5000) worst_tail = std::max(worst_tail, double(std::abs(w.data[0])));
    }
    // Adam settles into a small limit cycle around the optimum.
    CHECK(worst_tail < 5e-2);
}

// -----------------------------------------------------------------------------
// training loop behavior
// -----------------------------------------------------------------------------

namespace {

TrainConfig small_train_config(uint64_t seed, int steps) {
    TrainConfig tc;
    tc.batch_size = 4;
    tc.steps = steps;
    tc.lr = 2e-3;
    tc.seed = seed;
    tc.mode = TrainMode::Scratch;
    tc.net = micro_config();
    return tc;
}

std::vector<BatchItem<float>> small_dataset(uint64_t seed) { return micro_batch<float>(6, 8, seed); }

}  // namespace

TEST_CASE("training reduces the loss (median of three seeds)") {
    auto dataset = small_dataset(50);
    std::vector<double> first, last;
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        TrainResult r = train(small_train_config(seed, 150), dataset);
        REQUIRE(r.loss_history.size() == 150);
        double head = 0, tail = 0;
        for (int i = 0; i < 10; ++i) {
            head += r.loss_history[i];
            tail += r.loss_history[r.loss_history.size() - 1 - i];
        }
        first.push_back(head / 10);
        last.push_back(tail / 10);
    }
    std::sort(first.begin(), first.end());
    std::sort(last.begin(), last.end());
    CHECK(last[1] < first[1]);
}

TEST_CASE("training is deterministic in the seed") {
    auto dataset = small_dataset(60);
    TrainResult a = train(small_train_config(9, 12), dataset);
    TrainResult b = train(small_train_config(9, 12), dataset);
    CHECK(a.loss_history == b.loss_history);
    CHECK(param_checksum_bits(a.model) == param_checksum_bits(b.model));

    TrainResult c = train(small_train_config(10, 12), dataset);
    CHECK(param_checksum_bits(c.model) != param_checksum_bits(a.model));
}

TEST_CASE("lora training leaves base weights untouched; full training changes them") {
    auto dataset = small_dataset(70);
    Rng init(71);
    UNet<float> base = make_unet<float>(micro_config(), init);
    uint64_t base_sum = param_checksum_bits(base);

    TrainConfig lora_cfg = small_train_config(5, 8);
    lora_cfg.mode = TrainMode::Lora;
    lora_cfg.lora_rank = 2;
    TrainResult lora_res = train(lora_cfg, dataset, &base);
    CHECK(param_checksum_bits(lora_res.model) == base_sum);
    REQUIRE(lora_res.adapter.has_value());
    double b_norm = 0;
    for (const auto& layer : lora_res.adapter->layers)
        for (float v : layer.B.data) b_norm += double(v) * v;
    CHECK(b_norm > 0.0);

    TrainConfig full_cfg = small_train_config(5, 8);
    full_cfg.mode = TrainMode::Full;
    TrainResult full_res = train(full_cfg, dataset, &base);
    CHECK(param_checksum_bits(full_res.model) != base_sum);
    CHECK(!full_res.adapter.has_value());
}

TEST_CASE("resuming from a mid-run checkpoint reproduces the straight run bit-for-bit") {
    auto dataset = small_dataset(80);
    fs::path dir = fs::temp_directory_path() / "relight_test_resume";
    fs::remove_all(dir);
    fs::create_directories(dir);

    TrainConfig cfg = small_train_config(21, 10);
    cfg.out_dir = (dir / "straight").string();
    cfg.checkpoint_every = 5;
    TrainResult straight = train(cfg, dataset);

    TrainConfig cfg2 = cfg;
    cfg2.out_dir = (dir / "resumed").string();
    TrainResult resumed =
        train(cfg2, dataset, nullptr, (fs::path(cfg.out_dir) / "ckpt_000005.bin").string());

    CHECK(param_checksum_bits(resumed.model) == param_checksum_bits(straight.model));
    CHECK(resumed.loss_history.size() == 5);
    std::vector<double> straight_tail(straight.loss_history.end() - 5,
                                      straight.loss_history.end());
    CHECK(resumed.loss_history == straight_tail);
}

TEST_CASE("checkpoints round trip through disk") {
    auto dataset = small_dataset(90);
    fs::path dir = fs::temp_directory_path() / "relight_test_ckpt";
    fs::remove_all(dir);
    fs::create_directories(dir);

    TrainConfig cfg = small_train_config(31, 6);
    cfg.mode = TrainMode::Lora;
    cfg.lora_rank = 2;
    cfg.out_dir = dir.string();
    Rng init(32);
    UNet<float> base = make_unet<float>(micro_config(), init);
    TrainResult r = train(cfg, dataset, &base);
    REQUIRE(!r.checkpoint_path.empty());

    Checkpoint ck = load_checkpoint(r.checkpoint_path);
    CHECK(ck.step == 6);
    CHECK(param_checksum_bits(ck.model) == param_checksum_bits(r.model));
    REQUIRE(ck.adapter.has_value());
    REQUIRE(r.adapter.has_value());
    for (size_t i = 0; i < ck.adapter->layers.size(); ++i) {
        CHECK(ck.adapter->layers[i].A.data == r.adapter->layers[i].A.data);
        CHECK(ck.adapter->layers[i].B.data == r.adapter->layers[i].B.data);
    }
    TrainConfig echo = train_config_from_json(ck.config_json);
    CHECK(echo.seed == cfg.seed);
    CHECK(echo.mode == TrainMode::Lora);
    CHECK(echo.net.base == cfg.net.base);
}
