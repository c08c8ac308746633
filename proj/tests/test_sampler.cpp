// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "relight/image.hpp"
#include "relight/imageio.hpp"
#include "relight/sampler.hpp"
#include "relight/schedule.hpp"
#include "relight/unet.hpp"

using namespace relight;
namespace fs = std::filesystem;

namespace {

UNetConfig micro_config() {
    UNetConfig cfg;
    cfg.base = 8;
    return cfg;
}

Tensor<float> random_tensor(const std::vector<int>& shape, Rng& rng, double scale = 1.0) {
    Tensor<float> t(shape);
    for (auto& v : t.data) v = static_cast<float>(scale * rng.normal());
    return t;
}

Image constant_image(int w, int h, int c, double v) {
    Image img(w, h, c);
    img.data.assign(img.data.size(), v);
    return img;
}

Image gradient_image(int w, int h, double lo = 0.1, double hi = 0.9) {
    Image img(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) = lo + (hi - lo) * (x + y * w + c) / double(3 * w * h);
    return img;
}

}  // namespace

// -----------------------------------------------------------------------------
// timestep grid
// -----------------------------------------------------------------------------

TEST_CASE("ddim timesteps descend from T to 1") {
    auto ts = ddim_timesteps(200, 15);
    REQUIRE(ts.size() == 15);
    CHECK(ts.front() == 200);
    CHECK(ts.back() == 1);
    for (size_t i = 1; i < ts.size(); ++i) {
        CHECK(ts[i] < ts[i - 1]);
        CHECK(ts[i] >= 1);
    }
}

TEST_CASE("ddim timestep edge cases") {
    auto one = ddim_timesteps(200, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == 200);

    auto full = ddim_timesteps(200, 200);
    REQUIRE(full.size() == 200);
    for (int i = 0; i < 200; ++i) CHECK(full[i] == 200 - i);

    CHECK_THROWS(ddim_timesteps(200, 0));
    CHECK_THROWS(ddim_timesteps(200, 201));
}

// -----------------------------------------------------------------------------
// sampler core
// -----------------------------------------------------------------------------

TEST_CASE("a constant predictor is an exact fixed point of the sampler") {
    DiffusionSchedule s = DiffusionSchedule::make();
    Rng rng(5);
    Tensor<float> target = random_tensor({3, 8, 8}, rng, 0.4);
    DdimConfig cfg;
    cfg.steps = 15;
    cfg.seed = 9;
    Tensor<float> out = ddim_sample_with(
        s, target.shape, cfg, [&](const Tensor<float>&, int) { return target; });
    REQUIRE(out.same_shape(target));
    CHECK(out.data == target.data);  // the terminal step collapses onto x0_hat
}

TEST_CASE("the fixed point also holds with stochastic eta") {
    DiffusionSchedule s = DiffusionSchedule::make();
    Rng rng(6);
    Tensor<float> target = random_tensor({3, 8, 8}, rng, 0.4);
    DdimConfig cfg;
    cfg.steps = 10;
    cfg.eta = 1.0;
    cfg.seed = 10;
    Tensor<float> out = ddim_sample_with(
        s, target.shape, cfg, [&](const Tensor<float>&, int) { return target; });
    CHECK(out.data == target.data);  // no noise is injected into the final step
}

TEST_CASE("the sampler follows the deterministic update recurrence bit for bit") {
    DiffusionSchedule s = DiffusionSchedule::make();
    DdimConfig cfg;
    cfg.steps = 7;
    cfg.seed = 33;

    std::vector<Tensor<float>> seen_z;
    std::vector<int> seen_t;
    Rng pred_rng(44);
    Tensor<float> bias = random_tensor({3, 6, 6}, pred_rng, 0.2);
    auto predict = [&](const Tensor<float>& z, int t) {
        seen_z.push_back(z);
        seen_t.push_back(t);
        Tensor<float> p = z;
        for (size_t i = 0; i < p.size(); ++i)
            p.data[i] = 0.5f * p.data[i] + bias.data[i];
        return p;
    };
    Tensor<float> out = ddim_sample_with(s, {3, 6, 6}, cfg, predict);

    auto ts = ddim_timesteps(s.T, cfg.steps);
    REQUIRE(seen_t.size() == ts.size());
    for (size_t i = 0; i < ts.size(); ++i) CHECK(seen_t[i] == ts[i]);

    // Replay the update from the recorded states.
    for (size_t i = 0; i + 1 <= ts.size(); ++i) {
        int t = ts[i];
        int t_next = i + 1 < ts.size() ? ts[i + 1] : 0;
        double ab = s.alpha_bar[t];
        double ab_next = s.alpha_bar[t_next];
        double sa = std::sqrt(ab);
        double sn = std::sqrt(1.0 - ab);
        double dir = std::sqrt(std::max(0.0, 1.0 - ab_next));
        double sa_next = std::sqrt(ab_next);

        const Tensor<float>& z = seen_z[i];
        Tensor<float> x0 = z;
        for (size_t k = 0; k < x0.size(); ++k)
            x0.data[k] = 0.5f * x0.data[k] + bias.data[k];
        Tensor<float> z_next(z.shape);
        for (size_t k = 0; k < z.size(); ++k) {
            double eps_hat = (z.data[k] - sa * x0.data[k]) / sn;
            z_next.data[k] = static_cast<float>(sa_next * x0.data[k] + dir * eps_hat);
        }
        const Tensor<float>& expect = i + 1 < ts.size() ? seen_z[i + 1] : out;
        CHECK(z_next.data == expect.data);
    }
}

TEST_CASE("sampling is deterministic in the seed and sensitive to it") {
    DiffusionSchedule s = DiffusionSchedule::make();
    auto predict = [](const Tensor<float>& z, int) {
        Tensor<float> p = z;
        for (auto& v : p.data) v *= 0.3f;
        return p;
    };
    DdimConfig cfg;
    cfg.steps = 8;
    cfg.seed = 1;
    Tensor<float> a = ddim_sample_with(s, {3, 8, 8}, cfg, predict);
    Tensor<float> b = ddim_sample_with(s, {3, 8, 8}, cfg, predict);
    CHECK(a.data == b.data);

    cfg.seed = 2;
    Tensor<float> c = ddim_sample_with(s, {3, 8, 8}, cfg, predict);
    CHECK(a.data != c.data);
}

TEST_CASE("eta outside [0,1] and shape-changing predictors are rejected") {
    DiffusionSchedule s = DiffusionSchedule::make();
    DdimConfig cfg;
    cfg.eta = -0.5;
    CHECK_THROWS(ddim_sample_with(s, {3, 4, 4}, cfg,
                                  [](const Tensor<float>& z, int) { return z; }));
    DdimConfig bad;
    CHECK_THROWS(ddim_sample_with(s, {3, 4, 4}, bad, [](const Tensor<float>&, int) {
        return Tensor<float>({3, 2, 2});
    }));
}

TEST_CASE("network-driven sampling produces finite, deterministic output") {
    Rng init(3);
    UNet<float> net = make_unet<float>(micro_config(), init);
    DiffusionSchedule s = DiffusionSchedule::make();
    Rng data_rng(4);
    Tensor<float> g = random_tensor({3, 8, 8}, data_rng, 0.3);
    Tensor<float> cenv = random_tensor({3, 8, 8}, data_rng, 0.3);
    DdimConfig cfg;
    cfg.steps = 5;
    cfg.seed = 7;
    Tensor<float> a = ddim_sample(net, s, g, cenv, cfg);
    Tensor<float> b = ddim_sample(net, s, g, cenv, cfg);
    REQUIRE(a.shape == g.shape);
    for (float v : a.data) CHECK(std::isfinite(v));
    CHECK(a.data == b.data);
}

// -----------------------------------------------------------------------------
// env conditioning and single-frame pipeline
// -----------------------------------------------------------------------------

TEST_CASE("env conditioning image is tonemapped into [0,1) and tracks the camera") {
    EnvironmentMap env = make_olat(Vec3{1, 0, 0}, 0.4, Rgb{40, 40, 40}, 16);
    CameraPose cam_a = CameraPose::look_at(Vec3{3, 0, 0}, Vec3{0, 0, 0}, 24.0, 16, 16);
    CameraPose cam_b = CameraPose::look_at(Vec3{-3, 0, 0}, Vec3{0, 0, 0}, 24.0, 16, 16);

    Image ia = env_conditioning_image(env, cam_a, 16, 16);
    REQUIRE(ia.width == 16);
    REQUIRE(ia.height == 16);
    REQUIRE(ia.channels == 3);
    double total = 0;
    for (double v : ia.data) {
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        total += v;
    }
    CHECK(total > 0.0);

    Image ib = env_conditioning_image(env, cam_b, 16, 16);
    double diff = 0;
    for (size_t i = 0; i < ia.data.size(); ++i) diff += std::abs(ia.data[i] - ib.data[i]);
    CHECK(diff > 1.0);
}

TEST_CASE("relight_frame returns a clamped RGB image of the input size") {
    Rng init(8);
    UNet<float> net = make_unet<float>(micro_config(), init);
    DiffusionSchedule s = DiffusionSchedule::make();
    Image flat = gradient_image(8, 8);
    EnvironmentMap env = make_uniform(Rgb{1, 1, 1}, 8);
    CameraPose cam = CameraPose::look_at(Vec3{0, -3, 0}, Vec3{0, 0, 0}, 12.0, 8, 8);
    DdimConfig cfg;
    cfg.steps = 4;
    cfg.seed = 2;

    Image out = relight_frame(net, s, flat, env, cam, cfg);
    REQUIRE(out.width == 8);
    REQUIRE(out.height == 8);
    REQUIRE(out.channels == 3);
    for (double v : out.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    Image again = relight_frame(net, s, flat, env, cam, cfg);
    CHECK(out.data == again.data);
}

// -----------------------------------------------------------------------------
// blending and chunk plan
// -----------------------------------------------------------------------------

TEST_CASE("linear blend with zero overlap concatenates") {
    std::vector<Image> a = {constant_image(2, 2, 1, 0.1), constant_image(2, 2, 1, 0.2)};
    std::vector<Image> b = {constant_image(2, 2, 1, 0.7)};
    auto out = linear_blend(a, b, 0);
    REQUIRE(out.size() == 3);
    CHECK(out[0].data[0] == 0.1);
    CHECK(out[1].data[0] == 0.2);
    CHECK(out[2].data[0] == 0.7);
}

TEST_CASE("linear blend ramps weights across the overlap") {
    std::vector<Image> a = {constant_image(2, 2, 1, 0.0), constant_image(2, 2, 1, 0.0),
                            constant_image(2, 2, 1, 0.0)};
    std::vector<Image> b = {constant_image(2, 2, 1, 1.0), constant_image(2, 2, 1, 1.0),
                            constant_image(2, 2, 1, 1.0)};
    auto out = linear_blend(a, b, 2);
    REQUIRE(out.size() == 4);
    CHECK(out[0].data[0] == doctest::Approx(0.0));
    CHECK(out[1].data[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(out[2].data[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(out[3].data[0] == doctest::Approx(1.0));
}

TEST_CASE("blending equal chunks is an exact identity") {
    // Partition of unity: w*x + (1-w)*x must reproduce x bit for bit.
    Image frame = gradient_image(4, 4);
    std::vector<Image> a = {frame, frame, frame};
    std::vector<Image> b = {frame, frame, frame};
    auto out = linear_blend(a, b, 3);
    REQUIRE(out.size() == 3);
    for (const auto& f : out) CHECK(f.data == frame.data);
}

TEST_CASE("linear blend rejects bad inputs") {
    std::vector<Image> a = {constant_image(2, 2, 1, 0.0)};
    std::vector<Image> b = {constant_image(3, 2, 1, 1.0)};
    CHECK_THROWS(linear_blend(a, b, 1));  // shape mismatch
    std::vector<Image> c = {constant_image(2, 2, 1, 1.0)};
    CHECK_THROWS(linear_blend(a, c, 2));  // overlap exceeds chunk
}

TEST_CASE("chunk plans cover the frame range exactly") {
    for (int total : {1, 2, 5, 8, 9, 10, 13, 14, 23, 40, 100}) {
        ChunkPlan plan;
        plan.chunk_len = 9;
        plan.overlap = 4;
        plan.total_frames = total;
        auto chunks = plan_chunks(plan);
        REQUIRE(!chunks.empty());
        CHECK(chunks.front().first == 0);
        CHECK(chunks.back().second == total);
        int expect_len = std::min(9, total);
        std::vector<int> covered(total, 0);
        int prev_start = -1;
        for (auto [s, e] : chunks) {
            CHECK(e - s == expect_len);
            CHECK(s >= 0);
            CHECK(e <= total);
            CHECK(s > prev_start);
            prev_start = s;
            for (int i = s; i < e; ++i) covered[i] = 1;
        }
        for (int i = 0; i < total; ++i) CHECK(covered[i] == 1);
        // Interior strides are chunk_len - overlap.
        for (size_t i = 1; i + 1 < chunks.size(); ++i)
            CHECK(chunks[i].first - chunks[i - 1].first == 5);
    }
}

TEST_CASE("chunk plan rejects degenerate configs") {
    ChunkPlan bad;
    bad.total_frames = 0;
    CHECK_THROWS(plan_chunks(bad));
    ChunkPlan bad2;
    bad2.chunk_len = 4;
    bad2.overlap = 4;
    bad2.total_frames = 10;
    CHECK_THROWS(plan_chunks(bad2));
}

// -----------------------------------------------------------------------------
// chunked video
// -----------------------------------------------------------------------------

TEST_CASE("identical chunks merge into a bit-exact constant video") {
    Rng init(21);
    UNet<float> net = make_unet<float>(micro_config(), init);
    DiffusionSchedule s = DiffusionSchedule::make();
    Image flat = gradient_image(8, 8);
    EnvironmentMap env = make_uniform(Rgb{0.8, 0.9, 1.0}, 8);
    CameraPose cam = CameraPose::look_at(Vec3{0, -3, 0}, Vec3{0, 0, 0}, 12.0, 8, 8);

    ChunkPlan plan;
    plan.chunk_len = 5;
    plan.overlap = 2;
    plan.total_frames = 11;
    auto chunks = plan_chunks(plan);

    std::vector<Image> flats(11, flat);
    std::vector<const EnvironmentMap*> envs(11, &env);
    std::vector<uint64_t> seeds(chunks.size(), 77);  // same seed for every chunk

    DdimConfig cfg;
    cfg.steps = 4;
    auto frames = long_video(net, s, flats, envs, cam, plan, seeds, cfg);
    REQUIRE(frames.size() == 11);

    DdimConfig one = cfg;
    one.seed = 77;
    Image ref = relight_frame(net, s, flat, env, cam, one);
    for (const auto& f : frames) CHECK(f.data == ref.data);
}

TEST_CASE("long video validates seed and frame counts") {
    Rng init(22);
    UNet<float> net = make_unet<float>(micro_config(), init);
    DiffusionSchedule s = DiffusionSchedule::make();
    Image flat = constant_image(8, 8, 3, 0.5);
    EnvironmentMap env = make_uniform(Rgb{1, 1, 1}, 8);
    CameraPose cam = CameraPose::look_at(Vec3{0, -3, 0}, Vec3{0, 0, 0}, 12.0, 8, 8);
    ChunkPlan plan;
    plan.chunk_len = 4;
    plan.overlap = 1;
    plan.total_frames = 6;
    std::vector<Image> flats(6, flat);
    std::vector<const EnvironmentMap*> envs(6, &env);
    DdimConfig cfg;
    cfg.steps = 2;

    CHECK_THROWS(long_video(net, s, flats, envs, cam, plan, {1}, cfg));  // wrong seed count
    std::vector<const EnvironmentMap*> short_envs(5, &env);
    auto n_seeds = plan_chunks(plan).size();
    CHECK_THROWS(long_video(net, s, flats, short_envs, cam, plan,
                            std::vector<uint64_t>(n_seeds, 1), cfg));
}

TEST_CASE("differing chunk seeds still agree outside the blend region") {
    Rng init(23);
    UNet<float> net = make_unet<float>(micro_config(), init);
    DiffusionSchedule s = DiffusionSchedule::make();
    Image flat = gradient_image(8, 8);
    EnvironmentMap env = make_uniform(Rgb{1, 1, 1}, 8);
    CameraPose cam = CameraPose::look_at(Vec3{0, -3, 0}, Vec3{0, 0, 0}, 12.0, 8, 8);

    ChunkPlan plan;
    plan.chunk_len = 5;
    plan.overlap = 2;
    plan.total_frames = 8;
    auto chunks = plan_chunks(plan);
    REQUIRE(chunks.size() == 2);  // [0,5) and [3,8)

    std::vector<Image> flats(8, flat);
    std::vector<const EnvironmentMap*> envs(8, &env);
    DdimConfig cfg;
    cfg.steps = 3;
    auto frames = long_video(net, s, flats, envs, cam, plan, {101, 202}, cfg);

    DdimConfig c1 = cfg;
    c1.seed = 101;
    Image f1 = relight_frame(net, s, flat, env, cam, c1);
    DdimConfig c2 = cfg;
    c2.seed = 202;
    Image f2 = relight_frame(net, s, flat, env, cam, c2);

    for (int i = 0; i < 3; ++i) CHECK(frames[i].data == f1.data);   // before overlap
    for (int i = 5; i < 8; ++i) CHECK(frames[i].data == f2.data);   // after overlap
    double w = 1.0 / 3.0;
    for (int i = 3; i < 5; ++i, w += 1.0 / 3.0)
        for (size_t k = 0; k < f1.data.size(); ++k)
            CHECK(frames[i].data[k] ==
                  doctest::Approx(f1.data[k] + w * (f2.data[k] - f1.data[k])).epsilon(1e-12));
}

// -----------------------------------------------------------------------------
// consistency report
// -----------------------------------------------------------------------------

TEST_CASE("consistency report is zero for identical outputs") {
    Image a = gradient_image(6, 6);
    ConsistencyReport rep = consistency_report({a, a, a}, nullptr);
    CHECK(rep.mean_std <= 1e-12);
    for (double v : rep.std_map.data) CHECK(v <= 1e-12);
}

TEST_CASE("consistency report measures per-pixel spread") {
    Image a = constant_image(4, 4, 3, 0.0);
    Image b = constant_image(4, 4, 3, 1.0);
    ConsistencyReport rep = consistency_report({a, b}, nullptr);
    CHECK(rep.mean_std == doctest::Approx(0.5).epsilon(1e-12));

    // Restrict to a mask where the outputs agree.
    Image c = b;
    for (int y = 0; y < 4; ++y)
        for (int x = 2; x < 4; ++x)
            for (int ch = 0; ch < 3; ++ch) c.at(x, y, ch) = 0.0;
    Image mask(4, 4, 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 2; x < 4; ++x) mask.at(x, y, 0) = 1.0;
    ConsistencyReport masked = consistency_report({a, c}, &mask);
    CHECK(masked.mean_std == 0.0);
    ConsistencyReport global = consistency_report({a, c}, nullptr);
    CHECK(global.mean_std > 0.1);
}

TEST_CASE("consistency report rejects bad inputs") {
    Image a = constant_image(4, 4, 3, 0.0);
    CHECK_THROWS(consistency_report({a}, nullptr));
    Image b = constant_image(5, 4, 3, 0.0);
    CHECK_THROWS(consistency_report({a, b}, nullptr));
}

// -----------------------------------------------------------------------------
// video persistence
// -----------------------------------------------------------------------------

TEST_CASE("videos round trip through disk at 8-bit precision") {
    fs::path dir = fs::temp_directory_path() / "relight_test_video";
    fs::remove_all(dir);

    std::vector<Image> frames = {gradient_image(6, 4), gradient_image(6, 4, 0.3, 0.6),
                                 constant_image(6, 4, 3, 0.25)};
    ChunkPlan plan;
    plan.chunk_len = 2;
    plan.overlap = 1;
    plan.total_frames = 3;
    write_video(dir.string(), frames, 12.0, plan, {5, 6});

    auto loaded = read_video(dir.string());
    REQUIRE(loaded.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        REQUIRE(loaded[i].same_shape(frames[i]));
        bool all_match = true;
        for (size_t k = 0; k < frames[i].data.size(); ++k)
            all_match = all_match &&
                        loaded[i].data[k] == dequantize8(quantize8(frames[i].data[k]));
        CHECK(all_match);
    }

    auto meta = nlohmann::json::parse(read_file_bytes((dir / "video.json").string()));
    CHECK(meta.at("fps").get<double>() == 12.0);
    CHECK(meta.at("frame_count").get<size_t>() == 3);
    CHECK(meta.at("plan").at("chunk_len").get<int>() == 2);
    CHECK(meta.at("seeds").get<std::vector<uint64_t>>() == std::vector<uint64_t>({5, 6}));
}
