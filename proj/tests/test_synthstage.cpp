// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "relight/synthstage.hpp"

using namespace relight;

namespace {

// Single unit-albedo diffuse sphere at the origin; no motion, no background.
SceneSpec furnace_scene() {
    SceneSpec scene;
    scene.subject_id = 0;
    scene.complexity = 1;
    scene.background = {0.0, 0.0, 0.0};
    SphereSpec s;
    s.base_center = {0, 0, 0};
    s.radius = 0.6;
    s.motion_amp_unit = {0, 0, 0};
    s.motion_freq = {1, 1, 1};
    s.motion_phase = {0, 0, 0};
    s.spin_axis = {0, 0, 1};
    s.spin_rate = 0;
    s.albedo.assign(kAlbedoTexSize * kAlbedoTexSize * 3, 1.0);
    s.specular = 0.0;
    s.shininess = 8.0;
    scene.spheres.push_back(s);
    return scene;
}

double mean_hdr_over_mask(const RelitRenderResult& r) {
    double sum = 0;
    size_t n = 0;
    for (int y = 0; y < r.hdr.height; ++y)
        for (int x = 0; x < r.hdr.width; ++x)
            if (r.mask.at(x, y, 0) > 0.5)
                for (int c = 0; c < 3; ++c) {
                    sum += r.hdr.at(x, y, c);
                    ++n;
                }
    REQUIRE(n > 0);
    return sum / static_cast<double>(n);
}

}  // namespace

TEST_CASE("white furnace: unit albedo under a unit uniform environment") {
    SceneSpec scene = furnace_scene();
    MotionState motion = motion_at(scene, 0.0);
    CameraPose cam = make_ring_cameras(1, 48)[0];
    EnvironmentMap env = make_uniform({1, 1, 1}, 64);
    RelitRenderResult r = render_relit(scene, motion, cam, env);
    // A convex diffuse surface with rho=1 under uniform radiance 1 reflects 1.
    double max_err = 0;
    for (int y = 0; y < r.hdr.height; ++y)
        for (int x = 0; x < r.hdr.width; ++x)
            if (r.mask.at(x, y, 0) > 0.5)
                for (int c = 0; c < 3; ++c)
                    max_err = std::max(max_err, std::abs(r.hdr.at(x, y, c) - 1.0));
    CHECK(max_err < 1e-2);
}

TEST_CASE("relit radiance scales linearly with the environment") {
    SceneSpec scene = furnace_scene();
    scene.spheres[0].specular = 0.3;
    MotionState motion = motion_at(scene, 0.0);
    CameraPose cam = make_ring_cameras(1, 32)[0];
    EnvironmentMap env = make_olat(Vec3{0.5, 0.3, 0.8}.normalized(), 0.4, {2, 2, 2}, 32);
    EnvironmentMap env3 = env;
    for (auto& v : env3.data) v *= 3.0f;

    RelitRenderResult a = render_relit(scene, motion, cam, env);
    RelitRenderResult b = render_relit(scene, motion, cam, env3);
    for (int y = 0; y < a.hdr.height; ++y)
        for (int x = 0; x < a.hdr.width; ++x)
            if (a.mask.at(x, y, 0) > 0.5)
                for (int c = 0; c < 3; ++c)
                    CHECK(b.hdr.at(x, y, c) ==
                          doctest::Approx(3.0 * a.hdr.at(x, y, c)).epsilon(1e-9));
}

TEST_CASE("a side light leaves the far side of the sphere dark") {
    SceneSpec scene = furnace_scene();
    MotionState motion = motion_at(scene, 0.0);
    // Camera on +x axis; light from +y. In image space +y maps to one side.
    CameraPose cam = make_ring_cameras(1, 64)[0];
    EnvironmentMap env = make_olat({0, 1, 0}, 0.25, {10, 10, 10}, 32);
    RelitRenderResult r = render_relit(scene, motion, cam, env);
    double left = 0, right = 0;
    int nl = 0, nr = 0;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            if (r.mask.at(x, y, 0) > 0.5) {
                if (x < 28) {
                    left += r.hdr.at(x, y, 0);
                    ++nl;
                } else if (x > 36) {
                    right += r.hdr.at(x, y, 0);
                    ++nr;
                }
            }
    REQUIRE(nl > 0);
    REQUIRE(nr > 0);
    left /= nl;
    right /= nr;
    // One side must be much brighter than the other.
    CHECK(std::max(left, right) > 5.0 * std::min(left, right));
}

TEST_CASE("a second sphere casts a shadow") {
    SceneSpec scene = furnace_scene();
    SphereSpec blocker = scene.spheres[0];
    // Big enough that its umbra covers the whole visible upper hemisphere of
    // the lower sphere for a narrow light around +z.
    blocker.base_center = {0, 0, 1.6};
    blocker.radius = 0.9;
    scene.spheres.push_back(blocker);

    MotionState motion = motion_at(scene, 0.0);
    CameraPose cam = make_ring_cameras(1, 64)[0];
    EnvironmentMap env = make_olat({0, 0, 1}, 0.2, {10, 10, 10}, 32);

    RelitRenderResult with_blocker = render_relit(scene, motion, cam, env);
    SceneSpec solo = furnace_scene();
    RelitRenderResult without = render_relit(solo, motion_at(solo, 0.0), cam, env);

    double lit = 0, shadowed = 0;
    size_t n = 0;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            if (without.mask.at(x, y, 0) > 0.5) {
                lit += without.hdr.at(x, y, 0);
                shadowed += with_blocker.hdr.at(x, y, 0);
                ++n;
            }
    REQUIRE(n > 0);
    CHECK(lit / n > 0.02);
    CHECK(shadowed < 0.02 * lit);
}

TEST_CASE("flat render shows albedo without shading") {
    SceneSpec scene = furnace_scene();
    MotionState motion = motion_at(scene, 0.0);
    CameraPose cam = make_ring_cameras(1, 32)[0];
    RenderResult flat = render_flat(scene, motion, cam);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            if (flat.mask.at(x, y, 0) > 0.5)
                CHECK(flat.rgb.at(x, y, 0) == doctest::Approx(1.0));
}

TEST_CASE("make_subject is deterministic and scales with complexity") {
    SceneSpec a = make_subject(77, 2);
    SceneSpec b = make_subject(77, 2);
    REQUIRE(a.spheres.size() == b.spheres.size());
    for (size_t i = 0; i < a.spheres.size(); ++i) {
        CHECK(a.spheres[i].base_center.x == b.spheres[i].base_center.x);
        CHECK(a.spheres[i].radius == b.spheres[i].radius);
        CHECK(a.spheres[i].albedo == b.spheres[i].albedo);
    }
    CHECK(make_subject(1, 1).spheres.size() == 2);
    CHECK(make_subject(1, 2).spheres.size() == 3);
    CHECK(make_subject(1, 3).spheres.size() == 5);
    CHECK(make_subject(1, 4).spheres.size() == 8);
    CHECK(make_subject(78, 2).spheres[0].base_center.x != a.spheres[0].base_center.x);
}

TEST_CASE("subject spheres stay inside the camera ring working volume") {
    for (uint64_t id : {1ull, 2ull, 3ull, 99ull}) {
        SceneSpec scene = make_subject(id, 4);
        for (const auto& s : scene.spheres) {
            CHECK(s.base_center.norm() + s.radius < 0.95);
            CHECK(s.radius > 0.0);
        }
        // No initial interpenetration.
        for (size_t i = 0; i < scene.spheres.size(); ++i)
            for (size_t j = i + 1; j < scene.spheres.size(); ++j) {
                double d = (scene.spheres[i].base_center - scene.spheres[j].base_center).norm();
                CHECK(d >= 0.99 * (scene.spheres[i].radius + scene.spheres[j].radius));
            }
    }
}

TEST_CASE("motion displaces centers smoothly and stays bounded") {
    SceneSpec scene = make_subject(5, 2);
    MotionState m0 = motion_at(scene, 0.0, 0.01);
    MotionState m1 = motion_at(scene, 1.0, 0.01);
    double step = 0;
    for (size_t i = 0; i < m0.centers.size(); ++i)
        step = std::max(step, (m1.centers[i] - m0.centers[i]).norm());
    CHECK(step > 0.0);
    CHECK(step < 0.05);

    // Offsets are bounded by a_motion * amp / freq <= a_motion / min_freq.
    for (double t : {0.0, 13.0, 250.0}) {
        MotionState mt = motion_at(scene, t, 0.01);
        for (size_t i = 0; i < mt.centers.size(); ++i) {
            double off = (mt.centers[i] - scene.spheres[i].base_center).norm();
            CHECK(off <= mt.max_offset + 1e-12);
        }
    }
}

TEST_CASE("capture produces pairs * cameras frames in t-major order") {
    SceneSpec scene = make_subject(9, 1);
    CaptureConfig cc;
    cc.n_pairs = 3;
    cc.n_cameras = 2;
    cc.image_size = 16;
    cc.env_height = 8;
    cc.n_lights = 4;
    cc.seed = 5;
    CaptureSet cap = make_capture(scene, cc);
    REQUIRE(cap.pairs.size() == 6);
    REQUIRE(cap.cameras.size() == 2);
    REQUIRE(cap.lights.maps.size() == 4);
    REQUIRE(cap.light_ids.size() == 3);
    for (int t = 0; t < 3; ++t)
        for (int cam = 0; cam < 2; ++cam) {
            const FramePair& p = cap.pairs[t * 2 + cam];
            CHECK(p.t == t);
            CHECK(p.camera_id == cam);
            CHECK(p.light_id == cap.light_ids[t]);
            CHECK(p.flat.width == 16);
            CHECK(p.mask.channels == 1);
        }
}

TEST_CASE("captures are bit-identical across reruns") {
    SceneSpec scene = make_subject(10, 1);
    CaptureConfig cc;
    cc.n_pairs = 2;
    cc.n_cameras = 1;
    cc.image_size = 16;
    cc.env_height = 8;
    cc.n_lights = 3;
    cc.seed = 77;
    CaptureSet a = make_capture(scene, cc);
    CaptureSet b = make_capture(scene, cc);
    REQUIRE(a.pairs.size() == b.pairs.size());
    for (size_t i = 0; i < a.pairs.size(); ++i) {
        CHECK(a.pairs[i].flat.data == b.pairs[i].flat.data);
        CHECK(a.pairs[i].relit.data == b.pairs[i].relit.data);
        CHECK(a.pairs[i].mask.data == b.pairs[i].mask.data);
    }
}

TEST_CASE("light pool size, normalization, and frame") {
    LightPool pool = make_light_pool(10, 16, 3);
    REQUIRE(pool.maps.size() == 10);
    for (const auto& env : pool.maps) {
        CHECK(env.height == 16);
        env.validate();
        float peak = 0;
        for (float v : env.data) peak = std::max(peak, v);
        CHECK(peak > 0.0f);
    }
}

TEST_CASE("misalignment shifts the relit frame against the flat frame") {
    SceneSpec scene = make_subject(11, 1);
    CaptureConfig aligned;
    aligned.n_pairs = 8;
    aligned.n_cameras = 1;
    aligned.image_size = 32;
    aligned.env_height = 8;
    aligned.n_lights = 2;
    aligned.seed = 4;
    aligned.a_motion = 0.05;
    CaptureConfig shifted = aligned;
    shifted.misalignment_px = 8.0;

    CaptureSet ca = make_capture(scene, aligned);
    CaptureSet cs = make_capture(scene, shifted);
    double da = 0, ds = 0;
    int na = 0, ns = 0;
    for (size_t i = 0; i < ca.pairs.size(); ++i) {
        Centroid f = mask_centroid(ca.pairs[i].mask);
        Centroid r = mask_centroid(ca.pairs[i].relit_mask);
        if (f.count && r.count) {
            da += std::hypot(f.x - r.x, f.y - r.y);
            ++na;
        }
        Centroid fs = mask_centroid(cs.pairs[i].mask);
        Centroid rs = mask_centroid(cs.pairs[i].relit_mask);
        if (fs.count && rs.count) {
            ds += std::hypot(fs.x - rs.x, fs.y - rs.y);
            ++ns;
        }
    }
    REQUIRE(na > 0);
    REQUIRE(ns > 0);
    da /= na;
    ds /= ns;
    CHECK(da < 0.5);       // aligned: same instant, identical geometry
    CHECK(ds > 2.0 * da);  // misaligned: temporal offset displaces the subject
    CHECK(ds > 1.0);
}

TEST_CASE("degrade level 0 is the identity and quality falls with level") {
    SceneSpec scene = furnace_scene();
    MotionState motion = motion_at(scene, 0.0);
    CameraPose cam = make_ring_cameras(1, 32)[0];
    RenderResult flat = render_flat(scene, motion, cam);

    Image d0 = degrade(flat.rgb, 0.0);
    CHECK(d0.data == flat.rgb.data);

    Image d1 = degrade(flat.rgb, 0.3, 9);
    Image d2 = degrade(flat.rgb, 1.0, 9);
    double e1 = 0, e2 = 0;
    for (size_t i = 0; i < d1.data.size(); ++i) {
        e1 += std::abs(d1.data[i] - flat.rgb.data[i]);
        e2 += std::abs(d2.data[i] - flat.rgb.data[i]);
    }
    CHECK(e1 > 0.0);
    CHECK(e2 > e1);
    for (double v : d2.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("estimate_pixels_per_frame grows with motion amplitude") {
    SceneSpec scene = make_subject(12, 2);
    CameraPose cam = make_ring_cameras(1, 64)[0];
    double slow = estimate_pixels_per_frame(scene, cam, 0.01, 16);
    double fast = estimate_pixels_per_frame(scene, cam, 0.08, 16);
    CHECK(slow >= 0.05);
    CHECK(fast > slow);
}
