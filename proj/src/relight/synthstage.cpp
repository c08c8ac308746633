// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#include "relight/synthstage.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace relight {
namespace {

constexpr double kPlacementClearance = 0.02;
constexpr double kMotionHeadroom = 0.015;  // placement margin assumes up to this a_motion

double powi(double base, int exp) {
    double r = 1.0;
    double b = base;
    while (exp > 0) {
        if (exp & 1) r *= b;
        b *= b;
        exp >>= 1;
    }
    return r;
}

Vec3 random_unit(Rng& rng) {
    for (;;) {
        Vec3 v{rng.normal(), rng.normal(), rng.normal()};
        double n = std::sqrt(v.dot(v));
        if (n > 1e-6) return v * (1.0 / n);
    }
}

std::vector<double> make_texture(Rng& rng, int complexity) {
    std::vector<double> tex(kAlbedoTexSize * kAlbedoTexSize * 3);
    int max_freq = complexity + 1;
    for (int c = 0; c < 3; ++c) {
        double dc = rng.uniform(0.35, 0.65);
        struct Wave {
            double fu, fv, amp, phase;
        };
        std::array<Wave, 3> waves;
        for (auto& w : waves) {
            w.fu = static_cast<double>(rng.uniform_int(0, max_freq));
            w.fv = static_cast<double>(rng.uniform_int(0, max_freq));
            w.amp = rng.uniform(0.08, 0.22);
            w.phase = rng.uniform(0.0, 2.0 * kPi);
        }
        for (int tv = 0; tv < kAlbedoTexSize; ++tv) {
            for (int tu = 0; tu < kAlbedoTexSize; ++tu) {
                double u = (tu + 0.5) / kAlbedoTexSize;
                double v = (tv + 0.5) / kAlbedoTexSize;
                double val = dc;
                for (const auto& w : waves)
                    val += w.amp * std::sin(2.0 * kPi * (w.fu * u + w.fv * v) + w.phase);
                tex[(static_cast<size_t>(tv) * kAlbedoTexSize + tu) * 3 + c] =
                    std::clamp(val, 0.02, 0.98);
            }
        }
    }
    return tex;
}

double max_offset_bound(const SphereSpec& s, double a_motion) {
    Vec3 m{a_motion * s.motion_amp_unit.x / s.motion_freq.x,
           a_motion * s.motion_amp_unit.y / s.motion_freq.y,
           a_motion * s.motion_amp_unit.z / s.motion_freq.z};
    return std::sqrt(m.dot(m));
}

struct Hit {
    int sphere = -1;
    double t = 0;
};

Hit trace(const std::vector<Vec3>& centers, const std::vector<const SphereSpec*>& spheres,
          const Vec3& origin, const Vec3& dir) {
    Hit best;
    double best_t = 1e30;
    for (size_t i = 0; i < centers.size(); ++i) {
        Vec3 oc = origin - centers[i];
        double b = dir.dot(oc);
        double c0 = oc.dot(oc) - spheres[i]->radius * spheres[i]->radius;
        double disc = b * b - c0;
        if (disc < 0) continue;
        double t = -b - std::sqrt(disc);
        if (t > 1e-6 && t < best_t) {
            best_t = t;
            best = {static_cast<int>(i), t};
        }
    }
    return best;
}

Vec3 texture_at_normal(const SphereSpec& sphere, const Mat3& rotation, const Vec3& n) {
    Vec3 local = rotation.transposed() * n;
    double phi = std::atan2(local.y, local.x);
    double theta = std::acos(std::clamp(local.z, -1.0, 1.0));
    int tu = std::clamp(static_cast<int>(std::floor((phi / (2.0 * kPi) + 0.5) * kAlbedoTexSize)),
                        0, kAlbedoTexSize - 1);
    int tv = std::clamp(static_cast<int>(std::floor(theta / kPi * kAlbedoTexSize)), 0,
                        kAlbedoTexSize - 1);
    return sphere.albedo_texel(tu, tv);
}

struct LightTexel {
    Vec3 dir;
    Vec3 weighted;  // radiance * solid angle
};

}  // namespace

SceneSpec make_subject(uint64_t subject_id, int complexity) {
    complexity = std::clamp(complexity, 1, 4);
    static constexpr int kCounts[] = {2, 3, 5, 8};
    int n = kCounts[complexity - 1];

    Rng rng(derive_seed(subject_id, "subject"));
    SceneSpec scene;
    scene.subject_id = subject_id;
    scene.complexity = complexity;
    scene.background = {rng.uniform(0.08, 0.45), rng.uniform(0.08, 0.45),
                        rng.uniform(0.08, 0.45)};

    static constexpr double kRadiusLo[] = {0.17, 0.14, 0.11, 0.085};
    static constexpr double kRadiusHi[] = {0.26, 0.21, 0.17, 0.13};
    static constexpr int kShinySet[] = {8, 12, 16, 24, 32, 48, 64};
    // Cap the placement box so corner spheres stay inside the ring cameras'
    // 0.95 framing radius at every complexity.
    double box = std::min(0.28 + 0.055 * n, 0.40);

    scene.spheres.resize(n);
    for (auto& s : scene.spheres) {
        s.radius = rng.uniform(kRadiusLo[complexity - 1], kRadiusHi[complexity - 1]);
        s.motion_amp_unit = {rng.uniform(0.4, 1.0), rng.uniform(0.4, 1.0), rng.uniform(0.4, 1.0)};
        s.motion_freq = {rng.uniform(0.15, 0.3), rng.uniform(0.15, 0.3), rng.uniform(0.15, 0.3)};
        s.motion_phase = {rng.uniform(0.0, 2.0 * kPi), rng.uniform(0.0, 2.0 * kPi),
                          rng.uniform(0.0, 2.0 * kPi)};
        s.spin_axis = random_unit(rng);
        s.spin_rate = rng.uniform(0.05, 0.2);
        s.albedo = make_texture(rng, complexity);
        s.specular = rng.uniform(0.2, 0.9);
        s.shininess = kShinySet[rng.uniform_index(std::size(kShinySet))];
    }

    // Rejection placement; shrink radii if the box gets too crowded.
    double shrink = 1.0;
    for (int round = 0; round < 64; ++round) {
        std::vector<Vec3> placed;
        bool ok = true;
        for (int i = 0; i < n && ok; ++i) {
            auto& s = scene.spheres[i];
            double ri = s.radius * shrink;
            double mi = max_offset_bound(s, kMotionHeadroom);
            bool found = false;
            for (int attempt = 0; attempt < 600; ++attempt) {
                Vec3 c{rng.uniform(-box, box), rng.uniform(-box, box), rng.uniform(-box, box)};
                bool clear = true;
                for (int j = 0; j < i; ++j) {
                    const auto& o = scene.spheres[j];
                    double need = ri + o.radius * shrink + mi +
                                  max_offset_bound(o, kMotionHeadroom) + kPlacementClearance;
                    Vec3 d = c - placed[j];
                    if (d.dot(d) < need * need) {
                        clear = false;
                        break;
                    }
                }
                if (clear) {
                    placed.push_back(c);
                    found = true;
                    break;
                }
            }
            ok = found;
        }
        if (ok) {
            for (int i = 0; i < n; ++i) {
                scene.spheres[i].base_center = placed[i];
                scene.spheres[i].radius *= shrink;
            }
            return scene;
        }
        shrink *= 0.93;
    }
    throw std::runtime_error("make_subject: sphere placement failed");
}

MotionState motion_at(const SceneSpec& scene, double t, double a_motion) {
    MotionState m;
    m.t = t;
    m.centers.reserve(scene.spheres.size());
    m.rotations.reserve(scene.spheres.size());
    for (const auto& s : scene.spheres) {
        Vec3 off{
            a_motion * s.motion_amp_unit.x / s.motion_freq.x *
                std::sin(s.motion_freq.x * t + s.motion_phase.x),
            a_motion * s.motion_amp_unit.y / s.motion_freq.y *
                std::sin(s.motion_freq.y * t + s.motion_phase.y),
            a_motion * s.motion_amp_unit.z / s.motion_freq.z *
                std::sin(s.motion_freq.z * t + s.motion_phase.z),
        };
        m.centers.push_back(s.base_center + off);
        m.rotations.push_back(Mat3::rotation_axis_angle(s.spin_axis, s.spin_rate * t));
        m.max_offset = std::max(m.max_offset, max_offset_bound(s, a_motion));
    }
    return m;
}

std::vector<CameraPose> make_ring_cameras(int count, int image_size, double distance,
                                          double subject_radius) {
    if (count < 1) throw std::invalid_argument("make_ring_cameras: count must be >= 1");
    std::vector<CameraPose> cams;
    cams.reserve(count);
    double focal = 0.5 * image_size * distance / subject_radius;
    for (int i = 0; i < count; ++i) {
        double a = 2.0 * kPi * i / count;
        double zs = (i % 2 == 0) ? 0.18 : -0.18;
        Vec3 dir{std::cos(a), std::sin(a), zs};
        Vec3 pos = dir * (distance / std::sqrt(dir.dot(dir)));
        cams.push_back(CameraPose::look_at(pos, Vec3{0, 0, 0}, focal, image_size, image_size));
    }
    return cams;
}

RenderResult render_flat(const SceneSpec& scene, const MotionState& motion,
                         const CameraPose& camera) {
    RenderResult out;
    out.rgb = Image(camera.image_width, camera.image_height, 3);
    out.mask = Image(camera.image_width, camera.image_height, 1);

    std::vector<const SphereSpec*> spheres;
    for (const auto& s : scene.spheres) spheres.push_back(&s);

    for (int y = 0; y < camera.image_height; ++y) {
        for (int x = 0; x < camera.image_width; ++x) {
            Vec3 dir = camera.ray_direction(x + 0.5, y + 0.5);
            Hit hit = trace(motion.centers, spheres, camera.position, dir);
            if (hit.sphere < 0) {
                out.rgb.at(x, y, 0) = scene.background.x;
                out.rgb.at(x, y, 1) = scene.background.y;
                out.rgb.at(x, y, 2) = scene.background.z;
                continue;
            }
            const auto& s = scene.spheres[hit.sphere];
            Vec3 p = camera.position + dir * hit.t;
            Vec3 n = (p - motion.centers[hit.sphere]) * (1.0 / s.radius);
            Vec3 a = texture_at_normal(s, motion.rotations[hit.sphere], n);
            out.rgb.at(x, y, 0) = a.x;
            out.rgb.at(x, y, 1) = a.y;
            out.rgb.at(x, y, 2) = a.z;
            out.mask.at(x, y, 0) = 1.0;
        }
    }
    return out;
}

RelitRenderResult render_relit(const SceneSpec& scene, const MotionState& motion,
                               const CameraPose& camera, const EnvironmentMap& env,
                               double exposure) {
    const EnvironmentMap env16 = env.height > 16 ? downsample_env(env, 16) : env;

    std::vector<LightTexel> texels;
    texels.reserve(static_cast<size_t>(env16.width) * env16.height);
    Vec3 mean_env{0, 0, 0};
    for (int v = 0; v < env16.height; ++v) {
        double sol = texel_solid_angle(v, env16.height);
        for (int u = 0; u < env16.width; ++u) {
            Rgb L = env16.texel(u, v);
            Vec3 w{L.r * sol, L.g * sol, L.b * sol};
            mean_env = mean_env + w;
            if (L.r <= 0 && L.g <= 0 && L.b <= 0) continue;
            texels.push_back({texel_to_dir(u, v, env16.width, env16.height), w});
        }
    }
    mean_env = mean_env * (1.0 / (4.0 * kPi));
    Vec3 bg{std::clamp(scene.background.x * mean_env.x, 0.0, 1.0),
            std::clamp(scene.background.y * mean_env.y, 0.0, 1.0),
            std::clamp(scene.background.z * mean_env.z, 0.0, 1.0)};

    RelitRenderResult out;
    out.rgb = Image(camera.image_width, camera.image_height, 3);
    out.hdr = Image(camera.image_width, camera.image_height, 3);
    out.mask = Image(camera.image_width, camera.image_height, 1);

    std::vector<const SphereSpec*> spheres;
    for (const auto& s : scene.spheres) spheres.push_back(&s);

    struct Cone {
        Vec3 axis;
        double cos_half = 1.0;
        bool engulfs = false;
    };
    std::vector<Cone> cones(scene.spheres.size());

    for (int y = 0; y < camera.image_height; ++y) {
        for (int x = 0; x < camera.image_width; ++x) {
            Vec3 dir = camera.ray_direction(x + 0.5, y + 0.5);
            Hit hit = trace(motion.centers, spheres, camera.position, dir);
            if (hit.sphere < 0) {
                for (int c = 0; c < 3; ++c) {
                    double bv = c == 0 ? bg.x : (c == 1 ? bg.y : bg.z);
                    out.rgb.at(x, y, c) = bv;
                    out.hdr.at(x, y, c) = bv;
                }
                continue;
            }
            const auto& s = scene.spheres[hit.sphere];
            Vec3 p = camera.position + dir * hit.t;
            Vec3 n = (p - motion.centers[hit.sphere]) * (1.0 / s.radius);
            Vec3 albedo = texture_at_normal(s, motion.rotations[hit.sphere], n);
            Vec3 view = dir * -1.0;

            // Shadow cones cast by the other spheres, exact for exterior points.
            size_t ncones = 0;
            bool engulfed = false;
            for (size_t j = 0; j < motion.centers.size(); ++j) {
                if (static_cast<int>(j) == hit.sphere) continue;
                Vec3 e = motion.centers[j] - p;
                double d2 = e.dot(e);
                double r2 = spheres[j]->radius * spheres[j]->radius;
                if (d2 <= r2) {
                    engulfed = true;
                    break;
                }
                Cone cone;
                cone.axis = e * (1.0 / std::sqrt(d2));
                cone.cos_half = std::sqrt(1.0 - r2 / d2);
                cones[ncones++] = cone;
            }

            Vec3 sum{0, 0, 0};
            if (!engulfed) {
                int shin = static_cast<int>(s.shininess);
                double spec_norm = s.specular * (s.shininess + 2.0) / (8.0 * kPi);
                for (const auto& lt : texels) {
                    double cosi = n.dot(lt.dir);
                    if (cosi <= 0) continue;
                    bool blocked = false;
                    for (size_t j = 0; j < ncones; ++j) {
                        if (lt.dir.dot(cones[j].axis) >= cones[j].cos_half) {
                            blocked = true;
                            break;
                        }
                    }
                    if (blocked) continue;
                    Vec3 h = lt.dir + view;
                    double hn = std::sqrt(h.dot(h));
                    double ndoth = hn > 1e-12 ? std::max(0.0, n.dot(h) / hn) : 0.0;
                    double spec = spec_norm * powi(ndoth, shin);
                    double kd = cosi / kPi;
                    sum.x += lt.weighted.x * (albedo.x * kd + spec);
                    sum.y += lt.weighted.y * (albedo.y * kd + spec);
                    sum.z += lt.weighted.z * (albedo.z * kd + spec);
                }
            }
            sum = sum * exposure;
            out.hdr.at(x, y, 0) = sum.x;
            out.hdr.at(x, y, 1) = sum.y;
            out.hdr.at(x, y, 2) = sum.z;
            out.rgb.at(x, y, 0) = std::clamp(sum.x, 0.0, 1.0);
            out.rgb.at(x, y, 1) = std::clamp(sum.y, 0.0, 1.0);
            out.rgb.at(x, y, 2) = std::clamp(sum.z, 0.0, 1.0);
            out.mask.at(x, y, 0) = 1.0;
        }
    }
    return out;
}

LightPool make_light_pool(int count, int env_height, uint64_t seed) {
    if (count < 1) throw std::invalid_argument("make_light_pool: count must be >= 1");
    LightPool pool;
    pool.seed = seed;
    pool.maps.reserve(count);
    for (int i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, static_cast<uint64_t>(i)));
        if (rng.uniform() < 0.3) {
            Vec3 dir = random_unit(rng);
            double radius = rng.uniform(0.12, 0.3);
            double power = rng.uniform(2.0, 8.0);
            double peak = power / (2.0 * kPi * (1.0 - std::cos(radius)));
            Rgb intensity{static_cast<float>(peak * rng.uniform(0.75, 1.0)),
                          static_cast<float>(peak * rng.uniform(0.75, 1.0)),
                          static_cast<float>(peak * rng.uniform(0.75, 1.0))};
            pool.maps.push_back(make_olat(dir, radius, intensity, env_height));
        } else {
            struct Lobe {
                Vec3 dir;
                Vec3 tint;
                double kappa;
            };
            int nlobes = rng.uniform_int(3, 8);
            std::vector<Lobe> lobes(nlobes);
            for (auto& l : lobes) {
                l.dir = random_unit(rng);
                l.kappa = std::exp(rng.uniform(std::log(6.0), std::log(40.0)));
                double amp = rng.uniform(0.5, 2.0);
                l.tint = {amp * rng.uniform(0.5, 1.0), amp * rng.uniform(0.5, 1.0),
                          amp * rng.uniform(0.5, 1.0)};
            }
            Vec3 ambient{rng.uniform(0.03, 0.15), rng.uniform(0.03, 0.15),
                         rng.uniform(0.03, 0.15)};
            EnvironmentMap map = make_uniform({0, 0, 0}, env_height);
            double weighted_lum = 0;
            for (int v = 0; v < env_height; ++v) {
                double sol = texel_solid_angle(v, env_height);
                for (int u = 0; u < map.width; ++u) {
                    Vec3 d = texel_to_dir(u, v, map.width, map.height);
                    Vec3 L = ambient;
                    for (const auto& l : lobes) {
                        double g = std::exp(l.kappa * (d.dot(l.dir) - 1.0));
                        L = L + l.tint * g;
                    }
                    map.at(u, v, 0) = static_cast<float>(L.x);
                    map.at(u, v, 1) = static_cast<float>(L.y);
                    map.at(u, v, 2) = static_cast<float>(L.z);
                    weighted_lum += sol * (L.x + L.y + L.z) / 3.0;
                }
            }
            double mean_lum = weighted_lum / (4.0 * kPi);
            double scale = rng.uniform(0.25, 0.7) / std::max(mean_lum, 1e-9);
            for (auto& v : map.data) v = static_cast<float>(v * scale);
            pool.maps.push_back(std::move(map));
        }
    }
    return pool;
}

double estimate_pixels_per_frame(const SceneSpec& scene, const CameraPose& camera,
                                 double a_motion, int n_pairs) {
    std::vector<double> probes;
    if (n_pairs >= 4) {
        probes = {0.25 * n_pairs, 0.5 * n_pairs, 0.75 * n_pairs};
    } else {
        probes = {0.0};
    }
    double total = 0;
    int used = 0;
    for (double t : probes) {
        auto m0 = render_flat(scene, motion_at(scene, t, a_motion), camera);
        auto m1 = render_flat(scene, motion_at(scene, t + 1.0, a_motion), camera);
        Centroid c0 = mask_centroid(m0.mask);
        Centroid c1 = mask_centroid(m1.mask);
        if (c0.count == 0 || c1.count == 0) continue;
        double dx = c1.x - c0.x;
        double dy = c1.y - c0.y;
        total += std::sqrt(dx * dx + dy * dy);
        ++used;
    }
    if (used == 0) return 0.05;
    return std::max(total / used, 0.05);
}

CaptureSet make_capture(const SceneSpec& scene, const CaptureConfig& config) {
    if (config.n_pairs < 1 || config.n_cameras < 1)
        throw std::invalid_argument("make_capture: need at least one pair and camera");

    CaptureSet cap;
    cap.subject_id = scene.subject_id;
    cap.complexity = scene.complexity;
    cap.scene = scene;
    cap.misalignment_px = config.misalignment_px;
    cap.a_motion = config.a_motion;
    cap.cameras = make_ring_cameras(config.n_cameras, config.image_size);
    cap.lights = make_light_pool(config.n_lights, config.env_height,
                                 derive_seed(config.seed, "lights"));

    int steps = config.n_pairs;
    cap.n_pairs = steps;

    Rng seq_rng(derive_seed(config.seed, "light-seq"));
    cap.light_ids.resize(steps);
    for (int t = 0; t < steps; ++t)
        cap.light_ids[t] = static_cast<int>(seq_rng.uniform_index(cap.lights.maps.size()));

    double delta = 0;
    if (config.misalignment_px > 0) {
        double pxpf =
            estimate_pixels_per_frame(scene, cap.cameras[0], config.a_motion, steps);
        delta = config.misalignment_px / pxpf;
    }

    cap.pairs.resize(static_cast<size_t>(steps) * config.n_cameras);
    parallel_for(static_cast<size_t>(steps), [&](size_t begin, size_t end) {
        for (size_t ti = begin; ti < end; ++ti) {
            double t = static_cast<double>(ti);
            MotionState mf = motion_at(scene, t, config.a_motion);
            MotionState mr = motion_at(scene, t + delta, config.a_motion);
            const EnvironmentMap& env = cap.lights.maps[cap.light_ids[ti]];
            for (int k = 0; k < config.n_cameras; ++k) {
                auto flat = render_flat(scene, mf, cap.cameras[k]);
                auto relit = render_relit(scene, mr, cap.cameras[k], env);
                FramePair& pair = cap.pairs[ti * config.n_cameras + k];
                pair.t = static_cast<int>(ti);
                pair.camera_id = k;
                pair.light_id = cap.light_ids[ti];
                pair.flat = std::move(flat.rgb);
                pair.mask = std::move(flat.mask);
                pair.relit = std::move(relit.rgb);
                pair.relit_mask = std::move(relit.mask);
            }
        }
    });
    return cap;
}

Image degrade(const Image& image, double level, uint64_t seed) {
    if (level < 0 || level > 1) throw std::invalid_argument("degrade: level must be in [0,1]");
    if (level == 0) return image;
    Image out = gaussian_blur(image, 2.0 * level);
    Rng rng(derive_seed(seed, static_cast<uint64_t>(level * 1e6)));
    double sigma = 0.05 * level;
    for (auto& v : out.data) v = std::clamp(v + sigma * rng.normal(), 0.0, 1.0);
    return out;
}

}  // namespace relight
