// Copyright 2026 relightkit authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace relight {

inline constexpr double kPi = 3.14159265358979323846;

// Raised when an optimization or solver produces non-finite values; mapped to
// a dedicated exit code by the CLI.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Small fixed-size linear algebra. Enough for camera poses and sphere scenes;
// the diffusion core has its own tensor type.
// ---------------------------------------------------------------------------

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        double n = norm();
        if (n == 0) throw std::runtime_error("cannot normalize zero vector");
        return *this / n;
    }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Row-major 3x3 matrix.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return {}; }

    static Mat3 from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2) {
        Mat3 out;
        out.m = {r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z};
        return out;
    }

    // Rotation about +z by `angle` (right-handed, x toward y).
    static Mat3 rotation_z(double angle) {
        double c = std::cos(angle), s = std::sin(angle);
        Mat3 out;
        out.m = {c, -s, 0, s, c, 0, 0, 0, 1};
        return out;
    }

    // Rodrigues rotation about a unit axis.
    static Mat3 rotation_axis_angle(const Vec3& axis, double angle) {
        Vec3 a = axis.normalized();
        double c = std::cos(angle), s = std::sin(angle), t = 1 - c;
        Mat3 out;
        out.m = {t * a.x * a.x + c,       t * a.x * a.y - s * a.z, t * a.x * a.z + s * a.y,
                 t * a.x * a.y + s * a.z, t * a.y * a.y + c,       t * a.y * a.z - s * a.x,
                 t * a.x * a.z - s * a.y, t * a.y * a.z + s * a.x, t * a.z * a.z + c};
        return out;
    }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 out;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += m[r * 3 + k] * o.m[k * 3 + c];
                out.m[r * 3 + c] = s;
            }
        return out;
    }

    Mat3 transposed() const {
        Mat3 out;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) out.m[r * 3 + c] = m[c * 3 + r];
        return out;
    }

    // Max abs deviation of M*M^T from identity.
    double orthonormality_error() const {
        Mat3 mt = *this * transposed();
        double err = 0;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                err = std::max(err, std::abs(mt.m[r * 3 + c] - (r == c ? 1.0 : 0.0)));
        return err;
    }
};

// ---------------------------------------------------------------------------
// Deterministic RNG. std::mt19937_64 is fully specified by the standard, but
// the distribution classes are not; draws are implemented here so that the
// same seed yields the same stream on every platform.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(uint64_t seed = 0) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() { return (engine_() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n) {
        if (n == 0) throw std::runtime_error("uniform_index: empty range");
        // Rejection sampling; unbiased and engine-order deterministic.
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do { v = engine_(); } while (v >= limit);
        return v % n;
    }

    // Uniform integer in [lo, hi] inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(uniform_index(static_cast<uint64_t>(hi - lo + 1)));
    }

    // Standard normal via Box-Muller (one value per call, cached pair).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do { u1 = uniform(); } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * kPi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    std::string state_string() const;
    void set_state_string(const std::string& s);

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0;
};

// Derives a child seed from a base seed and a stream tag (splitmix64 mix).
uint64_t derive_seed(uint64_t base, uint64_t stream);
uint64_t derive_seed(uint64_t base, const std::string& tag);

// ---------------------------------------------------------------------------
// Worker-count control and a deterministic parallel map. Work is split into
// fixed contiguous ranges so results are independent of scheduling; any
// reduction over the outputs must be done sequentially by the caller.
// ---------------------------------------------------------------------------

// Worker cap from RELIGHTKIT_THREADS, else hardware concurrency.
int worker_count();

void parallel_for(int64_t n, const std::function<void(int64_t begin, int64_t end)>& body);

}  // namespace relight
