// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace msplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Errors carrying the process exit code contract:
// ConfigError -> 1, DataError -> 2, NumericalError -> 3.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Warnings go through a replaceable sink so tests can intercept them.
void warn(const std::string& msg);
void set_warn_handler(std::function<void(const std::string&)> handler);
void reset_warn_handler();

// Deterministic RNG. std::mt19937_64 is fully specified by the standard;
// the distributions below are hand-rolled because the std distribution
// objects are implementation-defined and would break bitwise reproducibility.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();

    // Uniform in [0, 1).
    double uniform();

    // Uniform in [lo, hi).
    double uniform(double lo, double hi);

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n);

    // Standard normal via Box-Muller.
    double normal();

    // Derive an independent stream (e.g. one per sequence).
    Rng fork(std::uint64_t salt) const;

private:
    std::uint64_t splitmix();
    std::uint64_t state_;
    bool have_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

// Sample k distinct elements of [0, n) uniformly without replacement,
// deterministic given the RNG state. Result is in selection order.
std::vector<std::uint32_t> sample_without_replacement(std::uint32_t n, std::uint32_t k, Rng& rng);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Euclidean projection of b onto the probability simplex {x >= 0, sum x = 1}.
Vec3 project_to_simplex(const Vec3& b);

// Wendland C2 kernel: phi(x) = (1-x)^4 (4x+1) for x in [0,1], 0 beyond.
inline double wendland_c2(double x) {
    if (x >= 1.0) return 0.0;
    const double t = 1.0 - x;
    const double t2 = t * t;
    return t2 * t2 * (4.0 * x + 1.0);
}

// smoothstep(x) = 3x^2 - 2x^3 clamped to [0,1].
inline double smoothstep(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return x * x * (3.0 - 2.0 * x);
}

// Caps the number of OpenMP threads for the process; 0 keeps the default.
void set_thread_cap(int n);

} // namespace msplat
