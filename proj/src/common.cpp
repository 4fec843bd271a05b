// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#include "msplat/common.hpp"

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <mutex>

namespace msplat {

namespace {

std::mutex g_warn_mutex;
std::function<void(const std::string&)> g_warn_handler;

} // namespace

void warn(const std::string& msg) {
    std::lock_guard<std::mutex> lock(g_warn_mutex);
    if (g_warn_handler) {
        g_warn_handler(msg);
    } else {
        std::fprintf(stderr, "[warn] %s\n", msg.c_str());
    }
}

void set_warn_handler(std::function<void(const std::string&)> handler) {
    std::lock_guard<std::mutex> lock(g_warn_mutex);
    g_warn_handler = std::move(handler);
}

void reset_warn_handler() {
    std::lock_guard<std::mutex> lock(g_warn_mutex);
    g_warn_handler = nullptr;
}

// splitmix64; used both as the generator and for seeding forks.
std::uint64_t Rng::splitmix() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() { return splitmix(); }

double Rng::uniform() {
    // 53 mantissa bits -> [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::uniform_index(std::uint64_t n) {
    if (n == 0) return 0;
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    if (have_cached_normal_) {
        have_cached_normal_ = false;
        return cached_normal_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(theta);
    have_cached_normal_ = true;
    return r * std::cos(theta);
}

Rng Rng::fork(std::uint64_t salt) const {
    Rng tmp(state_ ^ (0xa0761d6478bd642fULL + salt));
    return Rng(tmp.next_u64());
}

std::vector<std::uint32_t> sample_without_replacement(std::uint32_t n, std::uint32_t k, Rng& rng) {
    if (k > n) {
        throw ConfigError("sample_without_replacement: k=" + std::to_string(k) +
                          " exceeds population n=" + std::to_string(n));
    }
    std::vector<std::uint32_t> pool(n);
    for (std::uint32_t i = 0; i < n; ++i) pool[i] = i;
    // Partial Fisher-Yates.
    for (std::uint32_t i = 0; i < k; ++i) {
        const std::uint64_t j = i + rng.uniform_index(n - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

Vec3 project_to_simplex(const Vec3& b) {
    // Sort-based projection: find the threshold tau such that
    // sum(max(b_i - tau, 0)) = 1 and clip.
    Vec3 s = b;
    if (s[0] < s[1]) std::swap(s[0], s[1]);
    if (s[1] < s[2]) std::swap(s[1], s[2]);
    if (s[0] < s[1]) std::swap(s[0], s[1]);
    double cumsum = 0.0;
    double tau = 0.0;
    int rho = 0;
    for (int i = 0; i < 3; ++i) {
        cumsum += s[i];
        const double t = (cumsum - 1.0) / static_cast<double>(i + 1);
        if (s[i] - t > 0.0) {
            rho = i + 1;
            tau = t;
        }
    }
    (void)rho;
    Vec3 out;
    for (int i = 0; i < 3; ++i) out[i] = std::max(b[i] - tau, 0.0);
    return out;
}

void set_thread_cap(int n) {
    if (n > 0) omp_set_num_threads(n);
}

} // namespace msplat
