// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dvf {

// Seeded generator with fixed draw algorithms. std::*_distribution is
// implementation-defined, so uniform/normal are derived here directly from
// the mt19937_64 stream to keep artifacts byte-stable across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n > 0. Modulo bias is negligible for the
    // small ranges used here (n << 2^64).
    uint64_t below(uint64_t n) { return gen_() % n; }

    int range_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    // Box-Muller; one value per call, the pair's partner is discarded so the
    // draw count per call stays fixed.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        return mean + stddev * z;
    }

    // Normal truncated to [-2σ, 2σ] by resampling.
    double trunc_normal(double stddev) {
        for (;;) {
            double z = normal(0.0, stddev);
            if (std::abs(z) <= 2.0 * stddev) return z;
        }
    }

    template <typename It>
    void shuffle(It first, It last) {
        auto n = last - first;
        for (auto i = n - 1; i > 0; --i) {
            auto j = static_cast<decltype(i)>(below(static_cast<uint64_t>(i + 1)));
            std::swap(first[i], first[j]);
        }
    }

    // Stable derivation of per-item streams (seed, epoch, index, ...).
    static uint64_t mix(uint64_t a, uint64_t b) {
        uint64_t x = a * 0x9e3779b97f4a7c15ULL ^ (b + 0x7f4a7c15b97f4a7cULL);
        x ^= x >> 30;
        x *= 0xbf58476d1ce4e5b9ULL;
        x ^= x >> 27;
        x *= 0x94d049bb133111ebULL;
        x ^= x >> 31;
        return x;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace dvf
