// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0
//
// Times the OpenMP kernels against their serial reference on encoder-shaped
// workloads and reports the speedup plus the max output difference (which
// must be exactly zero: both variants accumulate in the same order).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dvf/kernels.hpp"
#include "dvf/rng.hpp"

using dvf::Rng;
namespace k = dvf::kernels;

namespace {

std::vector<float> random_vec(size_t n, Rng& rng) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return v;
}

double time_ms(const std::function<void()>& fn) {
    // Warm up once, then run until ~100 ms of samples.
    fn();
    const auto t0 = std::chrono::steady_clock::now();
    int iters = 0;
    for (;;) {
        fn();
        ++iters;
        const auto dt = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        if (dt > 100.0) return dt / iters;
    }
}

float max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
    float m = 0.0f;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

struct Case {
    std::string name;
    std::function<void()> omp;
    std::function<void()> serial;
    const std::vector<float>* out_omp;
    const std::vector<float>* out_serial;
};

}  // namespace

int main() {
    const int s = 197, d = 768, h = 3072, heads = 12, dh = d / heads;
    Rng rng(42);

    auto A = random_vec(static_cast<size_t>(s) * d, rng);
    auto W = random_vec(static_cast<size_t>(h) * d, rng);
    auto qkv = random_vec(static_cast<size_t>(s) * 3 * d, rng);
    auto gamma = random_vec(static_cast<size_t>(d), rng);
    auto beta = random_vec(static_cast<size_t>(d), rng);
    auto probs = random_vec(static_cast<size_t>(heads) * s * s, rng);
    for (auto& p : probs) p = std::abs(p);

    std::vector<float> c1(static_cast<size_t>(s) * h), c2(static_cast<size_t>(s) * h);
    std::vector<float> ln1(static_cast<size_t>(s) * d), ln2(static_cast<size_t>(s) * d);
    std::vector<float> mean(static_cast<size_t>(s)), rstd(static_cast<size_t>(s));
    std::vector<float> sc1(static_cast<size_t>(heads) * s * s), sc2(static_cast<size_t>(heads) * s * s);
    std::vector<float> ao1(static_cast<size_t>(s) * d), ao2(static_cast<size_t>(s) * d);
    std::vector<float> g1(static_cast<size_t>(s) * h), g2(static_cast<size_t>(s) * h);

    std::vector<Case> cases;
    cases.push_back({"gemm_nt 197x768 * (3072x768)^T",
                     [&] { k::gemm_nt(A.data(), W.data(), c1.data(), s, d, h); },
                     [&] { k::serial::gemm_nt(A.data(), W.data(), c2.data(), s, d, h); }, &c1, &c2});
    cases.push_back({"layer_norm 197x768",
                     [&] { k::layer_norm(A.data(), gamma.data(), beta.data(), ln1.data(), mean.data(), rstd.data(), s, d); },
                     [&] { k::serial::layer_norm(A.data(), gamma.data(), beta.data(), ln2.data(), mean.data(), rstd.data(), s, d); },
                     &ln1, &ln2});
    cases.push_back({"attn_scores 12h x 197x197",
                     [&] { k::attn_scores(qkv.data(), qkv.data() + d, sc1.data(), heads, dh, s, s, 3 * d); },
                     [&] { k::serial::attn_scores(qkv.data(), qkv.data() + d, sc2.data(), heads, dh, s, s, 3 * d); },
                     &sc1, &sc2});
    cases.push_back({"attn_apply 12h x 197x197",
                     [&] { k::attn_apply(probs.data(), qkv.data() + 2 * d, ao1.data(), heads, dh, s, s, 3 * d, d); },
                     [&] { k::serial::attn_apply(probs.data(), qkv.data() + 2 * d, ao2.data(), heads, dh, s, s, 3 * d, d); },
                     &ao1, &ao2});
    cases.push_back({"softmax_rows 2364x197",
                     [&] { k::softmax_rows(probs.data(), sc1.data(), heads * s, s); },
                     [&] { k::serial::softmax_rows(probs.data(), sc2.data(), heads * s, s); }, &sc1, &sc2});
    cases.push_back({"gelu 197x3072",
                     [&] { k::gelu(c1.data(), g1.data(), c1.size()); },
                     [&] { k::serial::gelu(c1.data(), g2.data(), c2.size()); }, &g1, &g2});

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (compiled without OpenMP)\n");
#endif
    std::printf("%-36s %10s %10s %8s %12s\n", "kernel", "serial ms", "omp ms", "speedup", "max |diff|");
    for (auto& c : cases) {
        const double ts = time_ms(c.serial);
        const double tp = time_ms(c.omp);
        c.serial();
        c.omp();
        const float diff = max_abs_diff(*c.out_omp, *c.out_serial);
        std::printf("%-36s %10.3f %10.3f %7.2fx %12g\n", c.name.c_str(), ts, tp, ts / tp, diff);
    }
    return 0;
}
