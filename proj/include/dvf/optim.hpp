// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dvf/errors.hpp"

namespace dvf::train {

// A view into one named parameter tensor and its gradient accumulator.
template <typename T>
struct ParamSlot {
    std::string name;
    T* w = nullptr;
    T* g = nullptr;
    size_t n = 0;
    T lr_mult = T(1);
};

template <typename T>
class Adam {
public:
    explicit Adam(std::vector<ParamSlot<T>> slots, T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
        : slots_(std::move(slots)), beta1_(beta1), beta2_(beta2), eps_(eps) {
        size_t total = 0;
        for (const auto& s : slots_) total += s.n;
        m_.assign(total, T(0));
        v_.assign(total, T(0));
    }

    void zero_grads() {
        for (auto& s : slots_)
            for (size_t i = 0; i < s.n; ++i) s.g[i] = T(0);
    }

    void step(T lr) {
        ++t_;
        const T bc1 = T(1) - std::pow(beta1_, T(t_));
        const T bc2 = T(1) - std::pow(beta2_, T(t_));
        size_t off = 0;
        for (auto& s : slots_) {
            const T eff_lr = lr * s.lr_mult;
            for (size_t i = 0; i < s.n; ++i) {
                const T g = s.g[i];
                if (!std::isfinite(g)) throw NumericsError("non-finite gradient in " + s.name);
                T& m = m_[off + i];
                T& v = v_[off + i];
                m = beta1_ * m + (T(1) - beta1_) * g;
                v = beta2_ * v + (T(1) - beta2_) * g * g;
                s.w[i] -= eff_lr * (m / bc1) / (std::sqrt(v / bc2) + eps_);
            }
            off += s.n;
        }
    }

    long step_count() const { return t_; }

private:
    std::vector<ParamSlot<T>> slots_;
    T beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<T> m_, v_;
};

inline double cosine_lr(double base, long step, long total_steps) {
    if (total_steps <= 0) return base;
    const double x = static_cast<double>(step) / static_cast<double>(total_steps);
    return base * 0.5 * (1.0 + std::cos(M_PI * std::min(1.0, x)));
}

}  // namespace dvf::train
