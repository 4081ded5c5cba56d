// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dvf/errors.hpp"
#include "dvf/tensor.hpp"

namespace dvf::svf {

// Learnable per-token scorer: sigmoid(w . token + b), one scalar per token.
template <typename T>
struct ImportanceGenerator {
    Tensor<T> w;  // [D]
    T b = T(0);

    explicit ImportanceGenerator(int dim = 0) { w.resize({dim}); }
    int dim() const { return w.shape.empty() ? 0 : w.shape[0]; }
};

template <typename T>
struct Selection {
    std::vector<T> semantic;    // head-summed class attention, one per patch token
    std::vector<T> importance;  // sigmoid scores; empty when the generator is inactive
    std::vector<T> fused;       // ranking signal used for top-k
    std::vector<int> ids;       // selected token indices, descending fused score
    int k = 0;
};

// Sum post-softmax class-attention rows across heads.
template <typename T>
std::vector<T> aggregate_heads(const T* class_attn, int heads, int n) {
    std::vector<T> out(static_cast<size_t>(n), T(0));
    for (int h = 0; h < heads; ++h)
        for (int i = 0; i < n; ++i) out[i] += class_attn[static_cast<size_t>(h) * n + i];
    return out;
}

template <typename T>
std::vector<T> token_importance(const T* tokens, int n, int d, const ImportanceGenerator<T>& gen) {
    std::vector<T> z(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        T s = gen.b;
        const T* row = tokens + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; ++j) s += gen.w[j] * row[j];
        z[i] = T(1) / (T(1) + std::exp(-s));
    }
    return z;
}

// Accumulates d(loss)/d(w, b) given d(loss)/dZ. Token gradients are not
// produced: the importance alignment objective trains the generator only.
template <typename T>
void token_importance_backward(const T* tokens, const std::vector<T>& z, const std::vector<T>& dz,
                               ImportanceGenerator<T>& grad, int d) {
    const int n = static_cast<int>(z.size());
    for (int i = 0; i < n; ++i) {
        const T g = dz[i] * z[i] * (T(1) - z[i]);
        const T* row = tokens + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; ++j) grad.w[j] += g * row[j];
        grad.b += g;
    }
}

// fused[i] = semantic[i] + semantic[i] * importance[i]
template <typename T>
std::vector<T> fuse_scores(const std::vector<T>& semantic, const std::vector<T>& importance) {
    if (semantic.size() != importance.size()) throw ShapeError("fuse_scores: length mismatch");
    std::vector<T> out(semantic.size());
    for (size_t i = 0; i < semantic.size(); ++i) out[i] = semantic[i] + semantic[i] * importance[i];
    return out;
}

// Indices of the k largest entries, descending; ties resolved to the lower index.
template <typename T>
std::vector<int> select_topk(const std::vector<T>& scores, int k) {
    const int n = static_cast<int>(scores.size());
    if (k < 1 || k > n) throw ConfigurationError("select_topk: k must be in [1, " + std::to_string(n) + "]");
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
    order.resize(static_cast<size_t>(k));
    return order;
}

// Gather [class, tokens[ids...]] from a (n+1) x d sequence (class at row 0).
template <typename T>
Tensor<T> rebuild_sequence(const T* tokens_with_class, int n, int d, const std::vector<int>& ids) {
    std::vector<char> seen(static_cast<size_t>(n), 0);
    for (int id : ids) {
        if (id < 0 || id >= n) throw InternalError("rebuild_sequence: id out of range");
        if (seen[static_cast<size_t>(id)]) throw InternalError("rebuild_sequence: duplicate id");
        seen[static_cast<size_t>(id)] = 1;
    }
    const int k = static_cast<int>(ids.size());
    Tensor<T> out({k + 1, d});
    std::copy(tokens_with_class, tokens_with_class + d, out.data());
    for (int j = 0; j < k; ++j) {
        const T* src = tokens_with_class + static_cast<size_t>(ids[static_cast<size_t>(j)] + 1) * d;
        std::copy(src, src + d, out.data() + static_cast<size_t>(j + 1) * d);
    }
    return out;
}

// Full selection pass: aggregate attention, optionally weight by learned
// importance, rank, and take the top k.
template <typename T>
Selection<T> select(const T* class_attn, const T* patch_tokens, int heads, int n, int d, int k,
                    const ImportanceGenerator<T>* gen) {
    Selection<T> sel;
    sel.semantic = aggregate_heads(class_attn, heads, n);
    if (gen != nullptr) {
        sel.importance = token_importance(patch_tokens, n, d, *gen);
        sel.fused = fuse_scores(sel.semantic, sel.importance);
    } else {
        sel.fused = sel.semantic;
    }
    sel.ids = select_topk(sel.fused, k);
    sel.k = k;
    return sel;
}

}  // namespace dvf::svf
