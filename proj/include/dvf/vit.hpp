// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dvf/errors.hpp"
#include "dvf/kernels.hpp"
#include "dvf/rng.hpp"
#include "dvf/svf.hpp"
#include "dvf/tensor.hpp"

namespace dvf::vit {

struct EncoderConfig {
    int image_size = 224;
    int patch_size = 16;
    int depth = 12;
    int dim = 768;
    int heads = 12;
    float mlp_ratio = 4.0f;

    int patches_per_side() const { return image_size / patch_size; }
    int num_patches() const { return patches_per_side() * patches_per_side(); }
    int seq_len() const { return num_patches() + 1; }
    int head_dim() const { return dim / heads; }
    int mlp_dim() const { return static_cast<int>(dim * mlp_ratio); }
    int patch_vec() const { return 3 * patch_size * patch_size; }

    void validate() const {
        if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0)
            throw ShapeError("image_size must be a positive multiple of patch_size");
        if (dim <= 0 || heads <= 0 || dim % heads != 0) throw ShapeError("dim must be divisible by heads");
        if (depth < 2) throw ConfigurationError("depth must be >= 2 (token selection needs a penultimate layer)");
        if (mlp_ratio <= 0.0f) throw ConfigurationError("mlp_ratio must be positive");
    }
};

template <typename T>
struct LayerParams {
    Tensor<T> ln1_g, ln1_b;  // [D]
    Tensor<T> w_qkv, b_qkv;  // [3D x D], [3D]
    Tensor<T> w_out, b_out;  // [D x D], [D]
    Tensor<T> ln2_g, ln2_b;  // [D]
    Tensor<T> w_fc1, b_fc1;  // [H x D], [H]
    Tensor<T> w_fc2, b_fc2;  // [D x H], [D]
};

template <typename T>
struct Params {
    Tensor<T> patch_w, patch_b;  // [D x 3P^2], [D]
    Tensor<T> cls;               // [D]
    Tensor<T> pos;               // [(N+1) x D]
    std::vector<LayerParams<T>> layers;
};

// Visits parameters in a fixed order; the same order defines checkpoint and
// optimizer slot layout.
template <typename T, typename F>
void for_each_param(Params<T>& p, F&& fn) {
    fn("patch_w", p.patch_w);
    fn("patch_b", p.patch_b);
    fn("cls", p.cls);
    fn("pos", p.pos);
    for (size_t i = 0; i < p.layers.size(); ++i) {
        const std::string pre = "layers." + std::to_string(i) + ".";
        auto& l = p.layers[i];
        fn(pre + "ln1_g", l.ln1_g);
        fn(pre + "ln1_b", l.ln1_b);
        fn(pre + "w_qkv", l.w_qkv);
        fn(pre + "b_qkv", l.b_qkv);
        fn(pre + "w_out", l.w_out);
        fn(pre + "b_out", l.b_out);
        fn(pre + "ln2_g", l.ln2_g);
        fn(pre + "ln2_b", l.ln2_b);
        fn(pre + "w_fc1", l.w_fc1);
        fn(pre + "b_fc1", l.b_fc1);
        fn(pre + "w_fc2", l.w_fc2);
        fn(pre + "b_fc2", l.b_fc2);
    }
}

template <typename T>
struct LayerActs {
    int seq = 0;
    Tensor<T> x_in;                           // [S x D]
    Tensor<T> ln1_out, ln1_mean, ln1_rstd;    // [S x D], [S], [S]
    Tensor<T> qkv;                            // [S x 3D]
    Tensor<T> attn;                           // [M x S x S] post-softmax
    Tensor<T> attn_out;                       // [S x D] heads concatenated
    Tensor<T> resid1;                         // [S x D]
    Tensor<T> ln2_out, ln2_mean, ln2_rstd;
    Tensor<T> fc1_out, gelu_out;              // [S x H]
    Tensor<T> x_out;                          // [S x D]
};

// Everything encode() needs to retain for backward().
template <typename T>
struct Activations {
    Tensor<T> patches;                        // [N x 3P^2]
    Tensor<T> tokens0;                        // [(N+1) x D]
    std::vector<LayerActs<T>> layers;
    std::vector<Tensor<T>> class_attention;   // per layer [M x (S-1)], patch-key slice
    svf::Selection<T> selection;              // filled when the hook is active
    bool svf_active = false;
    Tensor<T> emb_raw;                        // [D] class token after the last layer
    T emb_norm = T(0);
    Tensor<T> embedding;                      // [D], unit norm
};

template <typename T>
struct SvfHook {
    int k = 12;
    const svf::ImportanceGenerator<T>* omega = nullptr;  // null: rank by attention alone
};

namespace detail {

template <typename T>
bool all_finite(const T* p, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

}  // namespace detail

template <typename T>
class Model {
public:
    EncoderConfig cfg;
    Params<T> params;

    explicit Model(const EncoderConfig& c) : cfg(c) {
        cfg.validate();
        allocate(params);
    }

    void allocate(Params<T>& p) const {
        const int d = cfg.dim, h = cfg.mlp_dim(), pv = cfg.patch_vec();
        p.patch_w.resize({d, pv});
        p.patch_b.resize({d});
        p.cls.resize({d});
        p.pos.resize({cfg.seq_len(), d});
        p.layers.assign(static_cast<size_t>(cfg.depth), {});
        for (auto& l : p.layers) {
            l.ln1_g.resize({d});
            l.ln1_b.resize({d});
            l.w_qkv.resize({3 * d, d});
            l.b_qkv.resize({3 * d});
            l.w_out.resize({d, d});
            l.b_out.resize({d});
            l.ln2_g.resize({d});
            l.ln2_b.resize({d});
            l.w_fc1.resize({h, d});
            l.b_fc1.resize({h});
            l.w_fc2.resize({d, h});
            l.b_fc2.resize({d});
        }
    }

    void init(Rng& rng) {
        for_each_param(params, [&](const std::string& name, Tensor<T>& t) {
            const bool is_gain = name.ends_with("ln1_g") || name.ends_with("ln2_g");
            const bool is_bias = name.ends_with("_b") || name.starts_with("patch_b") ||
                                 name.find(".b_") != std::string::npos;
            if (is_gain) {
                std::fill(t.v.begin(), t.v.end(), T(1));
            } else if (is_bias) {
                t.zero();
            } else {
                for (auto& x : t.v) x = static_cast<T>(rng.trunc_normal(0.02));
            }
        });
    }

    // Patch projection + class token + position embedding.
    void patchify(const T* image_chw, Tensor<T>& patches, Tensor<T>& tokens0) const {
        const int n = cfg.num_patches(), d = cfg.dim, pv = cfg.patch_vec();
        const int side = cfg.patches_per_side(), ps = cfg.patch_size, is = cfg.image_size;
        patches.resize({n, pv});
        for (int p = 0; p < n; ++p) {
            const int py = (p / side) * ps, px = (p % side) * ps;
            T* dst = patches.data() + static_cast<size_t>(p) * pv;
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < ps; ++y)
                    for (int x = 0; x < ps; ++x)
                        *dst++ = image_chw[(static_cast<size_t>(c) * is + py + y) * is + px + x];
        }
        tokens0.resize({n + 1, d});
        std::copy(params.cls.v.begin(), params.cls.v.end(), tokens0.data());
        kernels::gemm_nt(patches.data(), params.patch_w.data(), tokens0.data() + d, n, pv, d);
        kernels::add_row_bias(tokens0.data() + d, params.patch_b.data(), n, d);
        for (size_t i = 0; i < tokens0.size(); ++i) tokens0[i] += params.pos[i];
    }

    // One encoder block: x + MHSA(LN(x)), then + MLP(LN(.)).
    void forward_layer(int layer, const Tensor<T>& x, LayerActs<T>& a, Tensor<T>& class_attn) const {
        const auto& l = params.layers[static_cast<size_t>(layer)];
        const int s = x.shape[0], d = cfg.dim, m = cfg.heads, dh = cfg.head_dim(), hmlp = cfg.mlp_dim();
        a.seq = s;
        a.x_in = x;
        a.ln1_out.resize({s, d});
        a.ln1_mean.resize({s});
        a.ln1_rstd.resize({s});
        kernels::layer_norm(x.data(), l.ln1_g.data(), l.ln1_b.data(), a.ln1_out.data(), a.ln1_mean.data(),
                            a.ln1_rstd.data(), s, d);
        a.qkv.resize({s, 3 * d});
        kernels::gemm_nt(a.ln1_out.data(), l.w_qkv.data(), a.qkv.data(), s, d, 3 * d);
        kernels::add_row_bias(a.qkv.data(), l.b_qkv.data(), s, 3 * d);

        const T* q = a.qkv.data();
        const T* k = a.qkv.data() + d;
        const T* v = a.qkv.data() + 2 * d;
        a.attn.resize({m, s, s});
        kernels::attn_scores(q, k, a.attn.data(), m, dh, s, s, 3 * d);
        kernels::softmax_rows(a.attn.data(), a.attn.data(), m * s, s);
        a.attn_out.resize({s, d});
        kernels::attn_apply(a.attn.data(), v, a.attn_out.data(), m, dh, s, s, 3 * d, d);

        class_attn.resize({m, s - 1});
        for (int h = 0; h < m; ++h)
            std::copy(a.attn.data() + (static_cast<size_t>(h) * s) * s + 1,
                      a.attn.data() + (static_cast<size_t>(h) * s) * s + s,
                      class_attn.data() + static_cast<size_t>(h) * (s - 1));

        a.resid1 = a.x_in;
        kernels::gemm_nt(a.attn_out.data(), l.w_out.data(), a.resid1.data(), s, d, d, /*acc=*/true);
        kernels::add_row_bias(a.resid1.data(), l.b_out.data(), s, d);

        a.ln2_out.resize({s, d});
        a.ln2_mean.resize({s});
        a.ln2_rstd.resize({s});
        kernels::layer_norm(a.resid1.data(), l.ln2_g.data(), l.ln2_b.data(), a.ln2_out.data(), a.ln2_mean.data(),
                            a.ln2_rstd.data(), s, d);
        a.fc1_out.resize({s, hmlp});
        kernels::gemm_nt(a.ln2_out.data(), l.w_fc1.data(), a.fc1_out.data(), s, d, hmlp);
        kernels::add_row_bias(a.fc1_out.data(), l.b_fc1.data(), s, hmlp);
        a.gelu_out.resize({s, hmlp});
        kernels::gelu(a.fc1_out.data(), a.gelu_out.data(), a.fc1_out.size());
        a.x_out = a.resid1;
        kernels::gemm_nt(a.gelu_out.data(), l.w_fc2.data(), a.x_out.data(), s, hmlp, d, /*acc=*/true);
        kernels::add_row_bias(a.x_out.data(), l.b_fc2.data(), s, d);

        if (!detail::all_finite(a.x_out.data(), a.x_out.size()))
            throw NumericsError("non-finite activations in encoder layer " + std::to_string(layer));
    }

    // Full pass. With an active hook, the last layer consumes the class token
    // plus the k tokens ranked by the penultimate layer's class attention.
    void encode(const T* image_chw, Activations<T>& act, const SvfHook<T>* hook = nullptr) const {
        const int depth = cfg.depth, d = cfg.dim;
        act.layers.assign(static_cast<size_t>(depth), {});
        act.class_attention.assign(static_cast<size_t>(depth), {});
        act.svf_active = (hook != nullptr);
        patchify(image_chw, act.patches, act.tokens0);

        const Tensor<T>* x = &act.tokens0;
        for (int i = 0; i < depth - 1; ++i) {
            forward_layer(i, *x, act.layers[static_cast<size_t>(i)], act.class_attention[static_cast<size_t>(i)]);
            x = &act.layers[static_cast<size_t>(i)].x_out;
        }

        Tensor<T> gathered;
        if (hook != nullptr) {
            const int n = x->shape[0] - 1;
            const int k = std::min(hook->k, n);  // toy configs may have fewer than k tokens
            const Tensor<T>& attn = act.class_attention[static_cast<size_t>(depth - 2)];
            act.selection = svf::select(attn.data(), x->data() + d, cfg.heads, n, d, k, hook->omega);
            gathered = svf::rebuild_sequence(x->data(), n, d, act.selection.ids);
            x = &gathered;
        }
        forward_layer(depth - 1, *x, act.layers[static_cast<size_t>(depth - 1)],
                      act.class_attention[static_cast<size_t>(depth - 1)]);

        const Tensor<T>& last = act.layers[static_cast<size_t>(depth - 1)].x_out;
        act.emb_raw.resize({d});
        std::copy(last.data(), last.data() + d, act.emb_raw.data());
        T norm = T(0);
        for (int i = 0; i < d; ++i) norm += act.emb_raw[i] * act.emb_raw[i];
        norm = std::sqrt(norm);
        if (!(norm > T(0)) || !std::isfinite(norm)) throw NumericsError("degenerate retrieval embedding norm");
        act.emb_norm = norm;
        act.embedding.resize({d});
        for (int i = 0; i < d; ++i) act.embedding[i] = act.emb_raw[i] / norm;
    }

    // Accumulates parameter gradients for d(loss)/d(normalized embedding).
    void backward(const Activations<T>& act, const T* d_embedding, Params<T>& grads) const {
        const int depth = cfg.depth, d = cfg.dim;

        // Through the L2 normalization: dx = (dy - y (y.dy)) / ||x||.
        Tensor<T> dx_out({act.layers.back().seq, d});
        dx_out.zero();
        T dot = T(0);
        for (int i = 0; i < d; ++i) dot += act.embedding[i] * d_embedding[i];
        for (int i = 0; i < d; ++i) dx_out[static_cast<size_t>(i)] = (d_embedding[i] - act.embedding[i] * dot) / act.emb_norm;

        for (int layer = depth - 1; layer >= 0; --layer) {
            Tensor<T> dx_in;
            backward_layer(layer, act.layers[static_cast<size_t>(layer)], dx_out, dx_in,
                           grads.layers[static_cast<size_t>(layer)]);
            if (layer == depth - 1 && act.svf_active) {
                // Scatter through the token gather; unselected rows get zero.
                const int n_full = act.layers[static_cast<size_t>(depth - 2)].seq;
                Tensor<T> scattered({n_full, d});
                scattered.zero();
                std::copy(dx_in.data(), dx_in.data() + d, scattered.data());
                for (size_t j = 0; j < act.selection.ids.size(); ++j) {
                    const T* src = dx_in.data() + (j + 1) * static_cast<size_t>(d);
                    T* dst = scattered.data() + static_cast<size_t>(act.selection.ids[j] + 1) * d;
                    std::copy(src, src + d, dst);
                }
                dx_out = std::move(scattered);
            } else {
                dx_out = std::move(dx_in);
            }
        }

        // Position embedding, class token, patch projection.
        const int n = cfg.num_patches(), pv = cfg.patch_vec();
        for (size_t i = 0; i < dx_out.size(); ++i) grads.pos[i] += dx_out[i];
        for (int i = 0; i < d; ++i) grads.cls[static_cast<size_t>(i)] += dx_out[static_cast<size_t>(i)];
        const T* d_tokens = dx_out.data() + d;  // [N x D]
        kernels::gemm_tn(d_tokens, act.patches.data(), grads.patch_w.data(), d, n, pv, /*acc=*/true);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) grads.patch_b[static_cast<size_t>(j)] += d_tokens[static_cast<size_t>(i) * d + j];
    }

private:
    void backward_layer(int layer, const LayerActs<T>& a, const Tensor<T>& dx_out, Tensor<T>& dx_in,
                        LayerParams<T>& g) const {
        const auto& l = params.layers[static_cast<size_t>(layer)];
        const int s = a.seq, d = cfg.dim, m = cfg.heads, dh = cfg.head_dim(), hmlp = cfg.mlp_dim();
        const T scale = T(1) / std::sqrt(T(dh));

        // MLP branch: x_out = resid1 + gelu(fc1(ln2(resid1))) W2^T + b2
        Tensor<T> d_gelu({s, hmlp});
        kernels::gemm_nn(dx_out.data(), l.w_fc2.data(), d_gelu.data(), s, d, hmlp);
        kernels::gemm_tn(dx_out.data(), a.gelu_out.data(), g.w_fc2.data(), d, s, hmlp, /*acc=*/true);
        for (int i = 0; i < s; ++i)
            for (int j = 0; j < d; ++j) g.b_fc2[static_cast<size_t>(j)] += dx_out.data()[static_cast<size_t>(i) * d + j];

        Tensor<T> d_fc1({s, hmlp});
        kernels::gelu_backward(a.fc1_out.data(), d_gelu.data(), d_fc1.data(), d_fc1.size());
        kernels::gemm_tn(d_fc1.data(), a.ln2_out.data(), g.w_fc1.data(), hmlp, s, d, /*acc=*/true);
        for (int i = 0; i < s; ++i)
            for (int j = 0; j < hmlp; ++j) g.b_fc1[static_cast<size_t>(j)] += d_fc1.data()[static_cast<size_t>(i) * hmlp + j];
        Tensor<T> d_ln2({s, d});
        kernels::gemm_nn(d_fc1.data(), l.w_fc1.data(), d_ln2.data(), s, hmlp, d);

        Tensor<T> d_resid1({s, d});
        kernels::layer_norm_backward(a.resid1.data(), l.ln2_g.data(), a.ln2_mean.data(), a.ln2_rstd.data(),
                                     d_ln2.data(), d_resid1.data(), g.ln2_g.data(), g.ln2_b.data(), s, d);
        for (size_t i = 0; i < d_resid1.size(); ++i) d_resid1[i] += dx_out[i];  // residual path

        // Attention branch: resid1 = x_in + attn_out W_out^T + b_out
        Tensor<T> d_attn_out({s, d});
        kernels::gemm_nn(d_resid1.data(), l.w_out.data(), d_attn_out.data(), s, d, d);
        kernels::gemm_tn(d_resid1.data(), a.attn_out.data(), g.w_out.data(), d, s, d, /*acc=*/true);
        for (int i = 0; i < s; ++i)
            for (int j = 0; j < d; ++j) g.b_out[static_cast<size_t>(j)] += d_resid1.data()[static_cast<size_t>(i) * d + j];

        Tensor<T> d_qkv({s, 3 * d});
        d_qkv.zero();
        const T* q = a.qkv.data();
        const T* kk = a.qkv.data() + d;
        const T* vv = a.qkv.data() + 2 * d;
        const int ld = 3 * d;
#pragma omp parallel for schedule(static) if (static_cast<long long>(m) * s * s * dh > kernels::detail::kParallelCutoff)
        for (int h = 0; h < m; ++h) {
            std::vector<T> dp(static_cast<size_t>(s) * s);
            for (int i = 0; i < s; ++i) {
                const T* drow = d_attn_out.data() + static_cast<size_t>(i) * d + static_cast<size_t>(h) * dh;
                for (int j = 0; j < s; ++j) {
                    const T* vrow = vv + static_cast<size_t>(j) * ld + static_cast<size_t>(h) * dh;
                    T x = T(0);
                    for (int e = 0; e < dh; ++e) x += drow[e] * vrow[e];
                    dp[static_cast<size_t>(i) * s + j] = x;
                }
            }
            // dV[j] = sum_i P[i][j] * dOut[i]
            for (int j = 0; j < s; ++j) {
                T* dvrow = d_qkv.data() + static_cast<size_t>(j) * ld + 2 * d + static_cast<size_t>(h) * dh;
                for (int i = 0; i < s; ++i) {
                    const T p = a.attn.data()[(static_cast<size_t>(h) * s + i) * s + j];
                    const T* drow = d_attn_out.data() + static_cast<size_t>(i) * d + static_cast<size_t>(h) * dh;
                    for (int e = 0; e < dh; ++e) dvrow[e] += p * drow[e];
                }
            }
            // Softmax backward row-wise, then dQ/dK.
            for (int i = 0; i < s; ++i) {
                const T* prow = a.attn.data() + (static_cast<size_t>(h) * s + i) * s;
                T* dprow = dp.data() + static_cast<size_t>(i) * s;
                T inner = T(0);
                for (int j = 0; j < s; ++j) inner += dprow[j] * prow[j];
                for (int j = 0; j < s; ++j) dprow[j] = (dprow[j] - inner) * prow[j] * scale;
            }
            for (int i = 0; i < s; ++i) {
                const T* dprow = dp.data() + static_cast<size_t>(i) * s;
                T* dqrow = d_qkv.data() + static_cast<size_t>(i) * ld + static_cast<size_t>(h) * dh;
                for (int j = 0; j < s; ++j) {
                    const T ds = dprow[j];
                    const T* krow = kk + static_cast<size_t>(j) * ld + static_cast<size_t>(h) * dh;
                    for (int e = 0; e < dh; ++e) dqrow[e] += ds * krow[e];
                }
            }
            for (int j = 0; j < s; ++j) {
                T* dkrow = d_qkv.data() + static_cast<size_t>(j) * ld + d + static_cast<size_t>(h) * dh;
                for (int i = 0; i < s; ++i) {
                    const T ds = dp[static_cast<size_t>(i) * s + j];
                    const T* qrow = q + static_cast<size_t>(i) * ld + static_cast<size_t>(h) * dh;
                    for (int e = 0; e < dh; ++e) dkrow[e] += ds * qrow[e];
                }
            }
        }

        kernels::gemm_tn(d_qkv.data(), a.ln1_out.data(), g.w_qkv.data(), 3 * d, s, d, /*acc=*/true);
        for (int i = 0; i < s; ++i)
            for (int j = 0; j < 3 * d; ++j)
                g.b_qkv[static_cast<size_t>(j)] += d_qkv.data()[static_cast<size_t>(i) * 3 * d + j];
        Tensor<T> d_ln1({s, d});
        kernels::gemm_nn(d_qkv.data(), l.w_qkv.data(), d_ln1.data(), s, 3 * d, d);

        dx_in.resize({s, d});
        kernels::layer_norm_backward(a.x_in.data(), l.ln1_g.data(), a.ln1_mean.data(), a.ln1_rstd.data(),
                                     d_ln1.data(), dx_in.data(), g.ln1_g.data(), g.ln1_b.data(), s, d);
        for (size_t i = 0; i < dx_in.size(); ++i) dx_in[i] += d_resid1[i];
    }
};

}  // namespace dvf::vit
