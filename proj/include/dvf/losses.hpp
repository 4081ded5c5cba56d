// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <unordered_map>
#include <vector>

#include "dvf/errors.hpp"
#include "dvf/rng.hpp"
#include "dvf/tensor.hpp"

namespace dvf::train {

// One learnable proxy row per training subcategory. Rows are stored raw and
// L2-normalized inside the loss, so optimizer updates stay unconstrained.
template <typename T>
struct ProxyBank {
    int dim = 0;
    std::vector<int> labels;             // row -> label
    std::unordered_map<int, int> index;  // label -> row
    Tensor<T> p;                         // [C x dim]

    void init(const std::vector<int>& class_labels, int d, Rng& rng) {
        dim = d;
        labels = class_labels;
        index.clear();
        p.resize({static_cast<int>(labels.size()), d});
        for (size_t r = 0; r < labels.size(); ++r) {
            index[labels[r]] = static_cast<int>(r);
            T norm = T(0);
            T* row = p.data() + r * static_cast<size_t>(d);
            for (int j = 0; j < d; ++j) {
                row[j] = static_cast<T>(rng.normal());
                norm += row[j] * row[j];
            }
            norm = std::sqrt(norm);
            for (int j = 0; j < d; ++j) row[j] /= norm;
        }
    }

    int rows() const { return static_cast<int>(labels.size()); }
};

// Negative log-softmax over negative squared distances between the (unit)
// embedding and the unit-normalized proxies. Gradients are optional and
// accumulated; d_proxies is with respect to the raw (unnormalized) rows.
template <typename T>
T proxynca_loss(const T* embedding, int label, const ProxyBank<T>& bank, T* d_embedding = nullptr,
                Tensor<T>* d_proxies = nullptr) {
    const auto it = bank.index.find(label);
    if (it == bank.index.end()) throw LabelError("proxynca_loss: label " + std::to_string(label) + " not in bank");
    const int target = it->second;
    const int c = bank.rows(), d = bank.dim;

    std::vector<T> norms(static_cast<size_t>(c));
    std::vector<T> dist(static_cast<size_t>(c));
    for (int r = 0; r < c; ++r) {
        const T* row = bank.p.data() + static_cast<size_t>(r) * d;
        T nn = T(0), dot = T(0);
        for (int j = 0; j < d; ++j) nn += row[j] * row[j];
        nn = std::sqrt(nn);
        if (!(nn > T(0))) throw NumericsError("proxynca_loss: zero-norm proxy row");
        for (int j = 0; j < d; ++j) dot += embedding[j] * row[j] / nn;
        norms[static_cast<size_t>(r)] = nn;
        dist[static_cast<size_t>(r)] = T(2) - T(2) * dot;  // squared distance of unit vectors
    }

    T zmax = -dist[0];
    for (int r = 1; r < c; ++r) zmax = std::max(zmax, -dist[static_cast<size_t>(r)]);
    T denom = T(0);
    std::vector<T> prob(static_cast<size_t>(c));
    for (int r = 0; r < c; ++r) {
        prob[static_cast<size_t>(r)] = std::exp(-dist[static_cast<size_t>(r)] - zmax);
        denom += prob[static_cast<size_t>(r)];
    }
    for (auto& pr : prob) pr /= denom;
    const T loss = dist[static_cast<size_t>(target)] + zmax + std::log(denom);

    if (d_embedding != nullptr || d_proxies != nullptr) {
        for (int r = 0; r < c; ++r) {
            // dL/dd_r, then d_r = 2 - 2 e.chat_r
            const T dl_dd = (r == target ? T(1) : T(0)) - prob[static_cast<size_t>(r)];
            const T* row = bank.p.data() + static_cast<size_t>(r) * d;
            const T nn = norms[static_cast<size_t>(r)];
            if (d_embedding != nullptr) {
                for (int j = 0; j < d; ++j) d_embedding[j] += dl_dd * T(-2) * row[j] / nn;
            }
            if (d_proxies != nullptr) {
                // through the row normalization: dc = (dchat - chat (chat.dchat)) / ||c||
                T chat_dot = T(0);
                for (int j = 0; j < d; ++j) chat_dot += (row[j] / nn) * (dl_dd * T(-2) * embedding[j]);
                T* grow = d_proxies->data() + static_cast<size_t>(r) * d;
                for (int j = 0; j < d; ++j) {
                    const T dchat = dl_dd * T(-2) * embedding[j];
                    grow[j] += (dchat - (row[j] / nn) * chat_dot) / nn;
                }
            }
        }
    }
    return loss;
}

// Batch margin loss over dot-product similarities: positive pairs pay
// (1 - sim), negative pairs pay max(sim - beta, 0), averaged by 1/B^2.
// Ordered pairs including i == j; self pairs contribute zero for unit rows.
template <typename T>
T contrastive_loss(const T* embeddings, const int* labels, int batch, int dim, T beta,
                   T* d_embeddings = nullptr) {
    if (batch < 2) throw ConfigurationError("contrastive_loss: batch size must be >= 2");
    const T inv_b2 = T(1) / (T(batch) * T(batch));
    T loss = T(0);
    for (int i = 0; i < batch; ++i) {
        for (int j = 0; j < batch; ++j) {
            const T* ei = embeddings + static_cast<size_t>(i) * dim;
            const T* ej = embeddings + static_cast<size_t>(j) * dim;
            T sim = T(0);
            for (int e = 0; e < dim; ++e) sim += ei[e] * ej[e];
            T coeff = T(0);  // dL/dsim for this ordered pair
            if (labels[i] == labels[j]) {
                loss += inv_b2 * (T(1) - sim);
                coeff = -inv_b2;
            } else if (sim > beta) {
                loss += inv_b2 * (sim - beta);
                coeff = inv_b2;
            }
            if (d_embeddings != nullptr && coeff != T(0)) {
                T* di = d_embeddings + static_cast<size_t>(i) * dim;
                T* dj = d_embeddings + static_cast<size_t>(j) * dim;
                for (int e = 0; e < dim; ++e) {
                    di[e] += coeff * ej[e];
                    dj[e] += coeff * ei[e];
                }
            }
        }
    }
    return loss;
}

// Trains the token-importance generator: the selection gather is
// piecewise-constant, so the retrieval objective alone leaves the generator
// without a learning signal. The generator instead regresses each token's
// sigmoid score onto the max-normalized class-attention mass of that token
// (treated as a constant target), learning a content-based importance scorer.
// Returns the mean squared error; d_z is accumulated when non-null.
template <typename T>
T importance_alignment_loss(const std::vector<T>& z, const std::vector<T>& semantic,
                            std::vector<T>* d_z = nullptr) {
    if (z.size() != semantic.size() || z.empty())
        throw ShapeError("importance_alignment_loss: score/attention length mismatch");
    const size_t n = z.size();
    T amax = semantic[0];
    for (size_t i = 1; i < n; ++i) amax = std::max(amax, semantic[i]);
    if (!(amax > T(0))) amax = T(1);
    T loss = T(0);
    for (size_t i = 0; i < n; ++i) {
        const T t = semantic[i] / amax;
        const T diff = z[i] - t;
        loss += diff * diff;
        if (d_z != nullptr) (*d_z)[i] += T(2) * diff / T(n);
    }
    return loss / T(n);
}

}  // namespace dvf::train
