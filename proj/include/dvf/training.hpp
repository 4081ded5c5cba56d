// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "dvf/checkpoint.hpp"
#include "dvf/dataset.hpp"
#include "dvf/losses.hpp"
#include "dvf/optim.hpp"
#include "dvf/vit.hpp"

namespace dvf::train {

// The trainable artifact: encoder, token-importance generator, proxy bank,
// plus the selection flags baked into checkpoints.
template <typename T>
struct ModelBundle {
    vit::Model<T> encoder;
    svf::ImportanceGenerator<T> omega;
    ProxyBank<T> proxies;
    bool svf_enabled = true;
    int k = 12;
    bool omega_enabled = true;

    explicit ModelBundle(const vit::EncoderConfig& cfg) : encoder(cfg), omega(cfg.dim) {}

    void encode_image(const T* chw, vit::Activations<T>& act) const {
        vit::SvfHook<T> hook{k, omega_enabled ? &omega : nullptr};
        encoder.encode(chw, act, svf_enabled ? &hook : nullptr);
    }
};

// Optimizer slots over every trainable tensor; proxies carry their own
// learning-rate multiplier.
template <typename T>
std::vector<ParamSlot<T>> build_slots(vit::Params<T>& w, vit::Params<T>& g, svf::ImportanceGenerator<T>& ow,
                                      svf::ImportanceGenerator<T>& og, Tensor<T>* proxies, Tensor<T>* proxy_g,
                                      T proxy_lr_mult) {
    std::vector<ParamSlot<T>> slots;
    for_each_param(w, [&](const std::string& name, Tensor<T>& t) {
        slots.push_back({"encoder." + name, t.data(), nullptr, t.size(), T(1)});
    });
    size_t i = 0;
    for_each_param(g, [&](const std::string&, Tensor<T>& t) { slots[i++].g = t.data(); });
    slots.push_back({"svf.omega_w", ow.w.data(), og.w.data(), ow.w.size(), T(1)});
    slots.push_back({"svf.omega_b", &ow.b, &og.b, 1, T(1)});
    if (proxies != nullptr && proxies->size() > 0)
        slots.push_back({"proxies", proxies->data(), proxy_g->data(), proxies->size(), proxy_lr_mult});
    return slots;
}

ckpt::NamedTensors to_checkpoint(const ModelBundle<float>& model);
ModelBundle<float> from_checkpoint(const ckpt::NamedTensors& bundle);

struct TrainSettings {
    double lr = 3e-2;
    int batch_size = 32;
    int epochs = 10;
    double beta = 0.5;
    double proxy_lr_mult = 10.0;
    uint64_t seed = 17;
    bool dmt = true;  // color augmentation + contrastive term
    data::AugmentationPolicy policy = data::AugmentationPolicy::training_defaults();
    int crop = 224;
    int resize_to = 256;

    void validate() const;
};

struct TrainStats {
    long steps = 0;
    std::vector<double> epoch_mean_loss;
    double final_loss = 0.0;
};

// Seeded end-to-end loop: shuffle, augment, encode, ProxyNCA + contrastive
// (+ importance alignment for the generator), Adam with cosine annealing.
// Writes a JSONL step log and an atomic checkpoint per epoch; a non-finite
// loss aborts with NumericsError, leaving the last epoch's checkpoint intact.
TrainStats train(const data::DatasetManifest& manifest, ModelBundle<float>& model, const TrainSettings& settings,
                 const std::string& checkpoint_path, const std::string& log_path);

}  // namespace dvf::train
