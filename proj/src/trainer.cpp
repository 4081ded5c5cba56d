// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "dvf/errors.hpp"
#include "dvf/image.hpp"
#include "dvf/training.hpp"

using nlohmann::json;

namespace dvf::train {

void TrainSettings::validate() const {
    if (!(beta >= 0.0 && beta < 1.0)) throw ConfigurationError("contrastive margin beta must be in [0,1)");
    if (batch_size < 2) throw ConfigurationError("batch size must be >= 2");
    if (epochs < 0) throw ConfigurationError("epochs must be >= 0");
    if (lr < 0.0) throw ConfigurationError("learning rate must be >= 0");
    policy.validate();
}

ckpt::NamedTensors to_checkpoint(const ModelBundle<float>& model) {
    ckpt::NamedTensors out;
    auto& params = const_cast<vit::Params<float>&>(model.encoder.params);
    for_each_param(params, [&](const std::string& name, Tensor<float>& t) { out.tensors["encoder." + name] = t; });
    out.tensors["svf.omega_w"] = model.omega.w;
    Tensor<float> ob({1});
    ob[0] = model.omega.b;
    out.tensors["svf.omega_b"] = ob;
    if (model.proxies.rows() > 0) out.tensors["proxies"] = model.proxies.p;

    const auto& cfg = model.encoder.cfg;
    out.meta["encoder"] = {{"image_size", cfg.image_size}, {"patch_size", cfg.patch_size}, {"depth", cfg.depth},
                           {"dim", cfg.dim},               {"heads", cfg.heads},           {"mlp_ratio", cfg.mlp_ratio}};
    out.meta["svf_enabled"] = model.svf_enabled;
    out.meta["k"] = model.k;
    out.meta["omega_enabled"] = model.omega_enabled;
    out.meta["proxy_labels"] = model.proxies.labels;
    return out;
}

ModelBundle<float> from_checkpoint(const ckpt::NamedTensors& bundle) {
    const auto& ej = bundle.meta.at("encoder");
    vit::EncoderConfig cfg;
    cfg.image_size = ej.at("image_size").get<int>();
    cfg.patch_size = ej.at("patch_size").get<int>();
    cfg.depth = ej.at("depth").get<int>();
    cfg.dim = ej.at("dim").get<int>();
    cfg.heads = ej.at("heads").get<int>();
    cfg.mlp_ratio = ej.at("mlp_ratio").get<float>();

    ModelBundle<float> model(cfg);
    model.svf_enabled = bundle.meta.at("svf_enabled").get<bool>();
    model.k = bundle.meta.at("k").get<int>();
    model.omega_enabled = bundle.meta.at("omega_enabled").get<bool>();

    for_each_param(model.encoder.params, [&](const std::string& name, Tensor<float>& t) {
        const auto it = bundle.tensors.find("encoder." + name);
        if (it == bundle.tensors.end()) throw DataError("checkpoint missing tensor: encoder." + name);
        if (it->second.shape != t.shape) throw ShapeError("checkpoint shape mismatch for encoder." + name);
        t = it->second;
    });
    model.omega.w = bundle.tensors.at("svf.omega_w");
    model.omega.b = bundle.tensors.at("svf.omega_b")[0];

    const auto labels = bundle.meta.at("proxy_labels").get<std::vector<int>>();
    if (!labels.empty()) {
        model.proxies.dim = cfg.dim;
        model.proxies.labels = labels;
        for (size_t r = 0; r < labels.size(); ++r) model.proxies.index[labels[r]] = static_cast<int>(r);
        model.proxies.p = bundle.tensors.at("proxies");
        if (model.proxies.p.shape != std::vector<int>{static_cast<int>(labels.size()), cfg.dim})
            throw ShapeError("checkpoint proxy bank shape mismatch");
    }
    return model;
}

namespace {

struct SampleTensor {
    std::vector<float> chw;
};

cv::Mat load_cached(std::unordered_map<std::string, cv::Mat>& cache, const std::string& path) {
    auto it = cache.find(path);
    if (it != cache.end()) return it->second;
    cv::Mat m = img::load_rgb8(path);
    cache.emplace(path, m);
    return m;
}

}  // namespace

TrainStats train(const data::DatasetManifest& manifest, ModelBundle<float>& model, const TrainSettings& settings,
                 const std::string& checkpoint_path, const std::string& log_path) {
    settings.validate();
    const auto records = manifest.subset(data::Split::train);
    if (records.empty()) throw ManifestError("train split is empty");

    const int dim = model.encoder.cfg.dim;
    const int depth = model.encoder.cfg.depth;

    if (model.proxies.rows() == 0) {
        Rng proxy_rng(Rng::mix(settings.seed, 2));
        model.proxies.init(manifest.label_set(data::Split::train), dim, proxy_rng);
    }

    // Color transforms belong to the discriminative-training toggle; random
    // crop and flip are part of baseline training.
    data::AugmentationPolicy policy = settings.policy;
    if (!settings.dmt) {
        const double flip = policy.flip_prob;
        policy = data::AugmentationPolicy{};
        policy.flip_prob = flip;
    }

    vit::Params<float> grads;
    model.encoder.allocate(grads);
    svf::ImportanceGenerator<float> omega_grad(dim);
    Tensor<float> proxy_grad(
        {model.proxies.rows(), dim});
    Adam<float> adam(build_slots<float>(model.encoder.params, grads, model.omega, omega_grad, &model.proxies.p,
                                        &proxy_grad, static_cast<float>(settings.proxy_lr_mult)));

    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw DataError("cannot write training log: " + log_path);

    const int n = static_cast<int>(records.size());
    const long steps_per_epoch = (n + settings.batch_size - 1) / settings.batch_size;
    const long total_steps = steps_per_epoch * settings.epochs;

    ckpt::save(checkpoint_path, to_checkpoint(model));  // last-good exists from step one

    std::unordered_map<std::string, cv::Mat> decode_cache;
    Rng shuffle_rng(Rng::mix(settings.seed, 3));
    const bool align_omega = model.svf_enabled && model.omega_enabled;

    TrainStats stats;
    long step = 0;
    vit::Activations<float> act;

    for (int epoch = 0; epoch < settings.epochs; ++epoch) {
        std::vector<int> order(records.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        shuffle_rng.shuffle(order.begin(), order.end());

        double epoch_loss_sum = 0.0;
        long epoch_batches = 0;

        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(settings.batch_size)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(settings.batch_size));
            const int b = static_cast<int>(end - start);
            if (b < 2) continue;  // a trailing singleton cannot form a batch

            std::vector<SampleTensor> batch(static_cast<size_t>(b));
            std::vector<int> labels(static_cast<size_t>(b));
            for (int i = 0; i < b; ++i) {
                const auto& rec = records[static_cast<size_t>(order[start + static_cast<size_t>(i)])];
                labels[static_cast<size_t>(i)] = rec.label;
                Rng draw(Rng::mix(Rng::mix(settings.seed, 4),
                                  static_cast<uint64_t>(epoch) * 1000003ULL +
                                      static_cast<uint64_t>(order[start + static_cast<size_t>(i)])));
                cv::Mat rgb8 = load_cached(decode_cache, rec.path);
                cv::Mat f = img::to_float(rgb8);
                f = data::augment(f, policy, draw);
                f = data::resize_crop(f, /*train_mode=*/true, &draw, settings.crop, settings.resize_to);
                batch[static_cast<size_t>(i)].chw = img::to_chw_norm(f);
            }

            // Pass 1: embeddings for the whole batch.
            std::vector<float> embs(static_cast<size_t>(b) * dim);
            for (int i = 0; i < b; ++i) {
                model.encode_image(batch[static_cast<size_t>(i)].chw.data(), act);
                std::copy(act.embedding.data(), act.embedding.data() + dim,
                          embs.begin() + static_cast<size_t>(i) * dim);
            }

            // Losses and their gradients w.r.t. the normalized embeddings.
            adam.zero_grads();  // also clears proxy_grad (it is a slot)
            std::vector<float> d_embs(static_cast<size_t>(b) * dim, 0.0f);
            double loss_pnca = 0.0;
            {
                std::vector<float> d_pnca(static_cast<size_t>(b) * dim, 0.0f);
                for (int i = 0; i < b; ++i)
                    loss_pnca += proxynca_loss<float>(embs.data() + static_cast<size_t>(i) * dim,
                                                      labels[static_cast<size_t>(i)], model.proxies,
                                                      d_pnca.data() + static_cast<size_t>(i) * dim, &proxy_grad);
                loss_pnca /= b;
                const float inv_b = 1.0f / static_cast<float>(b);
                for (size_t i = 0; i < d_embs.size(); ++i) d_embs[i] += d_pnca[i] * inv_b;
                for (size_t i = 0; i < proxy_grad.size(); ++i) proxy_grad[i] *= inv_b;
            }
            double loss_con = 0.0;
            if (settings.dmt)
                loss_con = contrastive_loss<float>(embs.data(), labels.data(), b, dim,
                                                   static_cast<float>(settings.beta), d_embs.data());
            const double loss_total = loss_pnca + loss_con;
            if (!std::isfinite(loss_total))
                throw NumericsError("non-finite training loss at step " + std::to_string(step) +
                                    " (last-good checkpoint: " + checkpoint_path + ")");

            // Pass 2: re-encode per sample and backpropagate.
            double loss_imp = 0.0;
            for (int i = 0; i < b; ++i) {
                model.encode_image(batch[static_cast<size_t>(i)].chw.data(), act);
                model.encoder.backward(act, d_embs.data() + static_cast<size_t>(i) * dim, grads);
                if (align_omega && !act.selection.importance.empty()) {
                    std::vector<float> dz(act.selection.importance.size(), 0.0f);
                    loss_imp += importance_alignment_loss<float>(act.selection.importance, act.selection.semantic,
                                                                 &dz) /
                                b;
                    for (auto& v : dz) v /= static_cast<float>(b);
                    const float* penult_tokens = act.layers[static_cast<size_t>(depth - 2)].x_out.data() + dim;
                    svf::token_importance_backward<float>(penult_tokens, act.selection.importance, dz, omega_grad,
                                                          dim);
                }
            }

            const double lr_t = cosine_lr(settings.lr, step, total_steps);
            adam.step(static_cast<float>(lr_t));
            ++step;
            epoch_loss_sum += loss_total;
            ++epoch_batches;

            json line = {{"step", step},          {"epoch", epoch},          {"lr", lr_t},
                         {"loss_pnca", loss_pnca}, {"loss_con", loss_con},   {"loss_imp", loss_imp},
                         {"loss_total", loss_total}};
            log << line.dump() << "\n";
            stats.final_loss = loss_total;
        }

        stats.epoch_mean_loss.push_back(epoch_batches > 0 ? epoch_loss_sum / static_cast<double>(epoch_batches)
                                                          : 0.0);
        ckpt::save(checkpoint_path, to_checkpoint(model));
        log.flush();
    }

    stats.steps = step;
    return stats;
}

}  // namespace dvf::train
