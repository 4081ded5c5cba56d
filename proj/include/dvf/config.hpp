// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dvf/dataset.hpp"
#include "dvf/ovf.hpp"
#include "dvf/training.hpp"
#include "dvf/vit.hpp"

namespace dvf::cli {

// Parses the TOML subset used by config files: [section] / [a.b] headers,
// key = string | int | float | bool | [scalars], # comments.
nlohmann::json parse_toml(const std::string& text);
nlohmann::json parse_toml_file(const std::string& path);

// "section.key=value" override; value goes through the same scalar grammar,
// falling back to a raw string.
void apply_override(nlohmann::json& tree, const std::string& assignment);

struct RunConfig {
    struct {
        std::string root;
        std::string split_mode = "closed";
        double fraction = 0.5;
        std::string meta_category = "object";
    } dataset;

    struct {
        bool enabled = true;
        double alpha = 0.5;
        double enlarge_factor = 1.1;
        std::vector<int> aspect{3, 4};
        std::string provider = "fixture";  // "fixture" | "http"
        std::string endpoint = "http://127.0.0.1:8808/detect";
        std::string sidecar_root;
        std::string cache_dir;  // default: <output_dir>/detection_cache
        double timeout_s = 10.0;
        std::vector<int> pad_value{128, 128, 128};
    } ovf;

    struct {
        int image_size = 224;
        int patch_size = 16;
        int depth = 12;
        int dim = 768;
        int heads = 12;
        double mlp_ratio = 4.0;
        int k = 12;
        bool svf_enabled = true;
        bool importance_generator = true;
        std::string init_checkpoint;  // optional pretrained weights
    } model;

    struct {
        double lr = 3e-2;
        int batch_size = 32;
        int epochs = 10;
        double beta = 0.5;
        double proxy_lr_mult = 10.0;
        uint64_t seed = 17;
        bool dmt = true;
        double brightness = 0.4, contrast = 0.4, saturation = 0.4, hue = 0.1;
        double grayscale_prob = 0.2, blur_prob = 0.2;
        std::vector<double> blur_sigma{0.1, 2.0};
        double flip_prob = 0.5;
    } train;

    struct {
        std::vector<int> ks{1, 2, 4, 8};
    } eval;

    std::string output_dir = "runs/out";

    static RunConfig from_json(const nlohmann::json& tree);
    static RunConfig from_file(const std::string& path, const std::vector<std::string>& overrides = {});
    nlohmann::json to_json() const;
    void validate() const;

    vit::EncoderConfig encoder_config() const;
    ovf::OvfConfig ovf_config() const;
    data::AugmentationPolicy augmentation_policy() const;
    train::TrainSettings train_settings() const;
    std::string resolved_cache_dir() const;
};

}  // namespace dvf::cli
