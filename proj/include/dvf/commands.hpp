// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iostream>
#include <string>
#include <vector>

#include "dvf/config.hpp"
#include "dvf/retrieval.hpp"
#include "dvf/synth.hpp"
#include "dvf/training.hpp"

namespace dvf::cli {

struct SynthArgs {
    std::string out;
    data::SynthSpec spec;
};

void cmd_synth(const SynthArgs& args, std::ostream& out = std::cout);

struct PreprocessStats {
    int total = 0;
    int used_detection = 0;
    int passthrough = 0;
    int skipped_done = 0;  // already present in the progress file
};

// Offline crop pass over every image in the manifest; resumable via a
// progress file, aborts on provider failure without losing completed work.
PreprocessStats cmd_preprocess(const RunConfig& cfg, std::ostream& out = std::cout);

train::TrainStats cmd_train(const RunConfig& cfg, std::ostream& out = std::cout);

// Returns the written store path.
std::string cmd_embed(const RunConfig& cfg, const std::string& split = "test", std::ostream& out = std::cout);

retrieval::EvalReport cmd_eval(const RunConfig& cfg, std::ostream& out = std::cout);

void cmd_retrieve(const RunConfig& cfg, const std::string& query_path, int top_k, std::ostream& out = std::cout);

// Cumulative component ladder (baseline first), optional k sweep; each
// variant runs the full train/embed/eval pipeline under a shared seed.
nlohmann::json cmd_ablate(const RunConfig& cfg, const std::vector<std::string>& toggles,
                          const std::vector<int>& k_sweep = {}, std::ostream& out = std::cout);

// Selected-token overlay plus the selection scores with and without the
// importance generator.
nlohmann::json cmd_viz_tokens(const RunConfig& cfg, const std::string& image_path, std::ostream& out = std::cout);

// Shared plumbing, exposed for tests.
data::DatasetManifest resolve_manifest(const RunConfig& cfg, bool remap_to_preprocessed);
train::ModelBundle<float> load_model(const RunConfig& cfg);
std::vector<float> embed_image_file(const RunConfig& cfg, const train::ModelBundle<float>& model,
                                    const std::string& path);

}  // namespace dvf::cli
