// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dvf/commands.hpp"
#include "dvf/errors.hpp"

using namespace dvf;

int main(int argc, char** argv) {
    CLI::App app{"DVF fine-grained image retrieval pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // -c/--set may follow the subcommand name

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("-c,--config", config_path, "TOML config file");
    app.add_option("--set", overrides, "Override a config key: section.key=value")->take_all();

    // synth
    auto* synth = app.add_subcommand("synth", "Generate the bundled synthetic corpus");
    cli::SynthArgs synth_args;
    synth->add_option("--out", synth_args.out, "Output directory")->required();
    synth->add_option("--classes", synth_args.spec.classes, "Number of classes");
    synth->add_option("--per-class", synth_args.spec.per_class, "Images per class");
    synth->add_option("--image-size", synth_args.spec.image_size, "Image side in pixels");
    synth->add_option("--min-frac", synth_args.spec.min_frac, "Min object area fraction");
    synth->add_option("--max-frac", synth_args.spec.max_frac, "Max object area fraction");
    synth->add_option("--clutter", synth_args.spec.clutter, "Background distractor count");
    synth->add_option("--seed", synth_args.spec.seed, "Corpus seed");

    auto* preprocess = app.add_subcommand("preprocess", "Run the offline object-crop pass");
    auto* train_cmd = app.add_subcommand("train", "Train the retrieval model");
    auto* embed = app.add_subcommand("embed", "Embed a manifest split into a store");
    std::string embed_split = "test";
    embed->add_option("--split", embed_split, "Split to embed (train|test)");
    auto* eval = app.add_subcommand("eval", "Recall@K over the embedded test split");

    auto* retrieve = app.add_subcommand("retrieve", "Query the store with an image");
    std::string query_path;
    int top_k = 8;
    retrieve->add_option("query", query_path, "Query image path")->required();
    retrieve->add_option("--top-k", top_k, "Results to print");

    auto* ablate = app.add_subcommand("ablate", "Train/evaluate a component ladder");
    std::vector<std::string> toggles;
    std::vector<int> k_sweep;
    ablate->add_option("--toggles", toggles, "Cumulative toggles: ovf,svf,dmt,importance_generator")
        ->delimiter(',');
    ablate->add_option("--k-sweep", k_sweep, "Token-count sweep values")->delimiter(',');

    auto* viz = app.add_subcommand("viz-tokens", "Render selected tokens for an image");
    std::string viz_image;
    viz->add_option("image", viz_image, "Image path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            cli::cmd_synth(synth_args);
            return 0;
        }
        const auto cfg = cli::RunConfig::from_file(config_path, overrides);
        if (preprocess->parsed()) {
            cli::cmd_preprocess(cfg);
        } else if (train_cmd->parsed()) {
            cli::cmd_train(cfg);
        } else if (embed->parsed()) {
            cli::cmd_embed(cfg, embed_split);
        } else if (eval->parsed()) {
            cli::cmd_eval(cfg);
        } else if (retrieve->parsed()) {
            cli::cmd_retrieve(cfg, query_path, top_k);
        } else if (ablate->parsed()) {
            cli::cmd_ablate(cfg, toggles, k_sweep);
        } else if (viz->parsed()) {
            cli::cmd_viz_tokens(cfg, viz_image);
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
