// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dvf/commands.hpp"
#include "dvf/errors.hpp"
#include "testutil.hpp"

using namespace dvf;
using nlohmann::json;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

int run_binary(const std::string& args) {
    const std::string cmd = std::string(DVF_BINARY_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

// Small synthetic corpus + a config wired to it.
struct Fixture {
    TempDir tmp{"cli"};
    cli::RunConfig cfg;

    explicit Fixture(int classes = 4, int per_class = 6, int epochs = 1) {
        data::SynthSpec spec;
        spec.classes = classes;
        spec.per_class = per_class;
        spec.image_size = 128;
        spec.min_frac = 0.25;
        spec.max_frac = 0.45;
        spec.seed = 11;
        data::generate_corpus(tmp.file("corpus"), spec);

        cfg.dataset.root = tmp.file("corpus/images");
        cfg.dataset.meta_category = "shape";
        cfg.ovf.provider = "fixture";
        cfg.ovf.sidecar_root = tmp.file("corpus/detections");
        cfg.model.image_size = 64;
        cfg.model.patch_size = 16;
        cfg.model.depth = 2;
        cfg.model.dim = 16;
        cfg.model.heads = 2;
        cfg.model.mlp_ratio = 2.0;
        cfg.model.k = 8;
        cfg.train.lr = 2e-3;
        cfg.train.batch_size = 4;
        cfg.train.epochs = epochs;
        cfg.train.seed = 5;
        cfg.eval.ks = {1, 2};
        cfg.output_dir = tmp.file("run");
        cfg.validate();
    }
};

}  // namespace

TEST_CASE("toml subset parses sections, arrays, and scalars") {
    const std::string text = R"(
# top comment
output_dir = "runs/demo"   # trailing comment
[dataset]
root = "corpus"
fraction = 0.25
[model]
depth = 4
svf_enabled = true
[eval]
ks = [1, 2, 4]
)";
    const auto tree = cli::parse_toml(text);
    CHECK(tree.at("output_dir") == "runs/demo");
    CHECK(tree.at("dataset").at("root") == "corpus");
    CHECK(tree.at("dataset").at("fraction") == 0.25);
    CHECK(tree.at("model").at("depth") == 4);
    CHECK(tree.at("model").at("svf_enabled") == true);
    CHECK(tree.at("eval").at("ks") == json({1, 2, 4}));

    CHECK_THROWS_AS(cli::parse_toml("key"), ConfigurationError);
    CHECK_THROWS_AS(cli::parse_toml("[sec\nkey = 1"), ConfigurationError);
    CHECK_THROWS_AS(cli::parse_toml("key = \"unterminated"), ConfigurationError);
}

TEST_CASE("config defaults, overrides, and strictness") {
    auto tree = cli::parse_toml("");
    cli::apply_override(tree, "model.depth=3");
    cli::apply_override(tree, "dataset.root=somewhere");
    cli::apply_override(tree, "eval.ks=[1,4]");
    cli::apply_override(tree, "train.lr=0.001");
    const auto cfg = cli::RunConfig::from_json(tree);
    CHECK(cfg.model.depth == 3);
    CHECK(cfg.dataset.root == "somewhere");
    CHECK(cfg.eval.ks == std::vector<int>{1, 4});
    CHECK(cfg.train.lr == doctest::Approx(0.001));
    CHECK(cfg.model.dim == 768);  // untouched default

    auto bad = cli::parse_toml("[model]\nnot_a_key = 1\n");
    CHECK_THROWS_AS(cli::RunConfig::from_json(bad), ConfigurationError);
    auto bad2 = cli::parse_toml("[train]\nbeta = 1.5\n");
    CHECK_THROWS_AS(cli::RunConfig::from_json(bad2), ConfigurationError);
}

TEST_CASE("config json snapshot round-trips") {
    Fixture f;
    const auto j = f.cfg.to_json();
    const auto back = cli::RunConfig::from_json(j);
    CHECK(back.to_json() == j);
}

TEST_CASE("pipeline end-to-end on the synthetic corpus") {
    Fixture f;
    std::ostringstream log;

    const auto pre = cli::cmd_preprocess(f.cfg, log);
    CHECK(pre.total == 24);
    CHECK(pre.used_detection == 24);  // synthetic detections all clear the threshold
    CHECK(fs::exists(fs::path(f.cfg.output_dir) / "crop_manifest.json"));
    CHECK(fs::exists(fs::path(f.cfg.output_dir) / "preprocess.run.json"));

    const auto stats = cli::cmd_train(f.cfg, log);
    CHECK(stats.steps > 0);
    CHECK(fs::exists(fs::path(f.cfg.output_dir) / "checkpoint.dvfc"));
    CHECK(fs::exists(fs::path(f.cfg.output_dir) / "train_log.jsonl"));

    cli::cmd_embed(f.cfg, "test", log);
    CHECK(fs::exists(fs::path(f.cfg.output_dir) / "embeddings_test.dvfe"));

    const auto report = cli::cmd_eval(f.cfg, log);
    CHECK(report.per_query.size() == 12);  // half the corpus is the test split

    // printed table values come from the same report that landed on disk
    std::ifstream rj(fs::path(f.cfg.output_dir) / "eval_report.json");
    const auto disk = json::parse(rj);
    for (const auto& [k, v] : report.recall_at)
        CHECK(disk.at("recall_at").at(std::to_string(k)).get<double>() == doctest::Approx(v));

    // retrieve with an in-store query: rank-1 must not be the query itself
    const auto manifest = cli::resolve_manifest(f.cfg, true);
    const auto test_records = manifest.subset(data::Split::test);
    std::ostringstream out;
    cli::cmd_retrieve(f.cfg, test_records[0].path, 3, out);
    std::string line1;
    std::getline(std::stringstream(out.str()), line1);
    CHECK(line1.find(test_records[0].id) == std::string::npos);
    CHECK(!line1.empty());

    const auto viz = cli::cmd_viz_tokens(f.cfg, test_records[0].path, log);
    CHECK(viz.at("with_importance").at("ids").size() == 8);
    CHECK(fs::exists(fs::path(f.cfg.output_dir) / "viz"));
}

TEST_CASE("embedding determinism: same corpus embeds bit-identically") {
    Fixture f;
    std::ostringstream log;
    cli::cmd_preprocess(f.cfg, log);
    cli::cmd_train(f.cfg, log);
    const auto p1 = cli::cmd_embed(f.cfg, "test", log);
    const auto s1 = retrieval::EmbeddingStore::load(p1);
    const auto p2 = cli::cmd_embed(f.cfg, "test", log);
    const auto s2 = retrieval::EmbeddingStore::load(p2);
    CHECK(s1.matrix == s2.matrix);
    CHECK(s1.ids == s2.ids);
}

TEST_CASE("preprocess resumes after a provider failure, completing only the remainder") {
    Fixture f;
    std::ostringstream log;

    // Corrupt one sidecar mid-way through the sorted id order.
    const auto manifest = cli::resolve_manifest(f.cfg, false);
    const auto& victim = manifest.records[manifest.records.size() / 2];
    const fs::path sidecar = fs::path(f.cfg.ovf.sidecar_root) / (victim.id + ".json");
    std::string original;
    {
        std::ifstream in(sidecar);
        std::stringstream ss;
        ss << in.rdbuf();
        original = ss.str();
    }
    std::ofstream(sidecar.string()) << "{broken";

    CHECK_THROWS_AS(cli::cmd_preprocess(f.cfg, log), ProviderError);
    CHECK(fs::exists(fs::path(f.cfg.output_dir) / "crop_progress.jsonl"));

    std::ofstream(sidecar.string()) << original;
    const auto stats = cli::cmd_preprocess(f.cfg, log);
    CHECK(stats.total == 24);
    CHECK(stats.skipped_done == static_cast<int>(manifest.records.size() / 2));
    CHECK(stats.used_detection == 24);

    // summary accounting covers the whole corpus
    std::ifstream sj(fs::path(f.cfg.output_dir) / "preprocess_summary.json");
    const auto summary = json::parse(sj);
    CHECK(summary.at("total").get<int>() == 24);
    CHECK(summary.at("used_detection").get<int>() + summary.at("passthrough").get<int>() == 24);
}

TEST_CASE("preprocess passthrough keeps bytes identical when no detection clears alpha") {
    Fixture f;
    f.cfg.ovf.alpha = 0.999;  // synthetic scores top out below this
    std::ostringstream log;
    const auto stats = cli::cmd_preprocess(f.cfg, log);
    CHECK(stats.used_detection == 0);
    const auto manifest = cli::resolve_manifest(f.cfg, false);
    for (const auto& rec : manifest.records) {
        const fs::path processed =
            fs::path(f.cfg.output_dir) / "ovf_images" / (rec.id.substr(0, rec.id.find('/'))) /
            fs::path(rec.path).filename();
        std::ifstream a(rec.path, std::ios::binary), b(processed, std::ios::binary);
        std::vector<char> ba((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
        std::vector<char> bb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
        CHECK(ba == bb);
    }
}

TEST_CASE("ablate: empty toggles give one baseline row; svf at k=N matches baseline") {
    Fixture f;
    f.cfg.train.epochs = 0;  // seed-fixed initialization only; isolates the toggle wiring
    f.cfg.model.k = 16;      // equals N for a 64px image with 16px patches
    f.cfg.ovf.enabled = false;
    std::ostringstream log;

    const auto single = cli::cmd_ablate(f.cfg, {}, {}, log);
    CHECK(single.at("rows").size() == 1);
    CHECK(single.at("rows")[0].at("name") == "baseline");

    const auto report = cli::cmd_ablate(f.cfg, {"svf"}, {}, log);
    REQUIRE(report.at("rows").size() == 2);
    const auto base = report.at("rows")[0].at("recall");
    const auto svf_row = report.at("rows")[1].at("recall");
    for (const auto& [k, v] : base.items())
        CHECK(std::abs(v.get<double>() - svf_row.at(k).get<double>()) <= 1e-3);
}

TEST_CASE("ablate k sweep emits one row per k plus a curve file") {
    Fixture f;
    f.cfg.train.epochs = 0;
    f.cfg.ovf.enabled = false;
    std::ostringstream log;
    const auto report = cli::cmd_ablate(f.cfg, {}, {4, 8, 12, 16}, log);
    REQUIRE(report.contains("k_sweep"));
    CHECK(report.at("k_sweep").size() == 4);
    CHECK(fs::exists(fs::path(f.cfg.output_dir) / "ksweep.json"));
    CHECK(fs::exists(fs::path(f.cfg.output_dir) / "ablate_report.json"));
}

TEST_CASE("viz-tokens: k = N covers every patch; zero generator changes nothing") {
    Fixture f;
    f.cfg.model.k = 16;
    f.cfg.ovf.enabled = false;
    std::ostringstream log;
    cli::cmd_train(f.cfg, log);

    const auto manifest = cli::resolve_manifest(f.cfg, false);
    const auto viz = cli::cmd_viz_tokens(f.cfg, manifest.records[0].path, log);
    CHECK(viz.at("with_importance").at("ids").size() == 16);

    // zero-initialized generator: identical selections with and without it
    cli::RunConfig zero_cfg = f.cfg;
    zero_cfg.train.epochs = 0;
    zero_cfg.output_dir = f.tmp.file("run_zero");
    cli::cmd_train(zero_cfg, log);
    const auto zviz = cli::cmd_viz_tokens(zero_cfg, manifest.records[0].path, log);
    CHECK(zviz.at("with_importance").at("ids") == zviz.at("without_importance").at("ids"));
}

TEST_CASE("trained importance generator eventually changes a selection") {
    Fixture f(4, 6, 14);
    f.cfg.ovf.enabled = false;
    f.cfg.model.k = 6;
    std::ostringstream log;
    cli::cmd_train(f.cfg, log);

    const auto manifest = cli::resolve_manifest(f.cfg, false);
    bool any_differ = false;
    for (const auto& rec : manifest.records) {
        const auto viz = cli::cmd_viz_tokens(f.cfg, rec.path, log);
        if (viz.at("with_importance").at("ids") != viz.at("without_importance").at("ids")) {
            any_differ = true;
            break;
        }
    }
    CHECK(any_differ);
}

TEST_CASE("binary exit codes map error classes") {
    TempDir tmp("exit");
    // missing config file -> configuration error
    CHECK(run_binary("train -c " + tmp.file("nope.toml")) == 2);
    // bad dataset root -> configuration error
    CHECK(run_binary("train --set dataset.root=" + tmp.file("missing")) == 2);
    // eval without a store -> configuration error
    std::ofstream(tmp.file("min.toml")) << "output_dir = \"" + tmp.file("out") + "\"\n";
    CHECK(run_binary("eval -c " + tmp.file("min.toml")) == 2);
    // synth without --out -> CLI parse failure (nonzero, CLI11's own code)
    CHECK(run_binary("synth") != 0);
}

TEST_CASE("binary runs the pipeline end to end with exit code 0") {
    TempDir tmp("bin");
    CHECK(run_binary("synth --out " + tmp.file("corpus") + " --classes 2 --per-class 4 --image-size 96") == 0);

    std::ofstream cfg(tmp.file("cfg.toml"));
    cfg << "output_dir = \"" << tmp.file("run") << "\"\n";
    cfg << "[dataset]\nroot = \"" << tmp.file("corpus/images") << "\"\nmeta_category = \"shape\"\n";
    cfg << "[ovf]\nprovider = \"fixture\"\nsidecar_root = \"" << tmp.file("corpus/detections") << "\"\n";
    cfg << "[model]\nimage_size = 64\npatch_size = 16\ndepth = 2\ndim = 16\nheads = 2\nmlp_ratio = 2.0\nk = 8\n";
    cfg << "[train]\nlr = 0.002\nbatch_size = 2\nepochs = 1\nseed = 3\n";
    cfg << "[eval]\nks = [1, 2]\n";
    cfg.close();

    const std::string base = "-c " + tmp.file("cfg.toml");
    CHECK(run_binary("preprocess " + base) == 0);
    CHECK(run_binary("train " + base) == 0);
    CHECK(run_binary("embed " + base) == 0);
    CHECK(run_binary("eval " + base) == 0);
    CHECK(fs::exists(tmp.file("run/eval_report.json")));
    CHECK(fs::exists(tmp.file("run/checkpoint.dvfc")));
    // provider failure surfaces as exit code 4
    fs::remove_all(tmp.file("corpus/detections"));
    fs::remove_all(tmp.file("run/ovf_images"));
    fs::remove(tmp.file("run/crop_progress.jsonl"));
    std::ofstream bad(tmp.file("cfg2.toml"));
    bad << "output_dir = \"" << tmp.file("run2") << "\"\n";
    bad << "[dataset]\nroot = \"" << tmp.file("corpus/images") << "\"\n";
    bad << "[ovf]\nprovider = \"http\"\nendpoint = \"http://127.0.0.1:1/detect\"\ntimeout_s = 0.3\n";
    bad.close();
    CHECK(run_binary("preprocess -c " + tmp.file("cfg2.toml")) == 4);
}
