// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvf/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "dvf/detector.hpp"
#include "dvf/errors.hpp"
#include "dvf/ovf.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dvf::cli {

namespace {

void write_run_snapshot(const RunConfig& cfg, const std::string& command, const json& extra) {
    fs::create_directories(cfg.output_dir);
    json j;
    j["command"] = command;
    j["config"] = cfg.to_json();
    j["args"] = extra;
    std::ofstream out(fs::path(cfg.output_dir) / (command + ".run.json"));
    out << j.dump(2) << "\n";
}

std::unique_ptr<det::DetectionProvider> make_provider(const RunConfig& cfg) {
    std::unique_ptr<det::DetectionProvider> inner;
    if (cfg.ovf.provider == "fixture") {
        if (cfg.ovf.sidecar_root.empty())
            throw ConfigurationError("ovf.provider is 'fixture' but ovf.sidecar_root is not set");
        inner = det::fixture_provider(cfg.ovf.sidecar_root);
    } else {
        inner = det::http_provider(cfg.ovf.endpoint, cfg.ovf.timeout_s);
    }
    return det::cached(std::move(inner), cfg.resolved_cache_dir());
}

std::string preprocessed_path(const RunConfig& cfg, const data::ImageRecord& rec) {
    return (fs::path(cfg.output_dir) / "ovf_images" / rec.id.substr(0, rec.id.find('/')) /
            fs::path(rec.path).filename())
        .string();
}

std::string table_row(const std::string& name, const std::map<int, double>& recall) {
    std::ostringstream ss;
    ss << std::left << std::setw(34) << name << std::right;
    for (const auto& [k, v] : recall) ss << std::setw(9) << std::fixed << std::setprecision(4) << v;
    return ss.str();
}

std::string table_header(const std::map<int, double>& recall) {
    std::ostringstream ss;
    ss << std::left << std::setw(34) << "setting" << std::right;
    for (const auto& [k, v] : recall) ss << std::setw(9) << ("R@" + std::to_string(k));
    return ss.str();
}

}  // namespace

data::DatasetManifest resolve_manifest(const RunConfig& cfg, bool remap_to_preprocessed) {
    auto manifest = data::build_manifest(cfg.dataset.root, data::split_mode_from_string(cfg.dataset.split_mode),
                                         cfg.dataset.fraction, cfg.dataset.meta_category);
    if (remap_to_preprocessed && cfg.ovf.enabled) {
        for (auto& rec : manifest.records) {
            const std::string mapped = preprocessed_path(cfg, rec);
            if (!fs::exists(mapped))
                throw ConfigurationError("preprocessed image missing for '" + rec.id +
                                         "'; run `dvf preprocess` first (expected " + mapped + ")");
            rec.path = mapped;
        }
    }
    return manifest;
}

train::ModelBundle<float> load_model(const RunConfig& cfg) {
    const fs::path ckpt_path = fs::path(cfg.output_dir) / "checkpoint.dvfc";
    if (!fs::exists(ckpt_path))
        throw ConfigurationError("checkpoint not found at " + ckpt_path.string() + "; run `dvf train` first");
    return train::from_checkpoint(ckpt::load(ckpt_path.string()));
}

std::vector<float> embed_image_file(const RunConfig& cfg, const train::ModelBundle<float>& model,
                                    const std::string& path) {
    const auto settings = cfg.train_settings();
    cv::Mat rgb8 = img::load_rgb8(path);
    cv::Mat f = img::to_float(rgb8);
    f = data::resize_crop(f, /*train_mode=*/false, nullptr, settings.crop, settings.resize_to);
    const auto chw = img::to_chw_norm(f);
    vit::Activations<float> act;
    model.encode_image(chw.data(), act);
    return {act.embedding.data(), act.embedding.data() + model.encoder.cfg.dim};
}

void cmd_synth(const SynthArgs& args, std::ostream& out) {
    if (args.out.empty()) throw ConfigurationError("synth: --out is required");
    data::generate_corpus(args.out, args.spec);
    json snapshot = {{"out", args.out},
                     {"classes", args.spec.classes},
                     {"per_class", args.spec.per_class},
                     {"image_size", args.spec.image_size},
                     {"min_frac", args.spec.min_frac},
                     {"max_frac", args.spec.max_frac},
                     {"clutter", args.spec.clutter},
                     {"seed", args.spec.seed}};
    fs::create_directories(args.out);
    std::ofstream snap(fs::path(args.out) / "synth.run.json");
    snap << snapshot.dump(2) << "\n";
    out << "synth: wrote " << args.spec.classes << " classes x " << args.spec.per_class << " images under "
        << args.out << "\n";
}

PreprocessStats cmd_preprocess(const RunConfig& cfg, std::ostream& out) {
    write_run_snapshot(cfg, "preprocess", json::object());
    auto manifest = resolve_manifest(cfg, /*remap=*/false);
    manifest.save((fs::path(cfg.output_dir) / "manifest.json").string());

    const fs::path progress_path = fs::path(cfg.output_dir) / "crop_progress.jsonl";
    std::set<std::string> done;
    std::vector<json> entries;
    if (fs::exists(progress_path)) {
        std::ifstream in(progress_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded()) continue;  // torn tail line from an aborted run
            done.insert(j.at("id").get<std::string>());
            entries.push_back(std::move(j));
        }
    }

    auto provider = make_provider(cfg);
    const auto ovf_cfg = cfg.ovf_config();
    std::ofstream progress(progress_path, std::ios::app);
    if (!progress) throw DataError("cannot open progress file: " + progress_path.string());

    PreprocessStats stats;
    stats.total = static_cast<int>(manifest.records.size());
    for (const auto& rec : manifest.records) {
        if (done.count(rec.id) != 0) {
            ++stats.skipped_done;
            continue;
        }
        const fs::path dst = preprocessed_path(cfg, rec);
        fs::create_directories(dst.parent_path());

        cv::Mat rgb8 = img::load_rgb8(rec.path);
        const auto detections = provider->detect(rgb8, rec.id, cfg.dataset.meta_category);
        auto [processed, spec] = ovf::apply_ovf(rgb8, detections, ovf_cfg);

        if (spec.used_detection) {
            img::save_png_rgb8(dst.string(), processed);
        } else {
            // Below-threshold and undetected images pass through byte-identically.
            fs::copy_file(rec.path, dst, fs::copy_options::overwrite_existing);
        }

        json entry = {{"id", rec.id},
                      {"used_detection", spec.used_detection},
                      {"source_box", {spec.source_box.x1, spec.source_box.y1, spec.source_box.x2, spec.source_box.y2}},
                      {"padded_size", {spec.padded_w, spec.padded_h}},
                      {"score", spec.top_score}};
        progress << entry.dump() << "\n";
        progress.flush();
        entries.push_back(std::move(entry));
    }

    std::sort(entries.begin(), entries.end(),
              [](const json& a, const json& b) { return a.at("id").get<std::string>() < b.at("id").get<std::string>(); });
    for (const auto& e : entries)
        if (e.at("used_detection").get<bool>())
            ++stats.used_detection;
    stats.passthrough = stats.total - stats.used_detection;

    json crop_manifest = entries;
    std::ofstream cm(fs::path(cfg.output_dir) / "crop_manifest.json");
    cm << crop_manifest.dump(2) << "\n";

    json summary = {{"total", stats.total},
                    {"used_detection", stats.used_detection},
                    {"passthrough", stats.passthrough},
                    {"used_detection_rate", stats.total > 0 ? static_cast<double>(stats.used_detection) / stats.total : 0.0}};
    std::ofstream sm(fs::path(cfg.output_dir) / "preprocess_summary.json");
    sm << summary.dump(2) << "\n";
    out << "preprocess: " << stats.total << " images, " << stats.used_detection << " cropped, " << stats.passthrough
        << " passed through (rate " << std::fixed << std::setprecision(3)
        << summary["used_detection_rate"].get<double>() << ")\n";
    return stats;
}

train::TrainStats cmd_train(const RunConfig& cfg, std::ostream& out) {
    write_run_snapshot(cfg, "train", json::object());
    const auto manifest = resolve_manifest(cfg, /*remap=*/true);

    train::ModelBundle<float> model(cfg.encoder_config());
    model.svf_enabled = cfg.model.svf_enabled;
    model.k = cfg.model.k;
    model.omega_enabled = cfg.model.importance_generator;
    if (!cfg.model.init_checkpoint.empty()) {
        auto pretrained = train::from_checkpoint(ckpt::load(cfg.model.init_checkpoint));
        model.encoder.params = pretrained.encoder.params;
        model.omega = pretrained.omega;
    } else {
        Rng init_rng(Rng::mix(cfg.train.seed, 1));
        model.encoder.init(init_rng);
        // omega stays zero-initialized: training starts from attention-only ranking
    }

    const auto stats = train::train(manifest, model, cfg.train_settings(),
                                    (fs::path(cfg.output_dir) / "checkpoint.dvfc").string(),
                                    (fs::path(cfg.output_dir) / "train_log.jsonl").string());
    out << "train: " << stats.steps << " steps";
    if (!stats.epoch_mean_loss.empty()) out << ", final epoch mean loss " << stats.epoch_mean_loss.back();
    out << "\n";
    return stats;
}

std::string cmd_embed(const RunConfig& cfg, const std::string& split, std::ostream& out) {
    write_run_snapshot(cfg, "embed", {{"split", split}});
    const auto model = load_model(cfg);
    const auto manifest = resolve_manifest(cfg, /*remap=*/true);
    const auto records = manifest.subset(data::split_from_string(split));

    auto store = retrieval::embed_corpus(records, model.encoder.cfg.dim, [&](const data::ImageRecord& rec) {
        return embed_image_file(cfg, model, rec.path);
    });
    const std::string path = (fs::path(cfg.output_dir) / ("embeddings_" + split + ".dvfe")).string();
    store.save(path);
    out << "embed: " << store.count() << " embeddings (dim " << store.dim << ") -> " << path << "\n";
    return path;
}

retrieval::EvalReport cmd_eval(const RunConfig& cfg, std::ostream& out) {
    write_run_snapshot(cfg, "eval", json::object());
    const fs::path store_path = fs::path(cfg.output_dir) / "embeddings_test.dvfe";
    if (!fs::exists(store_path))
        throw ConfigurationError("embedding store not found at " + store_path.string() + "; run `dvf embed` first");
    const auto store = retrieval::EmbeddingStore::load(store_path.string());

    auto report = retrieval::recall_at_k(store, cfg.eval.ks);
    report.config_snapshot = cfg.to_json();
    std::ofstream rj(fs::path(cfg.output_dir) / "eval_report.json");
    rj << report.to_json().dump(2) << "\n";

    out << table_header(report.recall_at) << "\n" << table_row("recall", report.recall_at) << "\n";
    for (const auto& w : report.warnings) out << "warning: " << w << "\n";
    return report;
}

void cmd_retrieve(const RunConfig& cfg, const std::string& query_path, int top_k, std::ostream& out) {
    write_run_snapshot(cfg, "retrieve", {{"query", query_path}, {"top_k", top_k}});
    const fs::path store_path = fs::path(cfg.output_dir) / "embeddings_test.dvfe";
    if (!fs::exists(store_path))
        throw ConfigurationError("embedding store not found at " + store_path.string() + "; run `dvf embed` first");
    const auto store = retrieval::EmbeddingStore::load(store_path.string());
    const auto model = load_model(cfg);
    const auto q = embed_image_file(cfg, model, query_path);

    // Self-exclusion by manifest id (class_dir/file_stem) when the query file
    // is part of the indexed corpus.
    const fs::path qp(query_path);
    const std::string query_id = qp.parent_path().filename().string() + "/" + qp.stem().string();

    std::vector<std::pair<float, int>> scored;
    for (int i = 0; i < store.count(); ++i) {
        if (store.ids[static_cast<size_t>(i)] == query_id) continue;
        const float* r = store.row(i);
        float s = 0.0f;
        for (int j = 0; j < store.dim; ++j) s += q[static_cast<size_t>(j)] * r[j];
        scored.push_back({s, i});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    const int n = std::min<int>(top_k, static_cast<int>(scored.size()));
    for (int r = 0; r < n; ++r)
        out << (r + 1) << "  " << store.ids[static_cast<size_t>(scored[static_cast<size_t>(r)].second)] << "  "
            << std::fixed << std::setprecision(4) << scored[static_cast<size_t>(r)].first << "\n";
}

namespace {

RunConfig variant_config(const RunConfig& base, const std::string& name, bool ovf_on, bool svf_on, bool dmt_on,
                         bool omega_on, int k) {
    RunConfig v = base;
    v.output_dir = (fs::path(base.output_dir) / "ablate" / name).string();
    v.ovf.enabled = ovf_on;
    v.ovf.cache_dir = base.resolved_cache_dir();  // share detections across variants
    v.model.svf_enabled = svf_on;
    v.model.importance_generator = omega_on;
    v.train.dmt = dmt_on;
    v.model.k = k;
    return v;
}

std::map<int, double> run_variant(const RunConfig& v, std::ostream& out) {
    out << "--- variant " << fs::path(v.output_dir).filename().string() << "\n";
    if (v.ovf.enabled) cmd_preprocess(v, out);
    cmd_train(v, out);
    cmd_embed(v, "test", out);
    return cmd_eval(v, out).recall_at;
}

}  // namespace

json cmd_ablate(const RunConfig& cfg, const std::vector<std::string>& toggles, const std::vector<int>& k_sweep,
                std::ostream& out) {
    static const std::set<std::string> known{"ovf", "svf", "dmt", "importance_generator"};
    for (const auto& t : toggles)
        if (known.count(t) == 0) throw ConfigurationError("unknown ablation toggle: " + t);
    write_run_snapshot(cfg, "ablate", {{"toggles", toggles}, {"k_sweep", k_sweep}});

    struct Row {
        std::string name;
        bool ovf = false, svf = false, dmt = false, omega = false;
        int k;
    };
    std::vector<Row> rows;
    Row cur;
    cur.name = "baseline";
    cur.k = cfg.model.k;
    rows.push_back(cur);
    for (const auto& t : toggles) {  // cumulative ladder
        if (t == "ovf") cur.ovf = true;
        if (t == "svf") cur.svf = true;
        if (t == "dmt") cur.dmt = true;
        if (t == "importance_generator") {
            cur.omega = true;
            cur.svf = true;  // the generator only acts through token selection
        }
        cur.name = rows.back().name + "+" + t;
        rows.push_back(cur);
    }

    json report;
    report["rows"] = json::array();
    std::map<int, double> first_recall;
    for (const auto& row : rows) {
        const auto v = variant_config(cfg, row.name, row.ovf, row.svf, row.dmt, row.omega, row.k);
        const auto recall = run_variant(v, out);
        if (first_recall.empty()) first_recall = recall;
        json rj = {{"name", row.name},
                   {"toggles", {{"ovf", row.ovf}, {"svf", row.svf}, {"dmt", row.dmt}, {"importance_generator", row.omega}}},
                   {"recall", json::object()}};
        for (const auto& [k, val] : recall) rj["recall"][std::to_string(k)] = val;
        report["rows"].push_back(rj);
    }

    if (!k_sweep.empty()) {
        report["k_sweep"] = json::array();
        const Row& last = rows.back();
        for (int k : k_sweep) {
            const auto v = variant_config(cfg, "k=" + std::to_string(k), last.ovf, /*svf=*/true, last.dmt,
                                          last.omega, k);
            const auto recall = run_variant(v, out);
            json kj = {{"k", k}, {"recall", json::object()}};
            for (const auto& [kk, val] : recall) kj["recall"][std::to_string(kk)] = val;
            report["k_sweep"].push_back(kj);
        }
        std::ofstream ks(fs::path(cfg.output_dir) / "ksweep.json");
        ks << report["k_sweep"].dump(2) << "\n";
    }

    std::ofstream rj(fs::path(cfg.output_dir) / "ablate_report.json");
    rj << report.dump(2) << "\n";

    out << "\n" << table_header(first_recall) << "\n";
    for (const auto& row : report["rows"]) {
        std::map<int, double> recall;
        for (const auto& [k, v] : row["recall"].items()) recall[std::stoi(k)] = v.get<double>();
        out << table_row(row["name"].get<std::string>(), recall) << "\n";
    }
    return report;
}

json cmd_viz_tokens(const RunConfig& cfg, const std::string& image_path, std::ostream& out) {
    write_run_snapshot(cfg, "viz-tokens", {{"image", image_path}});
    const auto model = load_model(cfg);
    const auto settings = cfg.train_settings();

    cv::Mat rgb8 = img::load_rgb8(image_path);
    cv::Mat f = img::to_float(rgb8);
    f = data::resize_crop(f, false, nullptr, settings.crop, settings.resize_to);
    const auto chw = img::to_chw_norm(f);

    vit::Activations<float> act;
    vit::SvfHook<float> with{model.k, &model.omega};
    model.encoder.encode(chw.data(), act, &with);
    const auto sel_with = act.selection;
    vit::SvfHook<float> without{model.k, nullptr};
    model.encoder.encode(chw.data(), act, &without);
    const auto sel_without = act.selection;

    auto selection_json = [](const svf::Selection<float>& s) {
        json j;
        j["ids"] = s.ids;
        j["fused_score"] = s.fused;
        j["semantic_score"] = s.semantic;
        if (!s.importance.empty()) j["importance"] = s.importance;
        return j;
    };

    // Side-by-side panels: attention-only selection left, fused right.
    const int side = model.encoder.cfg.patches_per_side();
    const int ps = settings.crop / side;
    cv::Mat base = img::to_u8(f);
    auto panel = [&](const std::vector<int>& ids) {
        cv::Mat p = base.clone();
        std::vector<bool> sel(static_cast<size_t>(side * side), false);
        for (int id : ids) sel[static_cast<size_t>(id)] = true;
        for (int t = 0; t < side * side; ++t) {
            const cv::Rect cell((t % side) * ps, (t / side) * ps, ps, ps);
            if (!sel[static_cast<size_t>(t)]) {
                p(cell) *= 0.35;
            } else {
                cv::rectangle(p, cell, cv::Scalar(40, 255, 60), 1);
            }
        }
        return p;
    };
    cv::Mat composite(settings.crop, settings.crop * 2 + 4, CV_8UC3, cv::Scalar(255, 255, 255));
    panel(sel_without.ids).copyTo(composite(cv::Rect(0, 0, settings.crop, settings.crop)));
    panel(sel_with.ids).copyTo(composite(cv::Rect(settings.crop + 4, 0, settings.crop, settings.crop)));

    const fs::path viz_dir = fs::path(cfg.output_dir) / "viz";
    fs::create_directories(viz_dir);
    const std::string stem = fs::path(image_path).stem().string();
    img::save_png_rgb8((viz_dir / (stem + "_tokens.png")).string(), composite);

    json j;
    j["image"] = image_path;
    j["k"] = model.k;
    j["with_importance"] = selection_json(sel_with);
    j["without_importance"] = selection_json(sel_without);
    std::ofstream sj(viz_dir / (stem + "_selection.json"));
    sj << j.dump(2) << "\n";
    out << "viz-tokens: wrote " << (viz_dir / (stem + "_tokens.png")).string() << "\n";
    return j;
}

}  // namespace dvf::cli
