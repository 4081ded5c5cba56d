// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
// the process exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <vector>

#include "dvf/commands.hpp"
#include "dvf/ovf.hpp"
#include "dvf/training.hpp"
#include "testutil.hpp"

using namespace dvf;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    std::string name;
    std::function<bool(std::string&)> run;
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. Selection identity: with the hook active and k = N, the retrieval
//    embedding matches the hook-free embedding within 1e-5 relative (float).
// ---------------------------------------------------------------------------
bool criterion_permutation_identity(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    vit::EncoderConfig cfg;
    cfg.image_size = 64;
    cfg.patch_size = 16;
    cfg.depth = 3;
    cfg.dim = 32;
    cfg.heads = 4;
    cfg.mlp_ratio = 2.0f;
    vit::Model<float> model(cfg);
    Rng rng(404);
    model.init(rng);
    svf::ImportanceGenerator<float> omega(cfg.dim);
    for (auto& w : omega.w.v) w = static_cast<float>(rng.normal(0.0, 0.4));

    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<float> img(static_cast<size_t>(3) * cfg.image_size * cfg.image_size);
        for (auto& v : img) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        vit::Activations<float> plain, hooked;
        model.encode(img.data(), plain);
        vit::SvfHook<float> hook{cfg.num_patches(), &omega};
        model.encode(img.data(), hooked, &hook);
        double num = 0, den = 0;
        for (int i = 0; i < cfg.dim; ++i) {
            num += std::pow(static_cast<double>(plain.embedding[i]) - hooked.embedding[i], 2);
            den += std::pow(static_cast<double>(plain.embedding[i]), 2);
        }
        worst = std::max(worst, std::sqrt(num / den));
    }
    const double dt = seconds_since(t0);
    std::ostringstream ss;
    ss << "worst rel err " << worst << " over 100 inputs, " << dt << "s";
    detail = ss.str();
    return worst < 1e-5 && dt < 30.0;
}

// ---------------------------------------------------------------------------
// 2. Gradient suite: 64-bit central differences vs analytic gradients for
//    encoder parameters, proxies, generator, and both losses on the toy
//    config (L=2, D=8, M=2, N=16, C=3, B=4).
// ---------------------------------------------------------------------------
struct ToyBatch {
    vit::EncoderConfig cfg;
    std::vector<std::vector<double>> images;
    std::vector<int> labels;
};

double batch_objective(const vit::Model<double>& model, const svf::ImportanceGenerator<double>& omega,
                       const train::ProxyBank<double>& bank, const ToyBatch& batch, double beta, int k,
                       std::vector<vit::Activations<double>>* acts_out = nullptr) {
    const int b = static_cast<int>(batch.images.size());
    const int dim = model.cfg.dim;
    std::vector<double> embs(static_cast<size_t>(b) * dim);
    double loss_imp = 0.0;
    std::vector<vit::Activations<double>> acts(static_cast<size_t>(b));
    for (int i = 0; i < b; ++i) {
        vit::SvfHook<double> hook{k, &omega};
        model.encode(batch.images[static_cast<size_t>(i)].data(), acts[static_cast<size_t>(i)], &hook);
        std::copy(acts[static_cast<size_t>(i)].embedding.data(), acts[static_cast<size_t>(i)].embedding.data() + dim,
                  embs.begin() + static_cast<size_t>(i) * dim);
        loss_imp += train::importance_alignment_loss(acts[static_cast<size_t>(i)].selection.importance,
                                                     acts[static_cast<size_t>(i)].selection.semantic) /
                    b;
    }
    double loss_pnca = 0.0;
    for (int i = 0; i < b; ++i)
        loss_pnca +=
            train::proxynca_loss(embs.data() + static_cast<size_t>(i) * dim, batch.labels[static_cast<size_t>(i)], bank) / b;
    const double loss_con = train::contrastive_loss(embs.data(), batch.labels.data(), b, dim, beta);
    if (acts_out != nullptr) *acts_out = std::move(acts);
    return loss_pnca + loss_con + loss_imp;
}

bool criterion_gradient_suite(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    ToyBatch batch;
    batch.cfg.image_size = 64;
    batch.cfg.patch_size = 16;  // N = 16
    batch.cfg.depth = 2;
    batch.cfg.dim = 8;
    batch.cfg.heads = 2;
    batch.cfg.mlp_ratio = 2.0f;
    const int b = 4, c = 3, k = 5;
    const double beta = 0.5;

    Rng rng(505);
    vit::Model<double> model(batch.cfg);
    model.init(rng);
    svf::ImportanceGenerator<double> omega(batch.cfg.dim);
    for (auto& w : omega.w.v) w = rng.normal(0.0, 0.3);
    omega.b = rng.normal(0.0, 0.1);
    train::ProxyBank<double> bank;
    bank.init({0, 1, 2}, batch.cfg.dim, rng);
    batch.labels = {0, 1, 2, 0};
    for (int i = 0; i < b; ++i) {
        std::vector<double> img(static_cast<size_t>(3) * 64 * 64);
        for (auto& v : img) v = rng.uniform(-1.0, 1.0);
        batch.images.push_back(std::move(img));
    }

    // Analytic gradients of the full objective.
    vit::Params<double> enc_grads;
    model.allocate(enc_grads);
    svf::ImportanceGenerator<double> omega_grad(batch.cfg.dim);
    Tensor<double> proxy_grad({c, batch.cfg.dim});
    {
        const int dim = batch.cfg.dim;
        std::vector<vit::Activations<double>> acts;
        batch_objective(model, omega, bank, batch, beta, k, &acts);
        std::vector<double> embs(static_cast<size_t>(b) * dim);
        for (int i = 0; i < b; ++i)
            std::copy(acts[static_cast<size_t>(i)].embedding.data(),
                      acts[static_cast<size_t>(i)].embedding.data() + dim, embs.begin() + static_cast<size_t>(i) * dim);
        std::vector<double> d_embs(static_cast<size_t>(b) * dim, 0.0);
        {
            std::vector<double> d_pnca(static_cast<size_t>(b) * dim, 0.0);
            for (int i = 0; i < b; ++i)
                train::proxynca_loss(embs.data() + static_cast<size_t>(i) * dim, batch.labels[static_cast<size_t>(i)],
                                     bank, d_pnca.data() + static_cast<size_t>(i) * dim, &proxy_grad);
            for (size_t i = 0; i < d_embs.size(); ++i) d_embs[i] += d_pnca[i] / b;
            for (size_t i = 0; i < proxy_grad.size(); ++i) proxy_grad[i] /= b;
        }
        train::contrastive_loss(embs.data(), batch.labels.data(), b, dim, beta, d_embs.data());
        for (int i = 0; i < b; ++i) {
            model.backward(acts[static_cast<size_t>(i)], d_embs.data() + static_cast<size_t>(i) * dim, enc_grads);
            std::vector<double> dz(acts[static_cast<size_t>(i)].selection.importance.size(), 0.0);
            train::importance_alignment_loss(acts[static_cast<size_t>(i)].selection.importance,
                                             acts[static_cast<size_t>(i)].selection.semantic, &dz);
            for (auto& v : dz) v /= b;
            const double* penult = acts[static_cast<size_t>(i)].layers[0].x_out.data() + dim;
            svf::token_importance_backward(penult, acts[static_cast<size_t>(i)].selection.importance, dz, omega_grad,
                                           dim);
        }
    }

    auto objective = [&]() { return batch_objective(model, omega, bank, batch, beta, k); };
    const double h = 1e-5;
    double worst = 0.0;
    std::string worst_group = "none";
    auto check_group = [&](const std::string& name, double* w, const double* g, size_t n) {
        std::vector<double> analytic(g, g + n), numeric(n);
        for (size_t i = 0; i < n; ++i) {
            const double orig = w[i];
            w[i] = orig + h;
            const double lp = objective();
            w[i] = orig - h;
            const double lm = objective();
            w[i] = orig;
            numeric[i] = (lp - lm) / (2 * h);
        }
        const double err = testutil::rel_error(analytic, numeric);
        if (err > worst) {
            worst = err;
            worst_group = name;
        }
    };

    for_each_param(model.params, [&](const std::string& name, Tensor<double>& t) {
        Tensor<double>* gt = nullptr;
        for_each_param(enc_grads, [&](const std::string& gname, Tensor<double>& g) {
            if (gname == name) gt = &g;
        });
        check_group("encoder." + name, t.data(), gt->data(), t.size());
    });
    check_group("omega.w", omega.w.data(), omega_grad.w.data(), omega.w.size());
    check_group("omega.b", &omega.b, &omega_grad.b, 1);
    check_group("proxies", bank.p.data(), proxy_grad.data(), bank.p.size());

    const double dt = seconds_since(t0);
    std::ostringstream ss;
    ss << "worst rel err " << worst << " (" << worst_group << "), " << dt << "s";
    detail = ss.str();
    return worst < 1e-4 && dt < 120.0;
}

// ---------------------------------------------------------------------------
// 3. Loss oracles: hand-derived values reproduced to 1e-9 at 64-bit.
// ---------------------------------------------------------------------------
bool criterion_loss_oracles(std::string& detail) {
    train::ProxyBank<double> uniform;
    uniform.dim = 5;
    uniform.labels = {0, 1, 2, 3};
    for (int r = 0; r < 4; ++r) uniform.index[r] = r;
    uniform.p.resize({4, 5});
    for (int r = 0; r < 4; ++r) uniform.p[static_cast<size_t>(r) * 5 + static_cast<size_t>(r) + 1] = 1.0;
    std::vector<double> emb{1, 0, 0, 0, 0};
    const double ln4 = train::proxynca_loss(emb.data(), 2, uniform);
    const double err1 = std::abs(ln4 - std::log(4.0));

    train::ProxyBank<double> two;
    two.dim = 3;
    two.labels = {0, 1};
    two.index[0] = 0;
    two.index[1] = 1;
    two.p.resize({2, 3});
    two.p[0] = 1.0;  // proxy 0 == embedding
    two.p[4] = 1.0;  // proxy 1 orthogonal
    std::vector<double> e2{1, 0, 0};
    const double hit = train::proxynca_loss(e2.data(), 0, two);
    const double err2 = std::abs(hit - std::log(1.0 + std::exp(-2.0)));

    std::vector<double> pair{1, 0, 0.8, 0.6};
    std::vector<int> labels{0, 1};
    const double margin = train::contrastive_loss(pair.data(), labels.data(), 2, 2, 0.5);
    const double err3 = std::abs(margin - 0.15);

    std::vector<double> same{1, 0, 1, 0};
    std::vector<int> same_labels{3, 3};
    const double zero = train::contrastive_loss(same.data(), same_labels.data(), 2, 2, 0.5);

    std::ostringstream ss;
    ss << "lnC err " << err1 << ", ln(1+e^-2) err " << err2 << ", margin err " << err3 << ", same-pair " << zero;
    detail = ss.str();
    return err1 < 1e-9 && err2 < 1e-9 && err3 < 1e-9 && std::abs(zero) < 1e-9;
}

// ---------------------------------------------------------------------------
// 4. Geometry suite: 1000 randomized enlarge cases, exact 3:4 padding, and
//    bit-identical pass-through on the below-threshold branch.
// ---------------------------------------------------------------------------
bool criterion_geometry(std::string& detail) {
    Rng rng(606);
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int w = 40 + static_cast<int>(rng.below(600)), h = 40 + static_cast<int>(rng.below(600));
        det::Box box;
        box.x1 = rng.uniform(0, w - 2);
        box.y1 = rng.uniform(0, h - 2);
        box.x2 = box.x1 + rng.uniform(0.5, w - box.x1);
        box.y2 = box.y1 + rng.uniform(0.5, h - box.y1);
        const double f1 = 1.0 + rng.uniform() * 0.9;
        const double f2 = f1 + rng.uniform() * 0.9;
        const auto b1 = ovf::enlarge_box(box, f1, w, h);
        const auto b2 = ovf::enlarge_box(box, f2, w, h);
        const bool contains = b1.x1 <= std::max(box.x1, 0.0) && b1.y1 <= std::max(box.y1, 0.0) &&
                              b1.x2 >= std::min(box.x2, static_cast<double>(w)) &&
                              b1.y2 >= std::min(box.y2, static_cast<double>(h));
        const bool monotone = b2.x1 <= b1.x1 && b2.y1 <= b1.y1 && b2.x2 >= b1.x2 && b2.y2 >= b1.y2;
        if (!contains || !monotone) ++violations;
    }

    int pad_violations = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int w = 16 + static_cast<int>(rng.below(400)), h = 16 + static_cast<int>(rng.below(400));
        cv::Mat m(h, w, CV_8UC3, cv::Scalar(1, 2, 3));
        const auto padded = ovf::pad_to_aspect(m, 3, 4, {128, 128, 128});
        if (static_cast<long long>(padded.cols) * 4 != static_cast<long long>(padded.rows) * 3) ++pad_violations;
        if (padded.cols < w || padded.rows < h) ++pad_violations;
    }

    int pass_violations = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int w = 30 + static_cast<int>(rng.below(200)), h = 30 + static_cast<int>(rng.below(200));
        cv::Mat m(h, w, CV_8UC3);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                m.at<cv::Vec3b>(y, x) = {static_cast<uchar>(rng.below(256)), static_cast<uchar>(rng.below(256)),
                                         static_cast<uchar>(rng.below(256))};
        det::DetectionResult low;
        low.box = {1.0, 1.0, w / 2.0, h / 2.0};
        low.score = 0.49;
        ovf::OvfConfig cfg;  // alpha 0.5
        const auto [out, spec] = ovf::apply_ovf(m, {low}, cfg);
        if (spec.used_detection || out.data != m.data) ++pass_violations;
    }

    std::ostringstream ss;
    ss << violations << " enlarge violations / 1000, " << pad_violations << " pad violations / 200, "
       << pass_violations << " passthrough violations / 50";
    detail = ss.str();
    return violations == 0 && pad_violations == 0 && pass_violations == 0;
}

// ---------------------------------------------------------------------------
// 5. Retrieval oracle: exact agreement with the O(n^2) evaluator on 50
//    random stores, with Recall@K monotone in K.
// ---------------------------------------------------------------------------
bool criterion_retrieval_oracle(std::string& detail) {
    Rng rng(707);
    int mismatches = 0, monotone_violations = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int count = 10 + static_cast<int>(rng.below(191));
        const int dim = 2 + static_cast<int>(rng.below(15));
        const int labels = 2 + static_cast<int>(rng.below(8));
        retrieval::EmbeddingStore s;
        s.dim = dim;
        for (int i = 0; i < count; ++i) {
            std::vector<float> v(static_cast<size_t>(dim));
            for (auto& x : v) x = static_cast<float>(rng.normal());
            s.add("x" + std::to_string(i), static_cast<int>(rng.below(static_cast<uint64_t>(labels))), v.data());
        }
        const std::vector<int> ks{1, 2, 4, 8};
        const auto report = retrieval::recall_at_k(s, ks);

        double prev = -1.0;
        for (int k : ks) {
            // brute force: full pairwise ranking
            int hits = 0;
            for (int q = 0; q < count; ++q) {
                std::vector<std::pair<float, int>> sims;
                for (int i = 0; i < count; ++i) {
                    if (i == q) continue;
                    float dot = 0;
                    for (int j = 0; j < dim; ++j) dot += s.row(q)[j] * s.row(i)[j];
                    sims.push_back({dot, i});
                }
                std::stable_sort(sims.begin(), sims.end(),
                                 [](const auto& a, const auto& b) { return a.first > b.first; });
                bool hit = false;
                for (int r = 0; r < std::min<int>(k, static_cast<int>(sims.size())); ++r)
                    if (s.labels[static_cast<size_t>(sims[static_cast<size_t>(r)].second)] ==
                        s.labels[static_cast<size_t>(q)])
                        hit = true;
                hits += hit ? 1 : 0;
            }
            const double oracle = static_cast<double>(hits) / count;
            if (std::abs(report.recall_at.at(k) - oracle) > 0.0) ++mismatches;
            if (report.recall_at.at(k) < prev) ++monotone_violations;
            prev = report.recall_at.at(k);
        }
    }
    std::ostringstream ss;
    ss << mismatches << " mismatches, " << monotone_violations << " monotonicity violations over 50 stores";
    detail = ss.str();
    return mismatches == 0 && monotone_violations == 0;
}

// ---------------------------------------------------------------------------
// 6. End-to-end smoke: synthetic corpus (8x40, objects 20-40%), toy model
//    (L=4, D=64, M=4, k=12) from scratch, closed-set Recall@1 >= 0.9 within
//    20 epochs.
// ---------------------------------------------------------------------------
cli::RunConfig smoke_config(const TempDir& tmp, const std::string& corpus, const std::string& run) {
    cli::RunConfig cfg;
    cfg.dataset.root = tmp.file(corpus + "/images");
    cfg.dataset.meta_category = "shape";
    cfg.dataset.split_mode = "closed";
    cfg.ovf.provider = "fixture";
    cfg.ovf.sidecar_root = tmp.file(corpus + "/detections");
    cfg.model.image_size = 224;
    cfg.model.patch_size = 16;
    cfg.model.depth = 4;
    cfg.model.dim = 64;
    cfg.model.heads = 4;
    cfg.model.mlp_ratio = 2.0;
    cfg.model.k = 12;
    cfg.train.lr = 1e-3;
    cfg.train.batch_size = 16;
    cfg.train.epochs = 20;
    cfg.train.seed = 42;
    cfg.eval.ks = {1, 2, 4, 8};
    cfg.output_dir = tmp.file(run);
    return cfg;
}

bool criterion_smoke(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    TempDir tmp("accept_smoke");
    data::SynthSpec spec;
    spec.classes = 8;
    spec.per_class = 40;
    spec.min_frac = 0.20;
    spec.max_frac = 0.40;
    spec.seed = 7;
    data::generate_corpus(tmp.file("corpus"), spec);

    auto cfg = smoke_config(tmp, "corpus", "run");
    std::ostringstream log;
    cli::cmd_preprocess(cfg, log);
    cli::cmd_train(cfg, log);
    cli::cmd_embed(cfg, "test", log);
    const auto report = cli::cmd_eval(cfg, log);
    const double r1 = report.recall_at.at(1);
    const double dt = seconds_since(t0);
    std::ostringstream ss;
    ss << "closed-set Recall@1 = " << r1 << " after 20 epochs, " << dt << "s";
    detail = ss.str();
    return r1 >= 0.90 && dt < 900.0;
}

// ---------------------------------------------------------------------------
// 7. Ablation trend on the small-object corpus: median over 3 seeds of full
//    DVF Recall@1 >= median baseline; OVF alone loses at most 1 point.
// ---------------------------------------------------------------------------
double median3(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[1];
}

bool criterion_ablation_trend(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    TempDir tmp("accept_trend");
    data::SynthSpec spec;
    spec.classes = 8;
    spec.per_class = 20;
    spec.min_frac = 0.10;  // small objects
    spec.max_frac = 0.20;
    spec.seed = 9;
    data::generate_corpus(tmp.file("corpus"), spec);

    std::vector<double> baseline, ovf_only, full;
    std::ostringstream log;
    for (uint64_t seed : {11ULL, 22ULL, 33ULL}) {
        auto base_cfg = smoke_config(tmp, "corpus", "run_s" + std::to_string(seed));
        base_cfg.train.epochs = 10;
        base_cfg.train.batch_size = 16;
        base_cfg.train.seed = seed;
        base_cfg.ovf.cache_dir = tmp.file("det_cache");  // shared across variants

        auto run = [&](const std::string& name, bool ovf_on, bool svf_on, bool dmt_on) {
            cli::RunConfig v = base_cfg;
            v.output_dir = base_cfg.output_dir + "/" + name;
            v.ovf.enabled = ovf_on;
            v.model.svf_enabled = svf_on;
            v.model.importance_generator = svf_on;
            v.train.dmt = dmt_on;
            if (v.ovf.enabled) cli::cmd_preprocess(v, log);
            cli::cmd_train(v, log);
            cli::cmd_embed(v, "test", log);
            return cli::cmd_eval(v, log).recall_at.at(1);
        };
        baseline.push_back(run("baseline", false, false, false));
        ovf_only.push_back(run("ovf", true, false, false));
        full.push_back(run("full", true, true, true));
    }

    const double mb = median3(baseline), mo = median3(ovf_only), mf = median3(full);
    const double dt = seconds_since(t0);
    std::ostringstream ss;
    ss << "median R@1 baseline " << mb << ", +ovf " << mo << ", full " << mf << ", " << dt << "s";
    detail = ss.str();
    return mf >= mb && mo >= mb - 0.01;
}

// ---------------------------------------------------------------------------
// 8. Round-trip suite: checkpoint and embedding store survive
//    write -> read -> write byte-identically.
// ---------------------------------------------------------------------------
bool criterion_round_trip(std::string& detail) {
    TempDir tmp("accept_rt");
    Rng rng(808);

    vit::EncoderConfig cfg;
    cfg.image_size = 64;
    cfg.patch_size = 16;
    cfg.depth = 2;
    cfg.dim = 16;
    cfg.heads = 2;
    train::ModelBundle<float> model(cfg);
    model.encoder.init(rng);
    for (auto& w : model.omega.w.v) w = static_cast<float>(rng.normal());
    model.proxies.init({0, 1, 2, 3, 4}, cfg.dim, rng);

    ckpt::save(tmp.file("a.dvfc"), train::to_checkpoint(model));
    ckpt::save(tmp.file("b.dvfc"), ckpt::load(tmp.file("a.dvfc")));
    std::ifstream c1(tmp.file("a.dvfc"), std::ios::binary), c2(tmp.file("b.dvfc"), std::ios::binary);
    std::vector<char> cb1((std::istreambuf_iterator<char>(c1)), std::istreambuf_iterator<char>());
    std::vector<char> cb2((std::istreambuf_iterator<char>(c2)), std::istreambuf_iterator<char>());

    retrieval::EmbeddingStore store;
    store.dim = 7;
    for (int i = 0; i < 41; ++i) {
        std::vector<float> v(7);
        for (auto& x : v) x = static_cast<float>(rng.normal());
        store.add("id" + std::to_string(i), i % 5, v.data());
    }
    store.save(tmp.file("a.dvfe"));
    retrieval::EmbeddingStore::load(tmp.file("a.dvfe")).save(tmp.file("b.dvfe"));
    std::ifstream s1(tmp.file("a.dvfe"), std::ios::binary), s2(tmp.file("b.dvfe"), std::ios::binary);
    std::vector<char> sb1((std::istreambuf_iterator<char>(s1)), std::istreambuf_iterator<char>());
    std::vector<char> sb2((std::istreambuf_iterator<char>(s2)), std::istreambuf_iterator<char>());

    std::ostringstream ss;
    ss << "checkpoint " << cb1.size() << "B, store " << sb1.size() << "B";
    detail = ss.str();
    return !cb1.empty() && cb1 == cb2 && !sb1.empty() && sb1 == sb2;
}

}  // namespace

int main() {
    std::vector<Criterion> criteria{
        {"1 selection identity at k=N (float, 1e-5)", criterion_permutation_identity},
        {"2 gradient suite vs central differences (double, 1e-4)", criterion_gradient_suite},
        {"3 loss oracles reproduce hand-derived values (1e-9)", criterion_loss_oracles},
        {"4 geometry suite: enlarge/pad/pass-through", criterion_geometry},
        {"5 retrieval matches O(n^2) oracle exactly", criterion_retrieval_oracle},
        {"6 end-to-end smoke: synthetic Recall@1 >= 0.90 in 20 epochs", criterion_smoke},
        {"7 ablation trend: full DVF >= baseline, OVF within 1pt (3-seed median)", criterion_ablation_trend},
        {"8 checkpoint and store round-trips are byte-identical", criterion_round_trip},
    };

    int failures = 0;
    for (auto& c : criteria) {
        std::string extra;
        bool ok = false;
        try {
            ok = c.run(extra);
        } catch (const std::exception& e) {
            extra = std::string("exception: ") + e.what();
        }
        std::printf("%s criterion %s%s%s\n", ok ? "PASS" : "FAIL", c.name.c_str(), extra.empty() ? "" : " -- ",
                    extra.c_str());
        std::fflush(stdout);
        failures += ok ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
