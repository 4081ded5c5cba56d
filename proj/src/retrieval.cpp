// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvf/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "dvf/errors.hpp"

using nlohmann::json;

namespace dvf::retrieval {

void EmbeddingStore::add(const std::string& id, int label, const float* v) {
    double norm = 0.0;
    for (int j = 0; j < dim; ++j) norm += static_cast<double>(v[j]) * v[j];
    norm = std::sqrt(norm);
    if (!(norm > 0.0) || !std::isfinite(norm)) throw DataError("embedding with degenerate norm for id " + id);
    ids.push_back(id);
    labels.push_back(label);
    for (int j = 0; j < dim; ++j) matrix.push_back(static_cast<float>(v[j] / norm));
}

namespace {
template <typename T>
void write_le(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_le(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}
}  // namespace

void EmbeddingStore::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write embedding store: " + path);
    out.write("DVFE", 4);
    write_le<uint32_t>(out, 1);
    write_le<uint32_t>(out, static_cast<uint32_t>(count()));
    write_le<uint32_t>(out, static_cast<uint32_t>(dim));
    json meta;
    meta["ids"] = ids;
    meta["labels"] = labels;
    const std::string meta_str = meta.dump();
    write_le<uint64_t>(out, meta_str.size());
    out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    out.write(reinterpret_cast<const char*>(matrix.data()),
              static_cast<std::streamsize>(matrix.size() * sizeof(float)));
    if (!out) throw DataError("short write to embedding store: " + path);
}

EmbeddingStore EmbeddingStore::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read embedding store: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "DVFE", 4) != 0) throw DataError("bad embedding store magic: " + path);
    const auto version = read_le<uint32_t>(in);
    if (version != 1) throw DataError("unsupported embedding store version " + std::to_string(version));
    const auto count = read_le<uint32_t>(in);
    const auto dim = read_le<uint32_t>(in);
    const auto meta_len = read_le<uint64_t>(in);
    std::string meta_str(meta_len, '\0');
    in.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
    json meta;
    try {
        meta = json::parse(meta_str);
    } catch (const json::exception& e) {
        throw DataError("corrupt embedding store metadata: " + std::string(e.what()));
    }
    EmbeddingStore s;
    s.dim = static_cast<int>(dim);
    s.ids = meta.at("ids").get<std::vector<std::string>>();
    s.labels = meta.at("labels").get<std::vector<int>>();
    if (s.ids.size() != count || s.labels.size() != count)
        throw DataError("embedding store id/label count mismatch: " + path);
    s.matrix.resize(static_cast<size_t>(count) * dim);
    in.read(reinterpret_cast<char*>(s.matrix.data()), static_cast<std::streamsize>(s.matrix.size() * sizeof(float)));
    if (!in) throw DataError("truncated embedding store: " + path);
    return s;
}

EmbeddingStore embed_corpus(const std::vector<data::ImageRecord>& records, int dim,
                            const std::function<std::vector<float>(const data::ImageRecord&)>& embed_fn) {
    EmbeddingStore store;
    store.dim = dim;
    for (const auto& r : records) {
        const auto v = embed_fn(r);
        if (static_cast<int>(v.size()) != dim)
            throw ShapeError("embedding size mismatch for " + r.id + ": got " + std::to_string(v.size()));
        store.add(r.id, r.label, v.data());
    }
    return store;
}

std::vector<int> knn(const EmbeddingStore& store, int query_index, int k) {
    const int n = store.count();
    if (query_index < 0 || query_index >= n) throw ConfigurationError("knn: query index out of range");
    if (k < 1 || k > n - 1) throw ConfigurationError("knn: K must be in [1, count-1]");
    std::vector<float> sims(static_cast<size_t>(n));
    const float* q = store.row(query_index);
    for (int i = 0; i < n; ++i) {
        const float* r = store.row(i);
        float s = 0.0f;
        for (int j = 0; j < store.dim; ++j) s += q[j] * r[j];
        sims[static_cast<size_t>(i)] = s;
    }
    std::vector<int> order;
    order.reserve(static_cast<size_t>(n - 1));
    for (int i = 0; i < n; ++i)
        if (i != query_index) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sims[static_cast<size_t>(a)] > sims[static_cast<size_t>(b)]; });
    order.resize(static_cast<size_t>(k));
    return order;
}

EvalReport recall_at_k(const EmbeddingStore& store, const std::vector<int>& ks) {
    const int n = store.count();
    if (n < 2) throw ConfigurationError("recall_at_k: need at least 2 embeddings");
    if (ks.empty()) throw ConfigurationError("recall_at_k: no K values given");
    int kmax = 0;
    for (int k : ks) {
        if (k < 1) throw ConfigurationError("recall_at_k: K must be >= 1");
        kmax = std::max(kmax, k);
    }
    kmax = std::min(kmax, n - 1);  // gallery is the store minus the query

    EvalReport report;
    std::unordered_map<int, int> label_counts;
    for (int l : store.labels) ++label_counts[l];
    for (const auto& [label, cnt] : label_counts)
        if (cnt < 2)
            report.warnings.push_back("label " + std::to_string(label) +
                                      " has a single image; its queries cannot hit at any K");

    report.per_query.resize(static_cast<size_t>(n));
#pragma omp parallel for schedule(static)
    for (int q = 0; q < n; ++q) {
        const auto top = knn(store, q, kmax);
        QueryResult res;
        res.query_id = store.ids[static_cast<size_t>(q)];
        res.hit_rank = 0;
        for (size_t r = 0; r < top.size(); ++r) {
            res.top_ids.push_back(store.ids[static_cast<size_t>(top[r])]);
            if (res.hit_rank == 0 && store.labels[static_cast<size_t>(top[r])] == store.labels[static_cast<size_t>(q)])
                res.hit_rank = static_cast<int>(r) + 1;
        }
        report.per_query[static_cast<size_t>(q)] = std::move(res);
    }

    for (int k : ks) {
        const int k_eff = std::min(k, kmax);
        int hits = 0;
        for (const auto& res : report.per_query)
            if (res.hit_rank != 0 && res.hit_rank <= k_eff) ++hits;
        report.recall_at[k] = static_cast<double>(hits) / n;
    }
    return report;
}

json EvalReport::to_json() const {
    json j;
    j["recall_at"] = json::object();
    for (const auto& [k, v] : recall_at) j["recall_at"][std::to_string(k)] = v;
    j["warnings"] = warnings;
    j["config_snapshot"] = config_snapshot;
    j["per_query"] = json::array();
    for (const auto& q : per_query) {
        json qj;
        qj["query_id"] = q.query_id;
        qj["top_ids"] = q.top_ids;
        if (q.hit_rank > 0)
            qj["hit_rank"] = q.hit_rank;
        else
            qj["hit_rank"] = nullptr;
        j["per_query"].push_back(std::move(qj));
    }
    return j;
}

}  // namespace dvf::retrieval
