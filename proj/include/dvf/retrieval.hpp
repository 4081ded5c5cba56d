// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dvf/dataset.hpp"

namespace dvf::retrieval {

// Immutable after construction; rows are L2-normalized on ingest so search
// reduces to dot products.
struct EmbeddingStore {
    int dim = 0;
    std::vector<std::string> ids;
    std::vector<int> labels;
    std::vector<float> matrix;  // count x dim

    int count() const { return static_cast<int>(ids.size()); }
    const float* row(int i) const { return matrix.data() + static_cast<size_t>(i) * dim; }
    void add(const std::string& id, int label, const float* v);

    void save(const std::string& path) const;
    static EmbeddingStore load(const std::string& path);
};

// One embedding per record, in record order. Decode or model failures
// propagate; rows are never silently skipped.
EmbeddingStore embed_corpus(const std::vector<data::ImageRecord>& records, int dim,
                            const std::function<std::vector<float>(const data::ImageRecord&)>& embed_fn);

// Top-k row indices by cosine similarity, query excluded, ties to the lower
// row index.
std::vector<int> knn(const EmbeddingStore& store, int query_index, int k);

struct QueryResult {
    std::string query_id;
    std::vector<std::string> top_ids;
    int hit_rank = 0;  // 1-based rank of the first same-label hit; 0 = none
};

struct EvalReport {
    std::map<int, double> recall_at;
    std::vector<QueryResult> per_query;
    std::vector<std::string> warnings;
    nlohmann::json config_snapshot;

    nlohmann::json to_json() const;
};

// Every store row queries the full store (self excluded). A query scores 1
// at K when any of its top-K shares its label.
EvalReport recall_at_k(const EmbeddingStore& store, const std::vector<int>& ks);

}  // namespace dvf::retrieval
