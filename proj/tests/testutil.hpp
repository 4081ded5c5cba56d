// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "dvf/rng.hpp"

namespace testutil {

// Self-cleaning scratch directory under the system temp root.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("dvf_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string str() const { return path_.string(); }
    std::string file(const std::string& rel) const { return (path_ / rel).string(); }

private:
    std::filesystem::path path_;
};

template <typename T>
std::vector<T> random_vec(size_t n, dvf::Rng& rng, double scale = 1.0) {
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(rng.normal(0.0, scale));
    return v;
}

template <typename T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
    return m;
}

// Scale-aware gradient comparison over a parameter group.
template <typename T>
double rel_error(const std::vector<T>& analytic, const std::vector<T>& numeric) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < analytic.size(); ++i) {
        const double d = static_cast<double>(analytic[i]) - numeric[i];
        num += d * d;
        den += static_cast<double>(analytic[i]) * analytic[i] + static_cast<double>(numeric[i]) * numeric[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

}  // namespace testutil
