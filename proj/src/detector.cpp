// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvf/detector.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dvf/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dvf::det {

std::vector<DetectionResult> parse_detections_json(const std::string& body, const std::string& prompt,
                                                   int img_w, int img_h, const std::string& context) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw ProviderError("malformed detection JSON (" + context + "): " + e.what());
    }
    if (!j.is_object() || !j.contains("boxes") || !j.contains("scores") || !j["boxes"].is_array() ||
        !j["scores"].is_array() || j["boxes"].size() != j["scores"].size())
        throw ProviderError("detection schema mismatch (" + context + "): expected {boxes, scores}");

    std::vector<DetectionResult> out;
    for (size_t i = 0; i < j["boxes"].size(); ++i) {
        const auto& bj = j["boxes"][i];
        if (!bj.is_array() || bj.size() != 4 || !bj[0].is_number())
            throw ProviderError("detection schema mismatch (" + context + "): box " + std::to_string(i) +
                                " is not [x1,y1,x2,y2]");
        DetectionResult r;
        r.box = {bj[0].get<double>(), bj[1].get<double>(), bj[2].get<double>(), bj[3].get<double>()};
        r.score = j["scores"][i].get<double>();
        r.prompt = prompt;
        if (!(r.score >= 0.0 && r.score <= 1.0))
            throw ProviderError("detection score out of [0,1] (" + context + "): " + std::to_string(r.score));
        r.box.x1 = std::clamp(r.box.x1, 0.0, static_cast<double>(img_w));
        r.box.x2 = std::clamp(r.box.x2, 0.0, static_cast<double>(img_w));
        r.box.y1 = std::clamp(r.box.y1, 0.0, static_cast<double>(img_h));
        r.box.y2 = std::clamp(r.box.y2, 0.0, static_cast<double>(img_h));
        if (!(r.box.x1 < r.box.x2 && r.box.y1 < r.box.y2))
            throw ProviderError("degenerate detection box after clamping (" + context + ")");
        out.push_back(std::move(r));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const DetectionResult& a, const DetectionResult& b) { return a.score > b.score; });
    return out;
}

namespace {

class FixtureProvider final : public DetectionProvider {
public:
    explicit FixtureProvider(std::string root) : root_(std::move(root)) {}

    std::string name() const override { return "fixture"; }

    std::vector<DetectionResult> detect(const cv::Mat& rgb8, const std::string& image_id,
                                        const std::string& prompt) override {
        const fs::path p = fs::path(root_) / (image_id + ".json");
        if (!fs::exists(p)) return {};
        std::ifstream in(p);
        if (!in) throw ProviderError("cannot read sidecar: " + p.string());
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_detections_json(ss.str(), prompt, rgb8.cols, rgb8.rows, p.string());
    }

private:
    std::string root_;
};

class HttpProvider final : public DetectionProvider {
public:
    HttpProvider(std::string endpoint, double timeout_s) : endpoint_(std::move(endpoint)), timeout_s_(timeout_s) {
        const auto scheme_end = endpoint_.find("://");
        if (scheme_end == std::string::npos) throw ConfigurationError("endpoint must be a http URL: " + endpoint_);
        const auto path_start = endpoint_.find('/', scheme_end + 3);
        base_ = path_start == std::string::npos ? endpoint_ : endpoint_.substr(0, path_start);
        path_ = path_start == std::string::npos ? "/" : endpoint_.substr(path_start);
    }

    std::string name() const override { return "http:" + endpoint_; }

    std::vector<DetectionResult> detect(const cv::Mat& rgb8, const std::string& image_id,
                                        const std::string& prompt) override {
        (void)image_id;
        json body;
        body["prompt"] = prompt;
        const auto png = img::encode_png_rgb8(rgb8);
        body["image_b64"] = img::base64_encode(png.data(), png.size());

        httplib::Client cli(base_);
        cli.set_connection_timeout(std::chrono::milliseconds(static_cast<int>(timeout_s_ * 1000)));
        cli.set_read_timeout(std::chrono::milliseconds(static_cast<int>(timeout_s_ * 1000)));
        auto res = cli.Post(path_, body.dump(), "application/json");
        if (!res) throw ProviderError("detection request failed (" + endpoint_ + "): " + httplib::to_string(res.error()));
        if (res->status < 200 || res->status >= 300)
            throw ProviderError("detection service returned status " + std::to_string(res->status) + " (" +
                                endpoint_ + ")");
        return parse_detections_json(res->body, prompt, rgb8.cols, rgb8.rows, endpoint_);
    }

private:
    std::string endpoint_, base_, path_;
    double timeout_s_;
};

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex16(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

class CachedProvider final : public DetectionProvider {
public:
    CachedProvider(std::unique_ptr<DetectionProvider> inner, std::string dir)
        : inner_(std::move(inner)), dir_(std::move(dir)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        const fs::path probe = fs::path(dir_) / ".write_probe";
        std::ofstream test(probe);
        if (ec || !test) throw ProviderError("detection cache dir not writable: " + dir_);
        test.close();
        fs::remove(probe, ec);
    }

    std::string name() const override { return inner_->name(); }

    std::vector<DetectionResult> detect(const cv::Mat& rgb8, const std::string& image_id,
                                        const std::string& prompt) override {
        const std::string key = inner_->name() + "\x1f" + image_id + "\x1f" + prompt;
        const std::string h = hex16(fnv1a64(key));
        const fs::path entry = fs::path(dir_) / h.substr(0, 2) / h.substr(2, 2) / (h + ".json");

        if (fs::exists(entry)) {
            std::ifstream in(entry);
            std::stringstream ss;
            ss << in.rdbuf();
            json j;
            try {
                j = json::parse(ss.str());
            } catch (const json::exception& e) {
                throw ProviderError("corrupt cache entry " + entry.string() + ": " + e.what());
            }
            // Full key stored inside the entry guards against hash collisions.
            if (j.value("key", "") == key)
                return parse_detections_json(j.at("body").dump(), prompt, rgb8.cols, rgb8.rows, entry.string());
        }

        auto results = inner_->detect(rgb8, image_id, prompt);
        json body;
        body["boxes"] = json::array();
        body["scores"] = json::array();
        for (const auto& r : results) {
            body["boxes"].push_back({r.box.x1, r.box.y1, r.box.x2, r.box.y2});
            body["scores"].push_back(r.score);
        }
        json j;
        j["key"] = key;
        j["body"] = body;
        std::error_code ec;
        fs::create_directories(entry.parent_path(), ec);
        const fs::path tmp = entry.string() + ".tmp";
        {
            std::ofstream out(tmp);
            if (!out) throw ProviderError("cannot write cache entry: " + entry.string());
            out << j.dump();
        }
        fs::rename(tmp, entry, ec);
        if (ec) throw ProviderError("cannot commit cache entry: " + entry.string());
        return results;
    }

private:
    std::unique_ptr<DetectionProvider> inner_;
    std::string dir_;
};

}  // namespace

std::unique_ptr<DetectionProvider> fixture_provider(const std::string& sidecar_root) {
    return std::make_unique<FixtureProvider>(sidecar_root);
}

std::unique_ptr<DetectionProvider> http_provider(const std::string& endpoint, double timeout_s) {
    return std::make_unique<HttpProvider>(endpoint, timeout_s);
}

std::unique_ptr<DetectionProvider> cached(std::unique_ptr<DetectionProvider> inner, const std::string& cache_dir) {
    return std::make_unique<CachedProvider>(std::move(inner), cache_dir);
}

}  // namespace dvf::det
