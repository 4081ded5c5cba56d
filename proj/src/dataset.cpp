// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "dvf/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dvf::data {

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }
std::string to_string(SplitMode m) { return m == SplitMode::closed ? "closed" : "open"; }

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw ConfigurationError("unknown split: " + s);
}

SplitMode split_mode_from_string(const std::string& s) {
    if (s == "closed") return SplitMode::closed;
    if (s == "open") return SplitMode::open;
    throw ConfigurationError("unknown split_mode: " + s);
}

std::vector<ImageRecord> DatasetManifest::subset(Split s) const {
    std::vector<ImageRecord> out;
    for (const auto& r : records)
        if (r.split == s) out.push_back(r);
    return out;
}

std::vector<int> DatasetManifest::label_set(Split s) const {
    std::set<int> labels;
    for (const auto& r : records)
        if (r.split == s) labels.insert(r.label);
    return {labels.begin(), labels.end()};
}

void DatasetManifest::check_invariants() const {
    const auto train = label_set(Split::train);
    const auto test = label_set(Split::test);
    if (split_mode == SplitMode::closed) {
        if (train != test) throw ManifestError("closed-set manifest: train/test label sets differ");
    } else {
        std::vector<int> inter;
        std::set_intersection(train.begin(), train.end(), test.begin(), test.end(), std::back_inserter(inter));
        if (!inter.empty()) throw ManifestError("open-set manifest: train/test label sets overlap");
    }
}

void DatasetManifest::save(const std::string& path) const {
    json j;
    j["meta_category"] = meta_category;
    j["split_mode"] = to_string(split_mode);
    j["records"] = json::array();
    for (const auto& r : records)
        j["records"].push_back({{"id", r.id}, {"path", r.path}, {"label", r.label}, {"split", to_string(r.split)}});
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

DatasetManifest DatasetManifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read manifest: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed manifest " + path + ": " + e.what());
    }
    DatasetManifest m;
    m.meta_category = j.at("meta_category").get<std::string>();
    m.split_mode = split_mode_from_string(j.at("split_mode").get<std::string>());
    for (const auto& rj : j.at("records")) {
        ImageRecord r;
        r.id = rj.at("id").get<std::string>();
        r.path = rj.at("path").get<std::string>();
        r.label = rj.at("label").get<int>();
        r.split = split_from_string(rj.at("split").get<std::string>());
        m.records.push_back(std::move(r));
    }
    m.check_invariants();
    return m;
}

namespace {

bool is_image_file(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

void check_decodes(const std::string& path) {
    cv::Mat m = img::load_rgb8(path);  // throws DataError if undecodable
    if (m.rows < 32 || m.cols < 32)
        throw ManifestError("image below 32x32 minimum: " + path);
}

// Exactly `quota` of `count` slots marked true, spread evenly (Bresenham).
std::vector<bool> spread_assignment(int count, int quota) {
    std::vector<bool> pick(static_cast<size_t>(count), false);
    for (int i = 0; i < count; ++i) {
        const long long lo = static_cast<long long>(i) * quota / count;
        const long long hi = static_cast<long long>(i + 1) * quota / count;
        if (hi > lo) pick[static_cast<size_t>(i)] = true;
    }
    return pick;
}

}  // namespace

DatasetManifest build_manifest(const std::string& root, SplitMode mode, double fraction,
                               const std::string& meta_category) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigurationError("split fraction must be in (0,1)");
    if (!fs::is_directory(root)) throw ConfigurationError("dataset root is not a directory: " + root);

    std::vector<fs::path> class_dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) class_dirs.push_back(e.path());
    std::sort(class_dirs.begin(), class_dirs.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    if (class_dirs.empty()) throw ConfigurationError("dataset root has no class subdirectories: " + root);

    const int num_classes = static_cast<int>(class_dirs.size());
    int train_classes = 0;
    if (mode == SplitMode::open) {
        train_classes = static_cast<int>(std::ceil(fraction * num_classes));
        if (train_classes >= num_classes)
            throw ManifestError("open split leaves no test subcategories (" + std::to_string(num_classes) +
                                " classes, fraction " + std::to_string(fraction) + ")");
    }

    DatasetManifest manifest;
    manifest.meta_category = meta_category;
    manifest.split_mode = mode;
    std::set<std::string> seen_ids;

    for (int c = 0; c < num_classes; ++c) {
        const auto& dir = class_dirs[static_cast<size_t>(c)];
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
        std::sort(files.begin(), files.end(),
                  [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
        if (files.empty()) throw ManifestError("subcategory has no images: " + dir.string());

        const int count = static_cast<int>(files.size());
        std::vector<bool> to_train;
        if (mode == SplitMode::closed) {
            if (count < 2)
                throw ManifestError("closed split needs >= 2 images per subcategory, got " +
                                    std::to_string(count) + " in " + dir.string());
            int quota = static_cast<int>(std::llround(fraction * count));
            quota = std::clamp(quota, 1, count - 1);  // keep both sides nonempty
            to_train = spread_assignment(count, quota);
        } else {
            to_train.assign(static_cast<size_t>(count), c < train_classes);
        }

        for (int i = 0; i < count; ++i) {
            const auto& f = files[static_cast<size_t>(i)];
            check_decodes(f.string());
            ImageRecord r;
            r.id = dir.filename().string() + "/" + f.stem().string();
            r.path = f.string();
            r.label = c;
            r.split = to_train[static_cast<size_t>(i)] ? Split::train : Split::test;
            if (!seen_ids.insert(r.id).second) throw ManifestError("duplicate image id: " + r.id);
            manifest.records.push_back(std::move(r));
        }
    }

    manifest.check_invariants();
    return manifest;
}

void AugmentationPolicy::validate() const {
    auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (brightness < 0 || contrast < 0 || saturation < 0 || hue < 0)
        throw ConfigurationError("augmentation strengths must be >= 0");
    if (hue > 0.5) throw ConfigurationError("hue strength must be <= 0.5");
    if (!prob_ok(grayscale_prob) || !prob_ok(blur_prob) || !prob_ok(flip_prob))
        throw ConfigurationError("augmentation probabilities must be in [0,1]");
    if (blur_sigma_min > blur_sigma_max || blur_sigma_min <= 0)
        throw ConfigurationError("blur sigma range invalid");
}

AugmentationPolicy AugmentationPolicy::training_defaults() {
    AugmentationPolicy p;
    p.brightness = 0.4;
    p.contrast = 0.4;
    p.saturation = 0.4;
    p.hue = 0.1;
    p.grayscale_prob = 0.2;
    p.blur_prob = 0.2;
    p.blur_sigma_min = 0.1;
    p.blur_sigma_max = 2.0;
    p.flip_prob = 0.5;
    return p;
}

namespace {

cv::Mat luma(const cv::Mat& rgbf) {
    cv::Mat gray(rgbf.rows, rgbf.cols, CV_32FC1);
    for (int y = 0; y < rgbf.rows; ++y) {
        const cv::Vec3f* src = rgbf.ptr<cv::Vec3f>(y);
        float* dst = gray.ptr<float>(y);
        for (int x = 0; x < rgbf.cols; ++x)
            dst[x] = 0.299f * src[x][0] + 0.587f * src[x][1] + 0.114f * src[x][2];
    }
    return gray;
}

void clamp01(cv::Mat& m) { cv::min(cv::max(m, 0.0f), 1.0f, m); }

}  // namespace

cv::Mat augment(const cv::Mat& rgbf, const AugmentationPolicy& policy, Rng& draw) {
    policy.validate();
    if (rgbf.empty()) throw DataError("augment: empty image");

    // Fixed draw order regardless of which transforms apply.
    const double fb = draw.uniform(std::max(0.0, 1.0 - policy.brightness), 1.0 + policy.brightness);
    const double fc = draw.uniform(std::max(0.0, 1.0 - policy.contrast), 1.0 + policy.contrast);
    const double fs = draw.uniform(std::max(0.0, 1.0 - policy.saturation), 1.0 + policy.saturation);
    const double dh = draw.uniform(-policy.hue, policy.hue);
    const bool do_flip = draw.uniform() < policy.flip_prob;
    const bool do_gray = draw.uniform() < policy.grayscale_prob;
    const bool do_blur = draw.uniform() < policy.blur_prob;
    const double sigma = draw.uniform(policy.blur_sigma_min, policy.blur_sigma_max);

    // Clone first: Mat-expression assignment evaluates into the existing
    // buffer, which would otherwise write through to the caller's pixels.
    cv::Mat out = rgbf.clone();
    if (fb != 1.0) {
        out = out * fb;
        clamp01(out);
    }
    if (fc != 1.0) {
        const double mean = cv::mean(luma(out))[0];
        out = out * fc + cv::Scalar::all(mean * (1.0 - fc));
        clamp01(out);
    }
    if (fs != 1.0) {
        cv::Mat gray3;
        cv::cvtColor(luma(out), gray3, cv::COLOR_GRAY2RGB);
        out = gray3 + (out - gray3) * fs;
        clamp01(out);
    }
    if (dh != 0.0) {
        cv::Mat hsv;
        cv::cvtColor(out, hsv, cv::COLOR_RGB2HSV);  // H in [0,360) for float mats
        const float shift = static_cast<float>(dh * 360.0);
        for (int y = 0; y < hsv.rows; ++y) {
            cv::Vec3f* row = hsv.ptr<cv::Vec3f>(y);
            for (int x = 0; x < hsv.cols; ++x) {
                float h = row[x][0] + shift;
                if (h < 0.0f) h += 360.0f;
                if (h >= 360.0f) h -= 360.0f;
                row[x][0] = h;
            }
        }
        cv::cvtColor(hsv, out, cv::COLOR_HSV2RGB);
        clamp01(out);
    }
    if (do_flip) {
        cv::Mat flipped;
        cv::flip(out, flipped, 1);
        out = flipped;
    }
    if (do_gray) {
        cv::Mat gray3;
        cv::cvtColor(luma(out), gray3, cv::COLOR_GRAY2RGB);
        out = gray3;
    }
    if (do_blur) {
        cv::Mat blurred;
        const int k = 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
        cv::GaussianBlur(out, blurred, {k, k}, sigma, sigma, cv::BORDER_REFLECT_101);
        out = blurred;
    }
    return out;
}

cv::Mat resize_crop(const cv::Mat& rgbf, bool train_mode, Rng* draw, int crop, int resize_to) {
    if (rgbf.empty()) throw DataError("resize_crop: empty image");
    if (crop > resize_to) throw ConfigurationError("crop size exceeds resize size");
    cv::Mat resized = rgbf;
    if (rgbf.cols != resize_to || rgbf.rows != resize_to)
        cv::resize(rgbf, resized, {resize_to, resize_to}, 0, 0, cv::INTER_LINEAR);
    const int slack = resize_to - crop;
    int ox = slack / 2, oy = slack / 2;
    if (train_mode) {
        if (draw == nullptr) throw ConfigurationError("resize_crop: train mode requires a draw source");
        ox = static_cast<int>(draw->below(static_cast<uint64_t>(slack + 1)));
        oy = static_cast<int>(draw->below(static_cast<uint64_t>(slack + 1)));
    }
    return resized(cv::Rect(ox, oy, crop, crop)).clone();
}

}  // namespace dvf::data
