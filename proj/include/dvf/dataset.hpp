// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dvf/image.hpp"
#include "dvf/rng.hpp"

namespace dvf::data {

enum class Split { train, test };
enum class SplitMode { closed, open };

std::string to_string(Split s);
std::string to_string(SplitMode m);
Split split_from_string(const std::string& s);
SplitMode split_mode_from_string(const std::string& s);

struct ImageRecord {
    std::string id;    // "<class_dir>/<file_stem>"
    std::string path;
    int label = 0;
    Split split = Split::train;
};

struct DatasetManifest {
    std::string meta_category;
    SplitMode split_mode = SplitMode::closed;
    std::vector<ImageRecord> records;

    std::vector<ImageRecord> subset(Split s) const;
    std::vector<int> label_set(Split s) const;  // sorted unique
    // Closed mode: train and test label sets must be equal. Open mode:
    // disjoint. Throws ManifestError otherwise.
    void check_invariants() const;

    void save(const std::string& path) const;
    static DatasetManifest load(const std::string& path);
};

// Scans root/<class_dir>/<image files>, assigns labels by sorted class-dir
// name, and partitions deterministically:
//   closed — per class, filenames sorted, round(fraction * count) images
//            (clamped so both sides stay nonempty) spread evenly;
//   open   — the first ceil(fraction * C) class dirs go entirely to train,
//            the remainder entirely to test.
// Every image must decode as RGB with both sides >= 32 px.
DatasetManifest build_manifest(const std::string& root, SplitMode mode, double fraction,
                               const std::string& meta_category);

struct AugmentationPolicy {
    double brightness = 0.0;
    double contrast = 0.0;
    double saturation = 0.0;
    double hue = 0.0;            // fraction of the hue circle, <= 0.5
    double grayscale_prob = 0.0;
    double blur_prob = 0.0;
    double blur_sigma_min = 0.1;
    double blur_sigma_max = 2.0;
    double flip_prob = 0.0;
    uint64_t rng_seed = 0;

    void validate() const;
    static AugmentationPolicy training_defaults();
};

// Color jitter always; flip/grayscale/blur by independent draws. Consumes a
// fixed number of draws regardless of which transforms fire, so parallel
// callers can derive one stream per image. Input/output: float RGB in [0,1].
cv::Mat augment(const cv::Mat& rgbf, const AugmentationPolicy& policy, Rng& draw);

// Resize to resize_to x resize_to, then crop crop x crop: random offset when
// train_mode (requires draw), centered otherwise.
cv::Mat resize_crop(const cv::Mat& rgbf, bool train_mode, Rng* draw = nullptr, int crop = 224,
                    int resize_to = 256);

}  // namespace dvf::data
