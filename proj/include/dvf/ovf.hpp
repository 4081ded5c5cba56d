// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <utility>

#include "dvf/detector.hpp"
#include "dvf/image.hpp"

namespace dvf::ovf {

struct OvfConfig {
    double alpha = 0.5;            // detection self-check threshold
    double enlarge_factor = 1.1;
    int aspect_w = 3, aspect_h = 4;
    std::array<unsigned char, 3> pad_value{128, 128, 128};

    void validate() const;
};

struct PixelBox {
    int x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};

struct CropSpec {
    PixelBox source_box;       // region actually cropped (post-enlarge, post-clamp)
    int padded_w = 0, padded_h = 0;
    bool used_detection = false;
    double top_score = 0.0;
};

// Scale width/height by factor about the box center, then clamp to the
// image. The result always contains the clamped input box and grows
// monotonically with the factor.
det::Box enlarge_box(const det::Box& box, double factor, int img_w, int img_h);

// Add margins (split evenly, odd pixel to the bottom/right) until
// W * aspect_h == H * aspect_w holds exactly; minimal total padding with the
// off-axis adjustment as small as possible. Never crops.
cv::Mat pad_to_aspect(const cv::Mat& rgb8, int aspect_w, int aspect_h,
                      const std::array<unsigned char, 3>& pad_value);

// Detection-gated crop/enlarge/pad. Below-threshold or missing detections
// pass the input through untouched (same buffer, no recompression).
std::pair<cv::Mat, CropSpec> apply_ovf(const cv::Mat& rgb8, const std::vector<det::DetectionResult>& detections,
                                       const OvfConfig& cfg);

}  // namespace dvf::ovf
