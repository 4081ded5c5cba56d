// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvf/ovf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dvf/errors.hpp"

namespace dvf::ovf {

void OvfConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigurationError("ovf alpha must be in [0,1]");
    if (!(enlarge_factor >= 1.0)) throw ConfigurationError("ovf enlarge_factor must be >= 1");
    if (aspect_w <= 0 || aspect_h <= 0) throw ConfigurationError("ovf aspect ratio components must be positive");
}

det::Box enlarge_box(const det::Box& box, double factor, int img_w, int img_h) {
    if (!(box.x2 > box.x1) || !(box.y2 > box.y1)) throw GeometryError("enlarge_box: degenerate box");
    if (!(factor >= 1.0)) throw GeometryError("enlarge_box: factor must be >= 1");
    const double cx = (box.x1 + box.x2) / 2.0, cy = (box.y1 + box.y2) / 2.0;
    const double hw = (box.x2 - box.x1) / 2.0 * factor, hh = (box.y2 - box.y1) / 2.0 * factor;
    det::Box out;
    out.x1 = std::max(0.0, cx - hw);
    out.y1 = std::max(0.0, cy - hh);
    out.x2 = std::min(static_cast<double>(img_w), cx + hw);
    out.y2 = std::min(static_cast<double>(img_h), cy + hh);
    return out;
}

cv::Mat pad_to_aspect(const cv::Mat& rgb8, int aspect_w, int aspect_h,
                      const std::array<unsigned char, 3>& pad_value) {
    if (rgb8.empty()) throw DataError("pad_to_aspect: empty image");
    if (aspect_w <= 0 || aspect_h <= 0) throw ConfigurationError("aspect ratio components must be positive");
    const int g = std::gcd(aspect_w, aspect_h);
    const int wr = aspect_w / g, hr = aspect_h / g;
    const int w = rgb8.cols, h = rgb8.rows;

    long long pad_w = 0, pad_h = 0;
    if (static_cast<long long>(w) * hr == static_cast<long long>(h) * wr) {
        return rgb8;
    } else if (static_cast<long long>(w) * hr > static_cast<long long>(h) * wr) {
        // Height is short: pad it, nudging width by the minimal amount that
        // makes the ratio integer-exact.
        for (int a = 0;; ++a) {
            const long long target = static_cast<long long>(w + a) * hr;
            if (target % wr == 0 && target / wr >= h) {
                pad_w = a;
                pad_h = target / wr - h;
                break;
            }
        }
    } else {
        for (int b = 0;; ++b) {
            const long long target = static_cast<long long>(h + b) * wr;
            if (target % hr == 0 && target / hr >= w) {
                pad_h = b;
                pad_w = target / hr - w;
                break;
            }
        }
    }

    const int left = static_cast<int>(pad_w / 2), right = static_cast<int>(pad_w - pad_w / 2);
    const int top = static_cast<int>(pad_h / 2), bottom = static_cast<int>(pad_h - pad_h / 2);
    cv::Mat out;
    cv::copyMakeBorder(rgb8, out, top, bottom, left, right, cv::BORDER_CONSTANT,
                       cv::Scalar(pad_value[0], pad_value[1], pad_value[2]));
    return out;
}

std::pair<cv::Mat, CropSpec> apply_ovf(const cv::Mat& rgb8, const std::vector<det::DetectionResult>& detections,
                                       const OvfConfig& cfg) {
    cfg.validate();
    if (rgb8.empty()) throw DataError("apply_ovf: empty image");

    // Top detection: score, then larger area, then lower x1.
    const det::DetectionResult* best = nullptr;
    for (const auto& d : detections) {
        if (best == nullptr || d.score > best->score ||
            (d.score == best->score && (d.box.area() > best->box.area() ||
                                        (d.box.area() == best->box.area() && d.box.x1 < best->box.x1))))
            best = &d;
    }

    CropSpec spec;
    if (best == nullptr || best->score < cfg.alpha) {
        spec.used_detection = false;
        spec.top_score = best == nullptr ? 0.0 : best->score;
        spec.source_box = {0, 0, rgb8.cols, rgb8.rows};
        spec.padded_w = rgb8.cols;
        spec.padded_h = rgb8.rows;
        return {rgb8, spec};  // pass-through, same buffer
    }

    const det::Box big = enlarge_box(best->box, cfg.enlarge_factor, rgb8.cols, rgb8.rows);
    PixelBox px;
    px.x1 = std::clamp(static_cast<int>(std::lround(big.x1)), 0, rgb8.cols - 1);
    px.y1 = std::clamp(static_cast<int>(std::lround(big.y1)), 0, rgb8.rows - 1);
    px.x2 = std::clamp(static_cast<int>(std::lround(big.x2)), px.x1 + 1, rgb8.cols);
    px.y2 = std::clamp(static_cast<int>(std::lround(big.y2)), px.y1 + 1, rgb8.rows);

    cv::Mat crop = rgb8(cv::Rect(px.x1, px.y1, px.x2 - px.x1, px.y2 - px.y1)).clone();
    cv::Mat padded = pad_to_aspect(crop, cfg.aspect_w, cfg.aspect_h, cfg.pad_value);

    spec.used_detection = true;
    spec.top_score = best->score;
    spec.source_box = px;
    spec.padded_w = padded.cols;
    spec.padded_h = padded.rows;
    return {padded, spec};
}

}  // namespace dvf::ovf
