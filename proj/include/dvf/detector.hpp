// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dvf/image.hpp"

namespace dvf::det {

struct Box {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
};

struct DetectionResult {
    Box box;
    double score = 0.0;
    std::string prompt;
};

// Providers return detections sorted by descending score and never mutate
// the input image. Implementations must be safe for concurrent detect calls.
class DetectionProvider {
public:
    virtual ~DetectionProvider() = default;
    virtual std::string name() const = 0;
    virtual std::vector<DetectionResult> detect(const cv::Mat& rgb8, const std::string& image_id,
                                                const std::string& prompt) = 0;
};

// Replays detections stored as one JSON sidecar per image id under
// sidecar_root (schema identical to the HTTP response body). Missing sidecar
// means "no detections".
std::unique_ptr<DetectionProvider> fixture_provider(const std::string& sidecar_root);

// POSTs {prompt, image_b64} to the endpoint and parses {boxes, scores}.
// Any transport or schema failure surfaces as ProviderError.
std::unique_ptr<DetectionProvider> http_provider(const std::string& endpoint, double timeout_s);

// Write-through cache keyed on (provider name, image id, prompt); replays
// are bit-identical to the first response.
std::unique_ptr<DetectionProvider> cached(std::unique_ptr<DetectionProvider> inner,
                                          const std::string& cache_dir);

// Shared parsing/validation for the sidecar / wire schema. Boxes are clamped
// to the image bounds; out-of-range scores or degenerate boxes are rejected.
std::vector<DetectionResult> parse_detections_json(const std::string& body, const std::string& prompt,
                                                   int img_w, int img_h, const std::string& context);

}  // namespace dvf::det
