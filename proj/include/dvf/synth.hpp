// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

namespace dvf::data {

// Parametric fine-grained corpus: every class shares the same coarse look
// (one object on cluttered background) and differs in hue, shape, stripe
// orientation, and the placement/color of a small marker patch. Ground-truth
// boxes are emitted as detection sidecars so the crop stage can run offline.
struct SynthSpec {
    int classes = 8;
    int per_class = 40;
    int image_size = 256;
    double min_frac = 0.20;  // object area as a fraction of the frame
    double max_frac = 0.40;
    int clutter = 12;        // background distractor count
    uint64_t seed = 7;
};

// Writes <out_root>/images/class_XX/img_XXXX.png and
// <out_root>/detections/class_XX/img_XXXX.json.
void generate_corpus(const std::string& out_root, const SynthSpec& spec);

}  // namespace dvf::data
