// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "dvf/errors.hpp"
#include "dvf/image.hpp"
#include "dvf/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dvf::data {

namespace {

cv::Scalar hsv_color(double hue_deg, double sat, double val) {
    double h = std::fmod(std::fmod(hue_deg, 360.0) + 360.0, 360.0) / 60.0;
    const int i = static_cast<int>(h);
    const double f = h - i;
    const double p = val * (1 - sat), q = val * (1 - sat * f), t = val * (1 - sat * (1 - f));
    double r, g, b;
    switch (i % 6) {
        case 0: r = val; g = t; b = p; break;
        case 1: r = q; g = val; b = p; break;
        case 2: r = p; g = val; b = t; break;
        case 3: r = p; g = q; b = val; break;
        case 4: r = t; g = p; b = val; break;
        default: r = val; g = p; b = q; break;
    }
    return {r * 255.0, g * 255.0, b * 255.0};  // RGB order, mats here are RGB
}

struct ClassRecipe {
    double hue;
    int shape;          // 0 ellipse, 1 rectangle, 2 triangle, 3 diamond
    bool vertical_stripes;
    int marker_corner;  // 0 tl, 1 tr, 2 bl, 3 br
};

ClassRecipe recipe_for(int cls, int num_classes) {
    ClassRecipe r;
    r.hue = 360.0 * cls / num_classes;
    r.shape = cls % 4;
    r.vertical_stripes = (cls / 4) % 2 == 1;
    r.marker_corner = (cls * 3 + 1) % 4;
    return r;
}

void draw_shape(cv::Mat& canvas, cv::Mat& mask, int shape, cv::Point center, int half, const cv::Scalar& color) {
    std::vector<cv::Point> poly;
    switch (shape) {
        case 0:
            cv::ellipse(canvas, center, {half, static_cast<int>(half * 0.75)}, 0, 0, 360, color, cv::FILLED);
            cv::ellipse(mask, center, {half, static_cast<int>(half * 0.75)}, 0, 0, 360, 255, cv::FILLED);
            return;
        case 1:
            cv::rectangle(canvas, center - cv::Point(half, static_cast<int>(half * 0.7)),
                          center + cv::Point(half, static_cast<int>(half * 0.7)), color, cv::FILLED);
            cv::rectangle(mask, center - cv::Point(half, static_cast<int>(half * 0.7)),
                          center + cv::Point(half, static_cast<int>(half * 0.7)), 255, cv::FILLED);
            return;
        case 2:
            poly = {center + cv::Point(0, -half), center + cv::Point(-half, half), center + cv::Point(half, half)};
            break;
        default:
            poly = {center + cv::Point(0, -half), center + cv::Point(-half, 0), center + cv::Point(0, half),
                    center + cv::Point(half, 0)};
            break;
    }
    cv::fillPoly(canvas, std::vector<std::vector<cv::Point>>{poly}, color);
    cv::fillPoly(mask, std::vector<std::vector<cv::Point>>{poly}, 255);
}

}  // namespace

void generate_corpus(const std::string& out_root, const SynthSpec& spec) {
    if (spec.classes < 1 || spec.per_class < 1) throw ConfigurationError("synth: classes and per_class must be >= 1");
    if (!(spec.min_frac > 0.0 && spec.min_frac <= spec.max_frac && spec.max_frac < 0.9))
        throw ConfigurationError("synth: object fractions must satisfy 0 < min <= max < 0.9");
    if (spec.image_size < 64) throw ConfigurationError("synth: image_size must be >= 64");

    const int s = spec.image_size;
    for (int cls = 0; cls < spec.classes; ++cls) {
        char cls_name[32];
        std::snprintf(cls_name, sizeof(cls_name), "class_%02d", cls);
        const fs::path img_dir = fs::path(out_root) / "images" / cls_name;
        const fs::path det_dir = fs::path(out_root) / "detections" / cls_name;
        fs::create_directories(img_dir);
        fs::create_directories(det_dir);
        const ClassRecipe rec = recipe_for(cls, spec.classes);

        for (int n = 0; n < spec.per_class; ++n) {
            Rng rng(Rng::mix(spec.seed, static_cast<uint64_t>(cls) * 100000ULL + static_cast<uint64_t>(n)));

            // Background: two-tone vertical gradient plus muted clutter.
            cv::Mat canvas(s, s, CV_8UC3);
            const cv::Scalar bg_top = hsv_color(rng.uniform(0, 360), rng.uniform(0.05, 0.25), rng.uniform(0.25, 0.6));
            const cv::Scalar bg_bot = hsv_color(rng.uniform(0, 360), rng.uniform(0.05, 0.25), rng.uniform(0.25, 0.6));
            for (int y = 0; y < s; ++y) {
                const double t = static_cast<double>(y) / (s - 1);
                const cv::Vec3b row_color(static_cast<uchar>(bg_top[0] * (1 - t) + bg_bot[0] * t),
                                          static_cast<uchar>(bg_top[1] * (1 - t) + bg_bot[1] * t),
                                          static_cast<uchar>(bg_top[2] * (1 - t) + bg_bot[2] * t));
                canvas.row(y).setTo(row_color);
            }
            for (int c = 0; c < spec.clutter; ++c) {
                const int cx = rng.range_int(0, s - 1), cy = rng.range_int(0, s - 1);
                const int r1 = rng.range_int(s / 40, s / 14), r2 = rng.range_int(s / 40, s / 14);
                const cv::Scalar col = hsv_color(rng.uniform(0, 360), rng.uniform(0.05, 0.35), rng.uniform(0.2, 0.7));
                if (rng.uniform() < 0.5)
                    cv::ellipse(canvas, {cx, cy}, {r1, r2}, rng.uniform(0, 180), 0, 360, col, cv::FILLED);
                else
                    cv::rectangle(canvas, {cx - r1, cy - r2}, {cx + r1, cy + r2}, col, cv::FILLED);
            }

            // Object.
            const double frac = rng.uniform(spec.min_frac, spec.max_frac);
            const int half = std::max(8, static_cast<int>(std::sqrt(frac) * s / 2.0));
            const int margin = half + 2;
            const cv::Point center(rng.range_int(margin, s - 1 - margin), rng.range_int(margin, s - 1 - margin));
            const double hue = rec.hue + rng.uniform(-12.0, 12.0);
            const cv::Scalar base = hsv_color(hue, rng.uniform(0.65, 0.9), rng.uniform(0.75, 0.95));

            cv::Mat mask = cv::Mat::zeros(s, s, CV_8UC1);
            draw_shape(canvas, mask, rec.shape, center, half, base);

            // Stripes inside the object, in a darker shade.
            const cv::Scalar stripe = hsv_color(hue, 0.9, 0.35);
            const int spacing = std::max(4, half / 3);
            cv::Mat striped = canvas.clone();
            for (int off = -half; off <= half; off += spacing) {
                if (rec.vertical_stripes)
                    cv::line(striped, {center.x + off, center.y - half}, {center.x + off, center.y + half}, stripe,
                             std::max(2, half / 10));
                else
                    cv::line(striped, {center.x - half, center.y + off}, {center.x + half, center.y + off}, stripe,
                             std::max(2, half / 10));
            }
            striped.copyTo(canvas, mask);

            // Discriminative marker: a small saturated dot at a class-specific
            // corner of the object, complementary hue.
            const int mx = center.x + (rec.marker_corner % 2 == 0 ? -1 : 1) * half / 2;
            const int my = center.y + (rec.marker_corner / 2 == 0 ? -1 : 1) * half / 2;
            const cv::Scalar marker = hsv_color(hue + 180.0, 1.0, 1.0);
            cv::Mat dotted = canvas.clone();
            cv::circle(dotted, {mx, my}, std::max(3, static_cast<int>(half * 0.22)), marker, cv::FILLED);
            dotted.copyTo(canvas, mask);

            // Object bbox from the mask (tight).
            cv::Rect bbox = cv::boundingRect(mask);

            char img_name[32];
            std::snprintf(img_name, sizeof(img_name), "img_%04d", n);
            img::save_png_rgb8((img_dir / (std::string(img_name) + ".png")).string(), canvas);

            json sidecar;
            sidecar["boxes"] = {{bbox.x, bbox.y, bbox.x + bbox.width, bbox.y + bbox.height}};
            sidecar["scores"] = {0.85 + 0.12 * rng.uniform()};
            std::ofstream det_out(det_dir / (std::string(img_name) + ".json"));
            if (!det_out) throw DataError("cannot write detection sidecar for " + std::string(img_name));
            det_out << sidecar.dump() << "\n";
        }
    }
}

}  // namespace dvf::data
