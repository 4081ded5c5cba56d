// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "dvf/dataset.hpp"
#include "dvf/errors.hpp"
#include "testutil.hpp"

using namespace dvf;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

void write_image(const fs::path& p, int w = 48, int h = 48, cv::Vec3b color = {100, 150, 200}) {
    fs::create_directories(p.parent_path());
    cv::Mat m(h, w, CV_8UC3, cv::Scalar(color[0], color[1], color[2]));
    img::save_png_rgb8(p.string(), m);
}

void make_corpus(const TempDir& tmp, int classes, int per_class) {
    for (int c = 0; c < classes; ++c)
        for (int i = 0; i < per_class; ++i)
            write_image(tmp.path() / "root" / ("class_" + std::string(1, static_cast<char>('a' + c))) /
                        ("img_" + std::to_string(i) + ".png"));
}

cv::Mat random_float_image(Rng& rng, int w = 40, int h = 30) {
    cv::Mat m(h, w, CV_32FC3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            m.at<cv::Vec3f>(y, x) = {static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform()),
                                     static_cast<float>(rng.uniform())};
    return m;
}

}  // namespace

TEST_CASE("open split: first half of the classes train, rest test") {
    TempDir tmp("open");
    make_corpus(tmp, 8, 3);
    const auto m = data::build_manifest((tmp.path() / "root").string(), data::SplitMode::open, 0.5, "bird");
    CHECK(m.records.size() == 24);
    const auto train_labels = m.label_set(data::Split::train);
    const auto test_labels = m.label_set(data::Split::test);
    CHECK(train_labels == std::vector<int>{0, 1, 2, 3});
    CHECK(test_labels == std::vector<int>{4, 5, 6, 7});
    m.check_invariants();
}

TEST_CASE("open split: single class cannot produce a test side") {
    TempDir tmp("open1");
    make_corpus(tmp, 1, 3);
    CHECK_THROWS_AS(data::build_manifest((tmp.path() / "root").string(), data::SplitMode::open, 0.5, "bird"),
                    ManifestError);
}

TEST_CASE("closed split: 4x10 at fraction 0.5 gives 20/20 with all labels on both sides") {
    TempDir tmp("closed");
    make_corpus(tmp, 4, 10);
    const auto m = data::build_manifest((tmp.path() / "root").string(), data::SplitMode::closed, 0.5, "bird");
    CHECK(m.subset(data::Split::train).size() == 20);
    CHECK(m.subset(data::Split::test).size() == 20);
    CHECK(m.label_set(data::Split::train) == std::vector<int>{0, 1, 2, 3});
    CHECK(m.label_set(data::Split::test) == std::vector<int>{0, 1, 2, 3});

    // deterministic partition: evenly spread quota over sorted file names
    const auto again = data::build_manifest((tmp.path() / "root").string(), data::SplitMode::closed, 0.5, "bird");
    for (size_t i = 0; i < m.records.size(); ++i) CHECK(m.records[i].split == again.records[i].split);
}

TEST_CASE("closed split keeps both sides nonempty at extreme fractions") {
    TempDir tmp("extreme");
    make_corpus(tmp, 3, 2);
    for (double f : {0.05, 0.95}) {
        const auto m = data::build_manifest((tmp.path() / "root").string(), data::SplitMode::closed, f, "bird");
        CHECK(m.label_set(data::Split::train) == m.label_set(data::Split::test));
    }
}

TEST_CASE("manifest rejects empty roots, singleton closed classes, and tiny images") {
    TempDir tmp("bad");
    fs::create_directories(tmp.path() / "empty_root");
    CHECK_THROWS_AS(data::build_manifest((tmp.path() / "empty_root").string(), data::SplitMode::closed, 0.5, "x"),
                    ConfigurationError);
    CHECK_THROWS_AS(data::build_manifest((tmp.path() / "missing").string(), data::SplitMode::closed, 0.5, "x"),
                    ConfigurationError);

    write_image(tmp.path() / "single" / "class_a" / "only.png");
    write_image(tmp.path() / "single" / "class_b" / "img_0.png");
    write_image(tmp.path() / "single" / "class_b" / "img_1.png");
    CHECK_THROWS_AS(data::build_manifest((tmp.path() / "single").string(), data::SplitMode::closed, 0.5, "x"),
                    ManifestError);

    write_image(tmp.path() / "tiny" / "class_a" / "img_0.png", 16, 16);
    write_image(tmp.path() / "tiny" / "class_a" / "img_1.png");
    CHECK_THROWS_AS(data::build_manifest((tmp.path() / "tiny").string(), data::SplitMode::closed, 0.5, "x"),
                    ManifestError);

    CHECK_THROWS_AS(data::build_manifest((tmp.path() / "single").string(), data::SplitMode::open, 1.5, "x"),
                    ConfigurationError);
}

TEST_CASE("open-split label sets are disjoint across random corpora") {
    Rng rng(55);
    for (int trial = 0; trial < 6; ++trial) {
        TempDir tmp("prop" + std::to_string(trial));
        const int classes = 2 + static_cast<int>(rng.below(7));
        for (int c = 0; c < classes; ++c) {
            const int imgs = 2 + static_cast<int>(rng.below(4));
            for (int i = 0; i < imgs; ++i)
                write_image(tmp.path() / "root" / ("c" + std::to_string(c)) / ("i" + std::to_string(i) + ".png"));
        }
        const double fraction = 0.15 + 0.7 * rng.uniform();
        data::DatasetManifest m;
        try {
            m = data::build_manifest((tmp.path() / "root").string(), data::SplitMode::open, fraction, "x");
        } catch (const ManifestError&) {
            continue;  // fraction rounded to an empty test side; rejection is the contract
        }
        std::set<int> train, test;
        for (const auto& r : m.records) (r.split == data::Split::train ? train : test).insert(r.label);
        for (int l : train) CHECK(test.count(l) == 0);
        CHECK(!test.empty());
        CHECK(!train.empty());
    }
}

TEST_CASE("manifest JSON round-trip preserves records") {
    TempDir tmp("json");
    make_corpus(tmp, 2, 3);
    const auto m = data::build_manifest((tmp.path() / "root").string(), data::SplitMode::open, 0.5, "bird");
    m.save(tmp.file("manifest.json"));
    const auto loaded = data::DatasetManifest::load(tmp.file("manifest.json"));
    CHECK(loaded.meta_category == "bird");
    CHECK(loaded.split_mode == data::SplitMode::open);
    REQUIRE(loaded.records.size() == m.records.size());
    for (size_t i = 0; i < m.records.size(); ++i) {
        CHECK(loaded.records[i].id == m.records[i].id);
        CHECK(loaded.records[i].label == m.records[i].label);
        CHECK(loaded.records[i].split == m.records[i].split);
    }
}

TEST_CASE("augment with a zeroed policy is the identity on pixels") {
    Rng rng(60), draw(61);
    const auto image = random_float_image(rng);
    data::AugmentationPolicy zero;
    const auto out = data::augment(image, zero, draw);
    REQUIRE(out.size() == image.size());
    for (int y = 0; y < image.rows; ++y)
        for (int x = 0; x < image.cols; ++x) CHECK(out.at<cv::Vec3f>(y, x) == image.at<cv::Vec3f>(y, x));
    CHECK(out.data != image.data);  // never aliases the input
}

TEST_CASE("grayscale probability 1 forces R=G=B everywhere") {
    Rng rng(62), draw(63);
    const auto image = random_float_image(rng);
    data::AugmentationPolicy p;
    p.grayscale_prob = 1.0;
    const auto out = data::augment(image, p, draw);
    for (int y = 0; y < out.rows; ++y)
        for (int x = 0; x < out.cols; ++x) {
            const auto& v = out.at<cv::Vec3f>(y, x);
            CHECK(v[0] == doctest::Approx(v[1]).epsilon(1e-6));
            CHECK(v[1] == doctest::Approx(v[2]).epsilon(1e-6));
        }
}

TEST_CASE("augment is bit-deterministic under a fixed seed") {
    Rng rng(64);
    const auto image = random_float_image(rng);
    const auto policy = data::AugmentationPolicy::training_defaults();
    Rng draw1(1234), draw2(1234);
    const auto a = data::augment(image, policy, draw1);
    const auto b = data::augment(image, policy, draw2);
    for (int y = 0; y < a.rows; ++y)
        for (int x = 0; x < a.cols; ++x) CHECK(a.at<cv::Vec3f>(y, x) == b.at<cv::Vec3f>(y, x));
}

TEST_CASE("augment validates its policy") {
    data::AugmentationPolicy p;
    p.grayscale_prob = 1.5;
    CHECK_THROWS_AS(p.validate(), ConfigurationError);
    p = {};
    p.blur_sigma_min = 3.0;
    p.blur_sigma_max = 1.0;
    CHECK_THROWS_AS(p.validate(), ConfigurationError);
}

TEST_CASE("resize_crop: eval mode takes the centered window") {
    Rng rng(65);
    cv::Mat image(256, 256, CV_32FC3);
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 256; ++x)
            image.at<cv::Vec3f>(y, x) = {static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform()),
                                         static_cast<float>(rng.uniform())};
    const auto out = data::resize_crop(image, false);
    REQUIRE(out.rows == 224);
    REQUIRE(out.cols == 224);
    for (int y = 0; y < 224; ++y)
        for (int x = 0; x < 224; ++x) CHECK(out.at<cv::Vec3f>(y, x) == image.at<cv::Vec3f>(y + 16, x + 16));
}

TEST_CASE("resize_crop: a 512 input equals resizing to 256 first") {
    Rng rng(66);
    cv::Mat big(512, 512, CV_32FC3);
    for (int y = 0; y < 512; ++y)
        for (int x = 0; x < 512; ++x)
            big.at<cv::Vec3f>(y, x) = {static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform()),
                                       static_cast<float>(rng.uniform())};
    cv::Mat pre;
    cv::resize(big, pre, {256, 256}, 0, 0, cv::INTER_LINEAR);
    const auto direct = data::resize_crop(big, false);
    const auto staged = data::resize_crop(pre, false);
    for (int y = 0; y < 224; ++y)
        for (int x = 0; x < 224; ++x) CHECK(direct.at<cv::Vec3f>(y, x) == staged.at<cv::Vec3f>(y, x));
}

TEST_CASE("resize_crop: train mode is reproducible under a fixed seed") {
    Rng rng(67);
    const auto image = random_float_image(rng, 300, 270);
    Rng d1(99), d2(99);
    const auto a = data::resize_crop(image, true, &d1);
    const auto b = data::resize_crop(image, true, &d2);
    for (int y = 0; y < 224; ++y)
        for (int x = 0; x < 224; ++x) CHECK(a.at<cv::Vec3f>(y, x) == b.at<cv::Vec3f>(y, x));
    CHECK_THROWS_AS(data::resize_crop(image, true, nullptr), ConfigurationError);
}
