// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// OpenCV 4.5 headers trip -Wdeprecated-enum-enum-conversion under C++20.
#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wdeprecated-enum-enum-conversion"
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#pragma GCC diagnostic pop

#include <string>
#include <vector>

namespace dvf::img {

// Images are RGB throughout; BGR exists only inside these helpers.

// Decode from disk to 8-bit RGB. Throws DataError on failure.
cv::Mat load_rgb8(const std::string& path);

// 8-bit RGB <-> float RGB in [0, 1].
cv::Mat to_float(const cv::Mat& rgb8);
cv::Mat to_u8(const cv::Mat& rgbf);

void save_png_rgb8(const std::string& path, const cv::Mat& rgb8);
std::vector<unsigned char> encode_png_rgb8(const cv::Mat& rgb8);
cv::Mat decode_rgb8(const std::vector<unsigned char>& bytes);

// Float RGB HxWx3 -> CHW tensor normalized to [-1, 1].
std::vector<float> to_chw_norm(const cv::Mat& rgbf);

std::string base64_encode(const unsigned char* data, size_t len);
std::vector<unsigned char> base64_decode(const std::string& text);

}  // namespace dvf::img
