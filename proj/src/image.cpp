// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvf/image.hpp"

#include "dvf/errors.hpp"

namespace dvf::img {

cv::Mat load_rgb8(const std::string& path) {
    cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
    if (bgr.empty()) throw DataError("cannot decode image: " + path);
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    return rgb;
}

cv::Mat to_float(const cv::Mat& rgb8) {
    cv::Mat f;
    rgb8.convertTo(f, CV_32FC3, 1.0 / 255.0);
    return f;
}

cv::Mat to_u8(const cv::Mat& rgbf) {
    cv::Mat u;
    rgbf.convertTo(u, CV_8UC3, 255.0);
    return u;
}

void save_png_rgb8(const std::string& path, const cv::Mat& rgb8) {
    cv::Mat bgr;
    cv::cvtColor(rgb8, bgr, cv::COLOR_RGB2BGR);
    if (!cv::imwrite(path, bgr)) throw DataError("cannot write image: " + path);
}

std::vector<unsigned char> encode_png_rgb8(const cv::Mat& rgb8) {
    cv::Mat bgr;
    cv::cvtColor(rgb8, bgr, cv::COLOR_RGB2BGR);
    std::vector<unsigned char> buf;
    if (!cv::imencode(".png", bgr, buf)) throw DataError("png encode failed");
    return buf;
}

cv::Mat decode_rgb8(const std::vector<unsigned char>& bytes) {
    cv::Mat bgr = cv::imdecode(bytes, cv::IMREAD_COLOR);
    if (bgr.empty()) throw DataError("cannot decode image buffer");
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    return rgb;
}

std::vector<float> to_chw_norm(const cv::Mat& rgbf) {
    const int h = rgbf.rows, w = rgbf.cols;
    std::vector<float> out(static_cast<size_t>(3) * h * w);
    for (int y = 0; y < h; ++y) {
        const cv::Vec3f* row = rgbf.ptr<cv::Vec3f>(y);
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                out[static_cast<size_t>(c) * h * w + static_cast<size_t>(y) * w + x] = (row[x][c] - 0.5f) / 0.5f;
            }
        }
    }
    return out;
}

namespace {
constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(unsigned char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}
}  // namespace

std::string base64_encode(const unsigned char* data, size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (size_t i = 0; i < len; i += 3) {
        unsigned v = static_cast<unsigned>(data[i]) << 16;
        if (i + 1 < len) v |= static_cast<unsigned>(data[i + 1]) << 8;
        if (i + 2 < len) v |= static_cast<unsigned>(data[i + 2]);
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out.push_back(i + 1 < len ? kB64[(v >> 6) & 63] : '=');
        out.push_back(i + 2 < len ? kB64[v & 63] : '=');
    }
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    int acc = 0, bits = 0;
    for (unsigned char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        int v = b64_value(c);
        if (v < 0) throw DataError("invalid base64 input");
        acc = (acc << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<unsigned char>((acc >> bits) & 0xff));
        }
    }
    return out;
}

}  // namespace dvf::img
