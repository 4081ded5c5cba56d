// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "dvf/tensor.hpp"

namespace dvf::ckpt {

// Named-tensor container: "DVFC", u32 version, u64 manifest length, manifest
// JSON {meta, tensors: {name: {shape, dtype, offset}}}, then the raw f32
// little-endian blob. Writes are atomic (temp + rename) and byte-stable.
struct NamedTensors {
    std::map<std::string, Tensor<float>> tensors;
    nlohmann::json meta = nlohmann::json::object();
};

void save(const std::string& path, const NamedTensors& bundle);
NamedTensors load(const std::string& path);

}  // namespace dvf::ckpt
