// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvf/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "dvf/errors.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace dvf::ckpt {

void save(const std::string& path, const NamedTensors& bundle) {
    json manifest;
    manifest["meta"] = bundle.meta;
    manifest["tensors"] = json::object();
    uint64_t offset = 0;
    for (const auto& [name, t] : bundle.tensors) {  // std::map: sorted, stable offsets
        manifest["tensors"][name] = {{"shape", t.shape}, {"dtype", "f32"}, {"offset", offset}};
        offset += t.size() * sizeof(float);
    }
    const std::string header = manifest.dump();

    const fs::path tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write checkpoint: " + path);
        out.write("DVFC", 4);
        const uint32_t version = 1;
        out.write(reinterpret_cast<const char*>(&version), sizeof(version));
        const uint64_t len = header.size();
        out.write(reinterpret_cast<const char*>(&len), sizeof(len));
        out.write(header.data(), static_cast<std::streamsize>(header.size()));
        for (const auto& [name, t] : bundle.tensors)
            out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
        if (!out) throw DataError("short write to checkpoint: " + path);
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw DataError("cannot commit checkpoint: " + path + " (" + ec.message() + ")");
}

NamedTensors load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "DVFC", 4) != 0) throw DataError("bad checkpoint magic: " + path);
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != 1) throw DataError("unsupported checkpoint version " + std::to_string(version));
    uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string header(len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(len));
    json manifest;
    try {
        manifest = json::parse(header);
    } catch (const json::exception& e) {
        throw DataError("corrupt checkpoint manifest: " + std::string(e.what()));
    }

    NamedTensors bundle;
    bundle.meta = manifest.value("meta", json::object());
    const auto blob_start = in.tellg();
    for (const auto& [name, tj] : manifest.at("tensors").items()) {
        Tensor<float> t;
        t.resize(tj.at("shape").get<std::vector<int>>());
        if (tj.at("dtype").get<std::string>() != "f32")
            throw DataError("unsupported tensor dtype in checkpoint: " + name);
        in.seekg(blob_start + static_cast<std::streamoff>(tj.at("offset").get<uint64_t>()));
        in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
        if (!in) throw DataError("truncated checkpoint tensor: " + name);
        bundle.tensors.emplace(name, std::move(t));
    }
    return bundle;
}

}  // namespace dvf::ckpt
