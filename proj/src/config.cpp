// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvf/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "dvf/errors.hpp"

using nlohmann::json;

namespace dvf::cli {

namespace {

std::string strip(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Removes a trailing comment that is not inside a string literal.
std::string strip_comment(const std::string& line) {
    bool in_str = false;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
        if (line[i] == '#' && !in_str) return line.substr(0, i);
    }
    return line;
}

json parse_scalar(const std::string& raw, int line_no) {
    const std::string v = strip(raw);
    if (v.empty()) throw ConfigurationError("config line " + std::to_string(line_no) + ": empty value");
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"')
            throw ConfigurationError("config line " + std::to_string(line_no) + ": unterminated string");
        std::string out;
        for (size_t i = 1; i + 1 < v.size(); ++i) {
            if (v[i] == '\\' && i + 2 < v.size()) {
                ++i;
                switch (v[i]) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default:
                        throw ConfigurationError("config line " + std::to_string(line_no) + ": unknown escape");
                }
            } else {
                out += v[i];
            }
        }
        return out;
    }
    if (v == "true") return true;
    if (v == "false") return false;
    try {
        size_t used = 0;
        if (v.find_first_of(".eE") == std::string::npos || (v.size() > 2 && v[0] == '0' && v[1] == 'x')) {
            const long long i = std::stoll(v, &used, 0);
            if (used == v.size()) return i;
        } else {
            const double d = std::stod(v, &used);
            if (used == v.size()) return d;
        }
    } catch (...) {
    }
    throw ConfigurationError("config line " + std::to_string(line_no) + ": cannot parse value '" + v + "'");
}

json parse_value(const std::string& raw, int line_no) {
    const std::string v = strip(raw);
    if (!v.empty() && v.front() == '[') {
        if (v.back() != ']')
            throw ConfigurationError("config line " + std::to_string(line_no) + ": unterminated array");
        json arr = json::array();
        std::string inner = v.substr(1, v.size() - 2);
        std::string item;
        bool in_str = false;
        for (char c : inner) {
            if (c == '"') in_str = !in_str;
            if (c == ',' && !in_str) {
                if (!strip(item).empty()) arr.push_back(parse_scalar(item, line_no));
                item.clear();
            } else {
                item += c;
            }
        }
        if (!strip(item).empty()) arr.push_back(parse_scalar(item, line_no));
        return arr;
    }
    return parse_scalar(v, line_no);
}

json* descend(json& tree, const std::string& dotted) {
    json* node = &tree;
    std::stringstream ss(dotted);
    std::string part;
    while (std::getline(ss, part, '.')) {
        part = strip(part);
        if (part.empty()) throw ConfigurationError("empty section name component in [" + dotted + "]");
        node = &(*node)[part];
    }
    return node;
}

}  // namespace

json parse_toml(const std::string& text) {
    json tree = json::object();
    json* section = &tree;
    std::stringstream ss(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(ss, raw)) {
        ++line_no;
        const std::string line = strip(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigurationError("config line " + std::to_string(line_no) + ": malformed section header");
            section = descend(tree, line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigurationError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = strip(line.substr(0, eq));
        if (key.empty()) throw ConfigurationError("config line " + std::to_string(line_no) + ": empty key");
        (*section)[key] = parse_value(line.substr(eq + 1), line_no);
    }
    return tree;
}

json parse_toml_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_toml(ss.str());
}

void apply_override(json& tree, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigurationError("--set expects section.key=value, got: " + assignment);
    const std::string path = strip(assignment.substr(0, eq));
    const std::string value = assignment.substr(eq + 1);
    json parsed;
    try {
        parsed = parse_value(value, 0);
    } catch (const ConfigurationError&) {
        parsed = strip(value);  // bare strings are convenient on the command line
    }
    *descend(tree, path) = parsed;
}

namespace {

// Strict field application: unknown keys are configuration errors.
template <typename T>
void take(json& section, const char* key, T& out) {
    if (!section.contains(key)) return;
    try {
        out = section.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigurationError(std::string("config key '") + key + "' has the wrong type");
    }
    section.erase(key);
}

void expect_empty(const json& section, const std::string& name) {
    if (!section.is_object()) throw ConfigurationError("config section '" + name + "' must be a table");
    if (!section.empty()) {
        std::string keys;
        for (const auto& [k, v] : section.items()) keys += (keys.empty() ? "" : ", ") + k;
        throw ConfigurationError("unknown config keys in [" + name + "]: " + keys);
    }
}

}  // namespace

RunConfig RunConfig::from_json(const json& tree_in) {
    json tree = tree_in;
    RunConfig c;

    json ds = tree.value("dataset", json::object());
    take(ds, "root", c.dataset.root);
    take(ds, "split_mode", c.dataset.split_mode);
    take(ds, "fraction", c.dataset.fraction);
    take(ds, "meta_category", c.dataset.meta_category);
    expect_empty(ds, "dataset");

    json ov = tree.value("ovf", json::object());
    take(ov, "enabled", c.ovf.enabled);
    take(ov, "alpha", c.ovf.alpha);
    take(ov, "enlarge_factor", c.ovf.enlarge_factor);
    take(ov, "aspect", c.ovf.aspect);
    take(ov, "provider", c.ovf.provider);
    take(ov, "endpoint", c.ovf.endpoint);
    take(ov, "sidecar_root", c.ovf.sidecar_root);
    take(ov, "cache_dir", c.ovf.cache_dir);
    take(ov, "timeout_s", c.ovf.timeout_s);
    take(ov, "pad_value", c.ovf.pad_value);
    expect_empty(ov, "ovf");

    json mo = tree.value("model", json::object());
    take(mo, "image_size", c.model.image_size);
    take(mo, "patch_size", c.model.patch_size);
    take(mo, "depth", c.model.depth);
    take(mo, "dim", c.model.dim);
    take(mo, "heads", c.model.heads);
    take(mo, "mlp_ratio", c.model.mlp_ratio);
    take(mo, "k", c.model.k);
    take(mo, "svf_enabled", c.model.svf_enabled);
    take(mo, "importance_generator", c.model.importance_generator);
    take(mo, "init_checkpoint", c.model.init_checkpoint);
    expect_empty(mo, "model");

    json tr = tree.value("train", json::object());
    take(tr, "lr", c.train.lr);
    take(tr, "batch_size", c.train.batch_size);
    take(tr, "epochs", c.train.epochs);
    take(tr, "beta", c.train.beta);
    take(tr, "proxy_lr_mult", c.train.proxy_lr_mult);
    take(tr, "seed", c.train.seed);
    take(tr, "dmt", c.train.dmt);
    take(tr, "brightness", c.train.brightness);
    take(tr, "contrast", c.train.contrast);
    take(tr, "saturation", c.train.saturation);
    take(tr, "hue", c.train.hue);
    take(tr, "grayscale_prob", c.train.grayscale_prob);
    take(tr, "blur_prob", c.train.blur_prob);
    take(tr, "blur_sigma", c.train.blur_sigma);
    take(tr, "flip_prob", c.train.flip_prob);
    expect_empty(tr, "train");

    json ev = tree.value("eval", json::object());
    take(ev, "ks", c.eval.ks);
    expect_empty(ev, "eval");

    tree.erase("dataset");
    tree.erase("ovf");
    tree.erase("model");
    tree.erase("train");
    tree.erase("eval");
    take(tree, "output_dir", c.output_dir);
    expect_empty(tree, "<top level>");

    c.validate();
    return c;
}

RunConfig RunConfig::from_file(const std::string& path, const std::vector<std::string>& overrides) {
    json tree = path.empty() ? json::object() : parse_toml_file(path);
    for (const auto& o : overrides) apply_override(tree, o);
    return from_json(tree);
}

json RunConfig::to_json() const {
    json j;
    j["dataset"] = {{"root", dataset.root},
                    {"split_mode", dataset.split_mode},
                    {"fraction", dataset.fraction},
                    {"meta_category", dataset.meta_category}};
    j["ovf"] = {{"enabled", ovf.enabled},       {"alpha", ovf.alpha},
                {"enlarge_factor", ovf.enlarge_factor}, {"aspect", ovf.aspect},
                {"provider", ovf.provider},     {"endpoint", ovf.endpoint},
                {"sidecar_root", ovf.sidecar_root}, {"cache_dir", ovf.cache_dir},
                {"timeout_s", ovf.timeout_s},   {"pad_value", ovf.pad_value}};
    j["model"] = {{"image_size", model.image_size}, {"patch_size", model.patch_size},
                  {"depth", model.depth},           {"dim", model.dim},
                  {"heads", model.heads},           {"mlp_ratio", model.mlp_ratio},
                  {"k", model.k},                   {"svf_enabled", model.svf_enabled},
                  {"importance_generator", model.importance_generator},
                  {"init_checkpoint", model.init_checkpoint}};
    j["train"] = {{"lr", train.lr},
                  {"batch_size", train.batch_size},
                  {"epochs", train.epochs},
                  {"beta", train.beta},
                  {"proxy_lr_mult", train.proxy_lr_mult},
                  {"seed", train.seed},
                  {"dmt", train.dmt},
                  {"brightness", train.brightness},
                  {"contrast", train.contrast},
                  {"saturation", train.saturation},
                  {"hue", train.hue},
                  {"grayscale_prob", train.grayscale_prob},
                  {"blur_prob", train.blur_prob},
                  {"blur_sigma", train.blur_sigma},
                  {"flip_prob", train.flip_prob}};
    j["eval"] = {{"ks", eval.ks}};
    j["output_dir"] = output_dir;
    return j;
}

void RunConfig::validate() const {
    if (!(dataset.fraction > 0.0 && dataset.fraction < 1.0))
        throw ConfigurationError("dataset.fraction must be in (0,1)");
    data::split_mode_from_string(dataset.split_mode);
    if (ovf.aspect.size() != 2 || ovf.aspect[0] <= 0 || ovf.aspect[1] <= 0)
        throw ConfigurationError("ovf.aspect must be two positive integers");
    if (ovf.pad_value.size() != 3) throw ConfigurationError("ovf.pad_value must be an RGB triple");
    if (ovf.provider != "fixture" && ovf.provider != "http")
        throw ConfigurationError("ovf.provider must be 'fixture' or 'http'");
    ovf_config().validate();
    encoder_config().validate();
    if (model.k < 1) throw ConfigurationError("model.k must be >= 1");
    if (train.blur_sigma.size() != 2) throw ConfigurationError("train.blur_sigma must be [min, max]");
    augmentation_policy().validate();
    train_settings().validate();
    if (eval.ks.empty()) throw ConfigurationError("eval.ks must not be empty");
    for (int k : eval.ks)
        if (k < 1) throw ConfigurationError("eval.ks entries must be >= 1");
    if (output_dir.empty()) throw ConfigurationError("output_dir must not be empty");
}

vit::EncoderConfig RunConfig::encoder_config() const {
    vit::EncoderConfig e;
    e.image_size = model.image_size;
    e.patch_size = model.patch_size;
    e.depth = model.depth;
    e.dim = model.dim;
    e.heads = model.heads;
    e.mlp_ratio = static_cast<float>(model.mlp_ratio);
    return e;
}

ovf::OvfConfig RunConfig::ovf_config() const {
    ovf::OvfConfig o;
    o.alpha = ovf.alpha;
    o.enlarge_factor = ovf.enlarge_factor;
    o.aspect_w = ovf.aspect[0];
    o.aspect_h = ovf.aspect[1];
    o.pad_value = {static_cast<unsigned char>(ovf.pad_value[0]), static_cast<unsigned char>(ovf.pad_value[1]),
                   static_cast<unsigned char>(ovf.pad_value[2])};
    return o;
}

data::AugmentationPolicy RunConfig::augmentation_policy() const {
    data::AugmentationPolicy p;
    p.brightness = train.brightness;
    p.contrast = train.contrast;
    p.saturation = train.saturation;
    p.hue = train.hue;
    p.grayscale_prob = train.grayscale_prob;
    p.blur_prob = train.blur_prob;
    p.blur_sigma_min = train.blur_sigma[0];
    p.blur_sigma_max = train.blur_sigma[1];
    p.flip_prob = train.flip_prob;
    p.rng_seed = train.seed;
    return p;
}

train::TrainSettings RunConfig::train_settings() const {
    train::TrainSettings s;
    s.lr = train.lr;
    s.batch_size = train.batch_size;
    s.epochs = train.epochs;
    s.beta = train.beta;
    s.proxy_lr_mult = train.proxy_lr_mult;
    s.seed = train.seed;
    s.dmt = train.dmt;
    s.policy = augmentation_policy();
    s.crop = model.image_size;
    s.resize_to = std::max(model.image_size, model.image_size * 256 / 224);
    return s;
}

std::string RunConfig::resolved_cache_dir() const {
    return ovf.cache_dir.empty() ? output_dir + "/detection_cache" : ovf.cache_dir;
}

}  // namespace dvf::cli
