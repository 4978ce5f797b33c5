#pragma once

// Run manifests: enough to replay a training run and to detect changed inputs.

#include <array>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "kgec/config.hpp"

namespace kgec {

inline constexpr const char* kToolkitVersion = "0.1.0";

inline std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for hashing");
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: digest init failed");
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest;
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

struct HashedInput {
    std::string role;  // train / valid / test / entailments
    std::filesystem::path path;
    std::string sha256;
};

struct RunManifest {
    std::string version = kToolkitVersion;
    TrainConfig config;
    std::filesystem::path data_dir;
    std::vector<HashedInput> inputs;
    std::vector<std::pair<std::string, std::filesystem::path>> outputs;

    std::uint64_t seed() const { return config.seed; }
};

inline HashedInput hash_input(std::string role, const std::filesystem::path& path) {
    return {std::move(role), std::filesystem::absolute(path), sha256_file(path)};
}

inline nlohmann::json to_json(const RunManifest& m) {
    nlohmann::json inputs = nlohmann::json::array();
    for (const auto& in : m.inputs) inputs.push_back({{"role", in.role}, {"path", in.path.string()}, {"sha256", in.sha256}});
    nlohmann::json outputs = nlohmann::json::object();
    for (const auto& [k, v] : m.outputs) outputs[k] = v.string();
    return {
        {"toolkit_version", m.version},
        {"seed", m.config.seed},
        {"config", to_config_text(m.config)},
        {"data_dir", m.data_dir.string()},
        {"inputs", inputs},
        {"outputs", outputs},
    };
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
    RunManifest m;
    m.version = j.at("toolkit_version").get<std::string>();
    std::istringstream cfg(j.at("config").get<std::string>());
    m.config = parse_config(cfg, "manifest config").train;
    m.data_dir = j.at("data_dir").get<std::string>();
    for (const auto& in : j.at("inputs"))
        m.inputs.push_back({in.at("role").get<std::string>(), in.at("path").get<std::string>(),
                            in.at("sha256").get<std::string>()});
    for (const auto& [k, v] : j.at("outputs").items()) m.outputs.emplace_back(k, v.get<std::string>());
    return m;
}

inline void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest '" + path.string() + "'");
    out << to_json(m).dump(2) << '\n';
}

inline RunManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest '" + path.string() + "'");
    return manifest_from_json(nlohmann::json::parse(in));
}

// Inputs whose current content no longer matches the recorded hash.
inline std::vector<std::string> changed_inputs(const RunManifest& m) {
    std::vector<std::string> out;
    for (const auto& in : m.inputs) {
        if (!std::filesystem::exists(in.path) || sha256_file(in.path) != in.sha256) out.push_back(in.path.string());
    }
    return out;
}

inline const HashedInput* find_input(const RunManifest& m, std::string_view role) {
    for (const auto& in : m.inputs)
        if (in.role == role) return &in;
    return nullptr;
}

}  // namespace kgec
