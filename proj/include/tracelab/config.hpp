#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracelab/util.hpp"

namespace tracelab {

/// `key = value` lines; '#' starts a comment. Secrets never live here, only
/// the name of the environment variable holding them.
inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::size_t lineno = 0;
    for (const auto& raw_line : split(text, '\n')) {
        ++lineno;
        std::string line = raw_line;
        if (auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
        out[key] = value;
    }
    return out;
}

struct RunConfig {
    std::filesystem::path corpus;
    std::filesystem::path out_dir = "out";
    std::filesystem::path cache;

    std::string endpoint_base_url;
    std::string endpoint_model;
    double endpoint_temperature = 0.0;
    std::string api_key_env = "TRACELAB_API_KEY";

    int jobs = 4;
    int presence_threshold = 1;
    bool entropy_normalized = true;
    std::uint64_t seed = 0;

    std::filesystem::path embeddings;       // persona embedding vectors (jsonl)
    std::filesystem::path activations_dir;  // per-trace activation files
    std::filesystem::path catalog;          // feature catalog tsv
    std::string reference_model;            // baseline level for model dummies

    std::vector<std::string> annotate_kinds = {"conversational_behaviors", "ipa_roles",
                                               "cognitive_behaviors", "complexity",
                                               "persona_identification", "persona_segmentation"};

    void validate() const {
        if (jobs < 1) throw std::invalid_argument("config: jobs must be >= 1");
        if (presence_threshold < 1)
            throw std::invalid_argument("config: presence_threshold must be >= 1");
    }
};

inline RunConfig run_config_from_map(const std::map<std::string, std::string>& kv) {
    RunConfig c;
    auto get = [&](const std::string& key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    if (auto* v = get("corpus")) c.corpus = *v;
    if (auto* v = get("out_dir")) c.out_dir = *v;
    if (auto* v = get("cache")) c.cache = *v;
    if (auto* v = get("endpoint_base_url")) c.endpoint_base_url = *v;
    if (auto* v = get("endpoint_model")) c.endpoint_model = *v;
    if (auto* v = get("endpoint_temperature")) c.endpoint_temperature = std::stod(*v);
    if (auto* v = get("api_key_env")) c.api_key_env = *v;
    if (auto* v = get("jobs")) c.jobs = std::stoi(*v);
    if (auto* v = get("presence_threshold")) c.presence_threshold = std::stoi(*v);
    if (auto* v = get("entropy_mode")) {
        if (*v == "normalized") c.entropy_normalized = true;
        else if (*v == "raw") c.entropy_normalized = false;
        else throw std::runtime_error("config: entropy_mode must be normalized or raw");
    }
    if (auto* v = get("seed")) c.seed = std::stoull(*v);
    if (auto* v = get("embeddings")) c.embeddings = *v;
    if (auto* v = get("activations_dir")) c.activations_dir = *v;
    if (auto* v = get("catalog")) c.catalog = *v;
    if (auto* v = get("reference_model")) c.reference_model = *v;
    if (auto* v = get("annotate_kinds")) {
        c.annotate_kinds.clear();
        for (auto& k : split(*v, ',')) c.annotate_kinds.push_back(trim(k));
    }
    for (const auto& [key, value] : kv) {
        static const std::vector<std::string> known = {
            "corpus", "out_dir", "cache", "endpoint_base_url", "endpoint_model",
            "endpoint_temperature", "api_key_env", "jobs", "presence_threshold",
            "entropy_mode", "seed", "embeddings", "activations_dir", "catalog",
            "reference_model", "annotate_kinds"};
        bool ok = false;
        for (const auto& k : known) ok |= (k == key);
        if (!ok) throw std::runtime_error("config: unknown key " + key);
    }
    c.validate();
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    return run_config_from_map(parse_config_text(read_file(path)));
}

}  // namespace tracelab
