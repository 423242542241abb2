#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tableqa/errors.hpp"
#include "tableqa/eval.hpp"
#include "tableqa/ingest.hpp"

namespace tableqa {

// Credential environment variable for the live backend.
inline constexpr const char* kApiKeyEnv = "TABLEQA_API_KEY";

// Everything a run needs. Precedence when assembling: flags > config file >
// environment > these defaults.
struct RunConfig {
    BackendKind backend = BackendKind::Mock;
    std::string endpoint;
    std::string model = "davinci";
    std::size_t k = 3;                  // few-shot examples per prompt
    Policy policy = Policy::Containment;
    std::size_t budget = 8192;          // prompt budget in characters
    std::size_t chars_per_token = 4;    // token estimate backing the default budget
    std::string cache_dir = ".tableqa-cache";
    std::uint64_t seed = 0;
    std::size_t concurrency = 4;
    int max_tokens = 64;
    double temperature = 0.0;
    std::vector<std::string> stop = {"\nQ:"};
    bool include_reference_row = false;
    KeywordConfig keywords = KeywordConfig::defaults();

    // Snapshot embedded in reports. Never includes the credential.
    nlohmann::json to_json() const {
        return nlohmann::json{{"backend", backend == BackendKind::Live ? "live" : "mock"},
                              {"endpoint", endpoint},
                              {"model", model},
                              {"k", k},
                              {"policy", policy_name(policy)},
                              {"budget", budget},
                              {"chars_per_token", chars_per_token},
                              {"cache_dir", cache_dir},
                              {"seed", seed},
                              {"concurrency", concurrency},
                              {"max_tokens", max_tokens},
                              {"temperature", temperature},
                              {"stop", stop}};
    }

    EvalOptions eval_options(PromptMode mode) const {
        EvalOptions opts;
        opts.mode = mode;
        opts.policy = policy;
        opts.k = k;
        opts.budget = budget;
        opts.concurrency = concurrency;
        opts.max_tokens = max_tokens;
        opts.temperature = temperature;
        opts.stop = stop;
        return opts;
    }
};

inline BackendKind backend_from_name(const std::string& name) {
    const std::string n = to_lower(trim(name));
    if (n == "mock") return BackendKind::Mock;
    if (n == "live") return BackendKind::Live;
    throw Error("unknown backend: " + name);
}

// Environment layer (sits between defaults and the config file).
inline void apply_env(RunConfig& config) {
    if (const char* v = std::getenv("TABLEQA_BACKEND")) config.backend = backend_from_name(v);
    if (const char* v = std::getenv("TABLEQA_ENDPOINT")) config.endpoint = v;
    if (const char* v = std::getenv("TABLEQA_MODEL")) config.model = v;
    if (const char* v = std::getenv("TABLEQA_CACHE_DIR")) config.cache_dir = v;
}

// JSON config file layer. Unknown keys are rejected to catch typos.
inline void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("config file is not valid JSON: " + std::string(e.what()));
    }
    for (const auto& [key, value] : j.items()) {
        if (key == "backend") config.backend = backend_from_name(value.get<std::string>());
        else if (key == "endpoint") config.endpoint = value.get<std::string>();
        else if (key == "model") config.model = value.get<std::string>();
        else if (key == "k") config.k = value.get<std::size_t>();
        else if (key == "policy") config.policy = policy_from_name(value.get<std::string>());
        else if (key == "budget") config.budget = value.get<std::size_t>();
        else if (key == "chars_per_token") config.chars_per_token = value.get<std::size_t>();
        else if (key == "cache_dir") config.cache_dir = value.get<std::string>();
        else if (key == "seed") config.seed = value.get<std::uint64_t>();
        else if (key == "concurrency") config.concurrency = value.get<std::size_t>();
        else if (key == "max_tokens") config.max_tokens = value.get<int>();
        else if (key == "temperature") config.temperature = value.get<double>();
        else if (key == "stop") config.stop = value.get<std::vector<std::string>>();
        else if (key == "include_reference_row") config.include_reference_row = value.get<bool>();
        else if (key == "keywords") {
            if (value.contains("weather"))
                config.keywords.weather = value.at("weather").get<std::vector<std::string>>();
            if (value.contains("sports"))
                config.keywords.sports = value.at("sports").get<std::vector<std::string>>();
            if (value.contains("financial"))
                config.keywords.financial = value.at("financial").get<std::vector<std::string>>();
        } else {
            throw Error("unknown config key: " + key);
        }
    }
}

}  // namespace tableqa
