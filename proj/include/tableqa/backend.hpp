#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "tableqa/errors.hpp"
#include "tableqa/oracle.hpp"
#include "tableqa/strutil.hpp"

namespace tableqa {

struct CompletionRequest {
    std::string prompt;
    int max_tokens = 64;
    double temperature = 0.0;
    std::vector<std::string> stop = {"\nQ:"};
};

enum class BackendKind { Live, Mock };

struct CompletionResponse {
    std::string text;  // stop sequences stripped
    bool cached = false;
    BackendKind backend = BackendKind::Mock;
};

namespace detail {

inline std::string strip_at_stops(std::string text, const std::vector<std::string>& stops) {
    for (const auto& stop : stops) {
        if (stop.empty()) continue;
        if (const auto pos = text.find(stop); pos != std::string::npos) text.resize(pos);
    }
    return text;
}

inline std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

// Canonical request encoding: nlohmann orders keys alphabetically and renders
// doubles shortest-roundtrip, so equal requests hash equal everywhere.
inline nlohmann::json canonical_request(const CompletionRequest& req,
                                        const std::string& identity) {
    return nlohmann::json{{"identity", identity},
                          {"max_tokens", req.max_tokens},
                          {"prompt", req.prompt},
                          {"stop", req.stop},
                          {"temperature", req.temperature}};
}

}  // namespace detail

class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual CompletionResponse complete(const CompletionRequest& req) = 0;
    // Distinguishes cache namespaces (e.g. different live models).
    virtual std::string cache_identity() const = 0;
    // Invocations that actually reached this backend (network calls for Live).
    virtual std::uint64_t calls() const { return calls_.load(); }

protected:
    std::atomic<std::uint64_t> calls_{0};
};

// Markers the mock recognizes in the fixed instruction prompts built by the
// synthetic generator.
namespace mockspec {
inline constexpr std::string_view kSummarizePrefix = "Summarize: ";
inline constexpr std::string_view kSummarizeSuffix = "\nSummary:";
inline constexpr std::string_view kQgMarker = "Reply in the form: Q: <question> A: <answer>";
inline constexpr std::string_view kQgDescription = "Description: ";
inline constexpr std::string_view kQgAnswerConstraint = "Constraint: the answer must be exactly \"";
inline constexpr std::string_view kQgEntityConstraint = "Constraint: the question must mention \"";
inline constexpr std::string_view kRowKeyPrefix = "In the row for ";
}  // namespace mockspec

// Deterministic offline backend. Routes by prompt shape: row summarization
// echoes the description, question-generation prompts yield a templated
// Q/A pair, everything else goes through the table-QA oracle. Completions
// start with a single space, the way completion endpoints continue "A:".
class MockBackend : public CompletionBackend {
public:
    CompletionResponse complete(const CompletionRequest& req) override {
        ++calls_;
        CompletionResponse resp;
        resp.backend = BackendKind::Mock;
        resp.text = detail::strip_at_stops(answer(req.prompt), req.stop);
        return resp;
    }

    std::string cache_identity() const override { return "mock"; }

private:
    static std::string answer(const std::string& prompt) {
        using namespace mockspec;
        if (prompt.starts_with(kSummarizePrefix) && prompt.ends_with(kSummarizeSuffix)) {
            // Identity fallback: the "summary" is the description itself.
            return " " + prompt.substr(kSummarizePrefix.size(),
                                       prompt.size() - kSummarizePrefix.size() -
                                           kSummarizeSuffix.size());
        }
        if (prompt.find(kQgMarker) != std::string::npos) return " " + generate_qa(prompt);
        return " " + oracle_answer(prompt);
    }

    static std::string line_after(const std::string& text, std::string_view marker) {
        const auto pos = text.find(marker);
        if (pos == std::string::npos) return {};
        const auto start = pos + marker.size();
        const auto end = text.find('\n', start);
        return text.substr(start, end == std::string::npos ? std::string::npos : end - start);
    }

    static std::string generate_qa(const std::string& prompt) {
        using namespace mockspec;
        const std::string desc = line_after(prompt, kQgDescription);
        std::string key = desc;
        if (desc.starts_with(kRowKeyPrefix)) {
            const auto comma = desc.find(',', kRowKeyPrefix.size());
            key = desc.substr(kRowKeyPrefix.size(),
                              comma == std::string::npos ? std::string::npos
                                                         : comma - kRowKeyPrefix.size());
        }
        key = trim(key);

        std::string hint = line_after(prompt, kQgAnswerConstraint);
        if (!hint.empty()) {
            if (const auto q = hint.rfind("\".") ; q != std::string::npos) hint.resize(q);
            return "Q: What figure is listed for " + key + "? A: " + hint;
        }
        std::string entity = line_after(prompt, kQgEntityConstraint);
        if (!entity.empty()) {
            if (const auto q = entity.rfind("\".") ; q != std::string::npos) entity.resize(q);
            // Answer with the first described value, falling back to the key.
            std::string value = key;
            if (const auto is_pos = desc.find(" is "); is_pos != std::string::npos) {
                auto end = desc.find_first_of(",.", is_pos + 4);
                value = trim(desc.substr(is_pos + 4, end == std::string::npos
                                                         ? std::string::npos
                                                         : end - (is_pos + 4)));
            }
            return "Q: What is reported about " + entity + " in this row? A: " + value;
        }
        return "Q: What does this row describe? A: " + key;
    }
};

// File cache in front of any backend. Keys are SHA-256 of the canonical
// request JSON; entries are immutable once written. Concurrent misses may
// both compute; the rename-into-place write makes the last one win with
// identical content.
class CachedBackend : public CompletionBackend {
public:
    CachedBackend(std::filesystem::path dir, std::unique_ptr<CompletionBackend> inner)
        : dir_(std::move(dir)), inner_(std::move(inner)) {
        std::filesystem::create_directories(dir_);
    }

    CompletionResponse complete(const CompletionRequest& req) override {
        const auto canonical = detail::canonical_request(req, inner_->cache_identity());
        const std::string key = detail::sha256_hex(canonical.dump());
        const auto path = dir_ / (key + ".json");

        if (std::filesystem::exists(path)) {
            ++hits_;
            return load_entry(path);
        }
        ++misses_;
        CompletionResponse resp = inner_->complete(req);
        store_entry(path, canonical, resp);
        return resp;
    }

    std::string cache_identity() const override { return inner_->cache_identity(); }
    std::uint64_t calls() const override { return inner_->calls(); }
    std::uint64_t hits() const { return hits_.load(); }
    std::uint64_t misses() const { return misses_.load(); }
    CompletionBackend& inner() { return *inner_; }

private:
    static CompletionResponse load_entry(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw CacheCorrupt(path.string());
        std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("response_text") ||
            !j.at("response_text").is_string() || !j.contains("backend") ||
            !j.at("backend").is_string())
            throw CacheCorrupt(path.string());
        CompletionResponse resp;
        resp.text = j.at("response_text").get<std::string>();
        resp.backend = j.at("backend").get<std::string>() == "live" ? BackendKind::Live
                                                                    : BackendKind::Mock;
        resp.cached = true;
        return resp;
    }

    void store_entry(const std::filesystem::path& path, const nlohmann::json& canonical,
                     const CompletionResponse& resp) const {
        nlohmann::json entry{
            {"request", canonical},
            {"response_text", resp.text},
            {"backend", resp.backend == BackendKind::Live ? "live" : "mock"},
            {"timestamp", std::chrono::duration_cast<std::chrono::seconds>(
                              std::chrono::system_clock::now().time_since_epoch())
                              .count()}};
        const auto tmp = path.string() + ".tmp." +
                         std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
        {
            std::ofstream out(tmp, std::ios::binary);
            if (!out) throw Error("cannot write cache entry: " + tmp);
            out << entry.dump();
        }
        std::filesystem::rename(tmp, path);
    }

    std::filesystem::path dir_;
    std::unique_ptr<CompletionBackend> inner_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
};

}  // namespace tableqa
