#pragma once

#include <chrono>
#include <string>
#include <thread>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tableqa/backend.hpp"
#include "tableqa/errors.hpp"

namespace tableqa {

struct LiveConfig {
    std::string endpoint;  // scheme://host[:port][/path]; path defaults to /v1/completions
    std::string model = "davinci";
    std::string api_key;
    int max_retries = 3;        // retries after the first attempt
    int retry_base_ms = 250;    // doubled per retry
    int timeout_seconds = 60;
};

namespace detail {

struct EndpointParts {
    std::string base;  // scheme://host[:port]
    std::string path;
};

inline EndpointParts parse_endpoint(const std::string& endpoint) {
    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos)
        throw TransportError("endpoint must include a scheme: " + endpoint);
    const auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/v1/completions"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace detail

// HTTP completions client. POSTs {model, prompt, max_tokens, temperature,
// stop} and reads choices[0].text back. Transient failures (429, 5xx,
// transport) retry with exponential backoff; auth failures do not.
class LiveBackend : public CompletionBackend {
public:
    explicit LiveBackend(LiveConfig config) : config_(std::move(config)) {
        if (config_.endpoint.empty()) throw TransportError("no endpoint configured");
        if (config_.api_key.empty())
            throw AuthError("no credential configured (set TABLEQA_API_KEY)");
    }

    CompletionResponse complete(const CompletionRequest& req) override {
        const auto parts = detail::parse_endpoint(config_.endpoint);
        const nlohmann::json body{{"model", config_.model},
                                  {"prompt", req.prompt},
                                  {"max_tokens", req.max_tokens},
                                  {"temperature", req.temperature},
                                  {"stop", req.stop}};
        const httplib::Headers headers{{"Authorization", "Bearer " + config_.api_key}};

        std::string last_error = "no attempt made";
        bool rate_limited = false;
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0)
                std::this_thread::sleep_for(std::chrono::milliseconds(
                    config_.retry_base_ms * (1 << (attempt - 1))));
            ++calls_;

            httplib::Client client(parts.base);
            client.set_connection_timeout(config_.timeout_seconds);
            client.set_read_timeout(config_.timeout_seconds);
            auto res = client.Post(parts.path, headers, body.dump(), "application/json");

            if (!res) {
                last_error = "connection failed: " + httplib::to_string(res.error());
                rate_limited = false;
                continue;
            }
            if (res->status == 401 || res->status == 403)
                throw AuthError("endpoint returned status " + std::to_string(res->status));
            if (res->status == 429) {
                last_error = "endpoint returned status 429";
                rate_limited = true;
                continue;
            }
            if (res->status >= 500) {
                last_error = "endpoint returned status " + std::to_string(res->status);
                rate_limited = false;
                continue;
            }
            if (res->status != 200)
                throw TransportError("endpoint returned status " + std::to_string(res->status));
            return parse_body(res->body, req);
        }
        if (rate_limited) throw RateLimited(last_error);
        throw TransportError(last_error);
    }

    std::string cache_identity() const override { return "live:" + config_.model; }

private:
    static CompletionResponse parse_body(const std::string& body, const CompletionRequest& req) {
        nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
        if (j.is_discarded()) throw MalformedResponse("response is not JSON");
        if (!j.contains("choices") || !j.at("choices").is_array() || j.at("choices").empty())
            throw MalformedResponse("response has no choices");
        const auto& first = j.at("choices").at(0);
        if (!first.contains("text") || !first.at("text").is_string())
            throw MalformedResponse("first choice has no text");
        CompletionResponse resp;
        resp.backend = BackendKind::Live;
        resp.text = detail::strip_at_stops(first.at("text").get<std::string>(), req.stop);
        return resp;
    }

    LiveConfig config_;
};

}  // namespace tableqa
