#pragma once

#include <cstdlib>
#include <stdexcept>
#include <string>

#include <httplib.h>
// httplib drags in <resolv.h>, whose _res macro breaks Eigen's kernels when
// it leaks into a translation unit that also does linear algebra
#ifdef _res
#undef _res
#endif
#include <json.hpp>

#include "tracelab/judge.hpp"

namespace tracelab::judge {

struct EndpointConfig {
    std::string base_url;             // e.g. http://localhost:8000
    std::string path = "/v1/completions";
    std::string model;
    double temperature = 0.0;         // judge temperature; not externally specified
    std::string api_key_env = "TRACELAB_API_KEY";
    int timeout_seconds = 120;
};

/// Completion-API client. The secret is read from the environment at request
/// time and never stored in configuration files.
class HttpCompletionClient : public CompletionClient {
public:
    explicit HttpCompletionClient(EndpointConfig config) : config_(std::move(config)) {
        if (config_.base_url.empty())
            throw std::invalid_argument("endpoint base_url is not configured");
    }

    std::string complete(const std::string& prompt) override {
        httplib::Client client(config_.base_url);
        client.set_connection_timeout(config_.timeout_seconds, 0);
        client.set_read_timeout(config_.timeout_seconds, 0);
        httplib::Headers headers;
        if (const char* key = std::getenv(config_.api_key_env.c_str()))
            headers.emplace("Authorization", std::string("Bearer ") + key);
        nlohmann::json body;
        body["model"] = config_.model;
        body["prompt"] = prompt;
        body["temperature"] = config_.temperature;
        auto res = client.Post(config_.path, headers, body.dump(), "application/json");
        if (!res)
            throw TransportError("endpoint unreachable: " + config_.base_url +
                                 " (" + httplib::to_string(res.error()) + ")");
        if (res->status < 200 || res->status >= 300)
            throw TransportError("endpoint returned HTTP " + std::to_string(res->status));
        return extract_text(res->body);
    }

private:
    static std::string extract_text(const std::string& body) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception&) {
            return body;  // plain-text endpoint
        }
        if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
            const auto& c = j["choices"][0];
            if (c.contains("text")) return c["text"].get<std::string>();
            if (c.contains("message") && c["message"].contains("content"))
                return c["message"]["content"].get<std::string>();
        }
        for (const char* key : {"text", "completion", "content"})
            if (j.contains(key) && j[key].is_string()) return j[key].get<std::string>();
        throw TransportError("endpoint response has no completion text field");
    }

    EndpointConfig config_;
};

}  // namespace tracelab::judge
