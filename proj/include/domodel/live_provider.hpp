#pragma once

#include <cstdlib>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "domodel/llm.hpp"

namespace domodel {

/// Where and how to reach an OpenAI-compatible chat-completions server.
struct LiveConfig {
    std::string endpoint = "https://api.openai.com/v1";
    std::string api_key;
    std::string model_name = "gpt-3.5-turbo";
    int timeout_seconds = 120;
};

/// Fills unset fields from DOMODEL_ENDPOINT, DOMODEL_API_KEY, DOMODEL_MODEL
/// and DOMODEL_TIMEOUT.
inline void apply_env(LiveConfig& cfg) {
    if (const char* v = std::getenv("DOMODEL_ENDPOINT"); v && *v) cfg.endpoint = v;
    if (const char* v = std::getenv("DOMODEL_API_KEY"); v && *v) cfg.api_key = v;
    if (const char* v = std::getenv("DOMODEL_MODEL"); v && *v) cfg.model_name = v;
    if (const char* v = std::getenv("DOMODEL_TIMEOUT"); v && *v) cfg.timeout_seconds = std::atoi(v);
}

/// Splits "https://host:port/prefix" into the origin and the path prefix.
inline std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    auto path_start = endpoint.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, ""};
    std::string prefix = endpoint.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {endpoint.substr(0, path_start), prefix};
}

class LiveProvider final : public ChatProvider {
public:
    explicit LiveProvider(LiveConfig cfg) : cfg_(std::move(cfg)) {}

    std::string complete(std::span<const ChatMessage> messages, const CompletionParams& params,
                         int /*attempt_index*/ = 0) override {
        check_request(messages, params);
        const auto [origin, prefix] = split_endpoint(cfg_.endpoint);

        nlohmann::json body = {{"model", params.model_name.empty() ? cfg_.model_name
                                                                   : params.model_name},
                               {"temperature", params.temperature}};
        nlohmann::json msgs = nlohmann::json::array();
        for (const auto& m : messages) msgs.push_back(to_json(m));
        body["messages"] = std::move(msgs);
        if (params.max_tokens) body["max_tokens"] = *params.max_tokens;

        httplib::Headers headers;
        if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

        // A client per request keeps the provider safe for concurrent use.
        httplib::Client client(origin);
        client.set_connection_timeout(cfg_.timeout_seconds, 0);
        client.set_read_timeout(cfg_.timeout_seconds, 0);
        client.set_write_timeout(cfg_.timeout_seconds, 0);
        auto res = client.Post(prefix + "/chat/completions", headers, body.dump(),
                               "application/json");
        if (!res) throw ProviderError("request to " + origin + " failed: " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw ProviderError("HTTP " + std::to_string(res->status) + " from " + origin + ": " +
                                res->body.substr(0, 500));
        try {
            auto doc = nlohmann::json::parse(res->body);
            const auto& content = doc.at("choices").at(0).at("message").at("content");
            if (!content.is_string()) throw ProviderError("response has no text content");
            return content.get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("malformed completion response: ") + e.what());
        }
    }

    const LiveConfig& config() const { return cfg_; }

private:
    LiveConfig cfg_;
};

}  // namespace domodel
