#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "domodel/digest.hpp"
#include "domodel/error.hpp"
#include "domodel/metamodel.hpp"

namespace domodel {

enum class Role { System, User, Assistant };

inline std::string_view to_string(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "?";
}

inline Role parse_role(std::string_view s) {
    if (s == "system") return Role::System;
    if (s == "user") return Role::User;
    if (s == "assistant") return Role::Assistant;
    throw SchemaError("unknown chat role '" + std::string(s) + "'");
}

struct ChatMessage {
    Role role = Role::User;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct CompletionParams {
    double temperature = 0.7;
    std::optional<int> max_tokens;
    std::string model_name = "gpt-3.5-turbo";
    // Bookkeeping label; not part of the replay key.
    std::optional<TaskKind> task;

    friend bool operator==(const CompletionParams&, const CompletionParams&) = default;
};

/// Temperature as it participates in replay keys: one decimal.
inline std::string temperature_key(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", std::round(t * 10.0) / 10.0 + 0.0);
    return buf;
}

inline void check_request(std::span<const ChatMessage> messages, const CompletionParams& params) {
    if (messages.empty()) throw Error("completion request has no messages");
    for (const auto& m : messages)
        if (m.content.empty()) throw Error("completion request contains an empty message");
    if (!(params.temperature >= 0.0 && params.temperature <= 2.0))
        throw Error("temperature " + std::to_string(params.temperature) + " outside [0, 2]");
    if (params.max_tokens && *params.max_tokens <= 0) throw Error("max_tokens must be positive");
}

/// Digest of the ordered messages, rounded temperature and model name.
inline std::string transcript_key(std::span<const ChatMessage> messages,
                                  const CompletionParams& params) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& m : messages) doc.push_back({to_string(m.role), m.content});
    nlohmann::json key = {doc, temperature_key(params.temperature), params.model_name};
    return sha256_hex(key.dump());
}

struct TranscriptRecord {
    std::string key;
    std::vector<ChatMessage> request;
    CompletionParams params;
    std::string response;
    int attempt_index = 0;

    friend bool operator==(const TranscriptRecord&, const TranscriptRecord&) = default;
};

inline nlohmann::json to_json(const ChatMessage& m) {
    return {{"role", to_string(m.role)}, {"content", m.content}};
}

inline nlohmann::json to_json(const CompletionParams& p) {
    nlohmann::json j = {{"temperature", p.temperature}, {"model_name", p.model_name}};
    j["max_tokens"] = p.max_tokens ? nlohmann::json(*p.max_tokens) : nlohmann::json(nullptr);
    j["task"] = p.task ? nlohmann::json(to_string(*p.task)) : nlohmann::json(nullptr);
    return j;
}

inline nlohmann::json to_json(const TranscriptRecord& r) {
    nlohmann::json req = nlohmann::json::array();
    for (const auto& m : r.request) req.push_back(to_json(m));
    return {{"key", r.key},
            {"request", req},
            {"params", to_json(r.params)},
            {"response", r.response},
            {"attempt_index", r.attempt_index}};
}

inline TranscriptRecord transcript_from_json(const nlohmann::json& j) {
    try {
        TranscriptRecord r;
        r.key = j.at("key").get<std::string>();
        for (const auto& m : j.at("request"))
            r.request.push_back({parse_role(m.at("role").get<std::string>()),
                                 m.at("content").get<std::string>()});
        const auto& p = j.at("params");
        r.params.temperature = p.at("temperature").get<double>();
        r.params.model_name = p.at("model_name").get<std::string>();
        if (p.contains("max_tokens") && !p["max_tokens"].is_null())
            r.params.max_tokens = p["max_tokens"].get<int>();
        if (p.contains("task") && !p["task"].is_null())
            r.params.task = parse_task_kind(p["task"].get<std::string>());
        r.response = j.at("response").get<std::string>();
        r.attempt_index = j.at("attempt_index").get<int>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bad transcript record: ") + e.what());
    }
}

/// Newline-delimited transcript file plus an in-memory index. Reads may run
/// concurrently; appends are serialized.
class TranscriptStore {
public:
    TranscriptStore() = default;

    /// Loads `path` if it exists; later appends go to the same file.
    static TranscriptStore open(const std::string& path) {
        TranscriptStore store;
        store.path_ = path;
        std::ifstream in(path);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
            }
            store.index(transcript_from_json(j));
        }
        return store;
    }

    TranscriptStore(TranscriptStore&& other) noexcept
        : path_(std::move(other.path_)),
          records_(std::move(other.records_)),
          by_key_(std::move(other.by_key_)) {}

    void append(TranscriptRecord record) {
        std::unique_lock lock(mutex_);
        if (path_) {
            std::ofstream out(*path_, std::ios::app);
            if (!out) throw Error("cannot append to transcript store " + *path_);
            out << to_json(record).dump() << '\n';
        }
        index(std::move(record));
    }

    std::optional<std::string> find(const std::string& key, int attempt) const {
        std::shared_lock lock(mutex_);
        auto it = by_key_.find({key, attempt});
        if (it == by_key_.end()) return std::nullopt;
        return records_[it->second].response;
    }

    std::vector<TranscriptRecord> records() const {
        std::shared_lock lock(mutex_);
        return records_;
    }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return records_.size();
    }

    const std::optional<std::string>& path() const { return path_; }

private:
    // First record for a (key, attempt) wins.
    void index(TranscriptRecord record) {
        by_key_.try_emplace({record.key, record.attempt_index}, records_.size());
        records_.push_back(std::move(record));
    }

    std::optional<std::string> path_;
    std::vector<TranscriptRecord> records_;
    std::map<std::pair<std::string, int>, std::size_t> by_key_;
    mutable std::shared_mutex mutex_;
};

/// Chat-completion backend. Implementations must tolerate concurrent calls.
class ChatProvider {
public:
    virtual ~ChatProvider() = default;

    /// `attempt_index` distinguishes re-generations of the same request.
    virtual std::string complete(std::span<const ChatMessage> messages,
                                 const CompletionParams& params, int attempt_index = 0) = 0;
};

class ReplayProvider final : public ChatProvider {
public:
    explicit ReplayProvider(const TranscriptStore& store) : store_(store) {}

    std::string complete(std::span<const ChatMessage> messages, const CompletionParams& params,
                         int attempt_index = 0) override {
        check_request(messages, params);
        const auto key = transcript_key(messages, params);
        if (auto hit = store_.find(key, attempt_index)) return *hit;
        throw ReplayMiss(key, attempt_index);
    }

private:
    const TranscriptStore& store_;
};

/// Forwards to `inner` and appends every exchange to `store`.
class RecordingProvider final : public ChatProvider {
public:
    RecordingProvider(ChatProvider& inner, TranscriptStore& store) : inner_(inner), store_(store) {}

    std::string complete(std::span<const ChatMessage> messages, const CompletionParams& params,
                         int attempt_index = 0) override {
        check_request(messages, params);
        auto response = inner_.complete(messages, params, attempt_index);
        store_.append({transcript_key(messages, params),
                       {messages.begin(), messages.end()},
                       params,
                       response,
                       attempt_index});
        return response;
    }

private:
    ChatProvider& inner_;
    TranscriptStore& store_;
};

/// Collects the exchanges of one run without touching any file.
class TranscriptTap final : public ChatProvider {
public:
    explicit TranscriptTap(ChatProvider& inner) : inner_(inner) {}

    std::string complete(std::span<const ChatMessage> messages, const CompletionParams& params,
                         int attempt_index = 0) override {
        auto response = inner_.complete(messages, params, attempt_index);
        std::lock_guard lock(mutex_);
        records_.push_back({transcript_key(messages, params),
                            {messages.begin(), messages.end()},
                            params,
                            response,
                            attempt_index});
        return response;
    }

    std::vector<TranscriptRecord> records() const {
        std::lock_guard lock(mutex_);
        return records_;
    }

private:
    ChatProvider& inner_;
    mutable std::mutex mutex_;
    std::vector<TranscriptRecord> records_;
};

/// Answers from a callback; used for stubs and scripted fixtures.
class ScriptedProvider final : public ChatProvider {
public:
    using Script = std::function<std::string(std::span<const ChatMessage>,
                                             const CompletionParams&, int)>;

    explicit ScriptedProvider(Script script) : script_(std::move(script)) {}
    ScriptedProvider(ScriptedProvider&& other) noexcept : script_(std::move(other.script_)), calls_(other.calls_) {}

    /// Same text for every request.
    static ScriptedProvider constant(std::string text) {
        return ScriptedProvider([text = std::move(text)](auto, const auto&, int) { return text; });
    }

    /// Per-task responses indexed by attempt; the last one repeats. Requests
    /// without a task label or with an unscripted task get `fallback`.
    static ScriptedProvider by_task(std::map<TaskKind, std::vector<std::string>> responses,
                                    std::string fallback = {}) {
        return ScriptedProvider(
            [responses = std::move(responses), fallback = std::move(fallback)](
                auto, const CompletionParams& p, int attempt) -> std::string {
                if (p.task) {
                    auto it = responses.find(*p.task);
                    if (it != responses.end() && !it->second.empty()) {
                        auto i = std::min<std::size_t>(static_cast<std::size_t>(attempt),
                                                       it->second.size() - 1);
                        return it->second[i];
                    }
                }
                if (fallback.empty()) throw ProviderError("no scripted response for request");
                return fallback;
            });
    }

    std::string complete(std::span<const ChatMessage> messages, const CompletionParams& params,
                         int attempt_index = 0) override {
        check_request(messages, params);
        {
            std::lock_guard lock(mutex_);
            ++calls_;
        }
        return script_(messages, params, attempt_index);
    }

    int calls() const {
        std::lock_guard lock(mutex_);
        return calls_;
    }

private:
    Script script_;
    mutable std::mutex mutex_;
    int calls_ = 0;
};

inline constexpr int kDefaultMaxAttempts = 3;

/// Completes and parses, re-issuing the request (with the next attempt
/// index) whenever `parse` throws ParseFailure. Provider errors propagate.
template <class Parse>
auto complete_with_reparse(ChatProvider& provider, std::span<const ChatMessage> messages,
                           const CompletionParams& params, Parse&& parse,
                           int max_attempts = kDefaultMaxAttempts)
    -> std::invoke_result_t<Parse&, const std::string&> {
    if (max_attempts < 1) throw Error("max_attempts must be at least 1");
    std::vector<std::string> responses;
    std::string last_error;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        responses.push_back(provider.complete(messages, params, attempt));
        try {
            return parse(responses.back());
        } catch (const ParseFailure& e) {
            last_error = e.what();
        }
    }
    throw ExhaustedRetries(last_error, std::move(responses));
}

}  // namespace domodel
