#pragma once

// Uniform client layer for embedding and chat backends: disk-cached, retried,
// with deterministic offline mocks for tests and replayable runs.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "refix/common.hpp"
#include "refix/embedding.hpp"

namespace refix {

// ---------------------------------------------------------------------------
// Backend interfaces. Backends return raw payloads; the gateway owns caching,
// retries, dimension checks and normalization.
// ---------------------------------------------------------------------------

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::string id() const = 0;
    // Expected dimensionality; 0 means "not configured, accept what arrives".
    virtual std::size_t dims() const = 0;
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& batch) = 0;
};

struct ChatRequest {
    std::string system_text;
    std::string user_text;
    double temperature = 0.0;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string id() const = 0;
    virtual std::string complete(const ChatRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Offline mocks.
// ---------------------------------------------------------------------------

class MockEmbeddingBackend : public EmbeddingBackend {
public:
    explicit MockEmbeddingBackend(std::size_t dims = 64) : dims_(dims) {}

    std::string id() const override { return "mock-embed-" + std::to_string(dims_); }
    std::size_t dims() const override { return dims_; }

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& batch) override {
        std::vector<EmbeddingVector> out;
        out.reserve(batch.size());
        for (const auto& text : batch) out.push_back(mock_embed_raw(text, dims_));
        return out;
    }

private:
    std::size_t dims_;
};

// Fixture-driven chat mock. The first rule whose `contains` needle occurs in
// the concatenated system+user text answers; a rule with several responses
// hands them out in order and then repeats the last one.
class ScriptedChatBackend : public ChatBackend {
public:
    struct Rule {
        std::string contains;
        std::vector<std::string> responses;
    };

    ScriptedChatBackend(std::vector<Rule> rules, std::string default_response = "")
        : rules_(std::move(rules)), default_response_(std::move(default_response)) {
        positions_.assign(rules_.size(), 0);
        std::string fingerprint = default_response_;
        for (const auto& r : rules_) {
            fingerprint += '\x1f' + r.contains;
            for (const auto& resp : r.responses) fingerprint += '\x1e' + resp;
        }
        id_ = "scripted-" + content_hash(fingerprint);
    }

    struct Script {
        std::vector<Rule> rules;
        std::string default_response;
    };

    static Script parse_script(const std::filesystem::path& path) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(read_text_file(path));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::config, "bad chat script " + path.string() + ": " + e.what());
        }
        Script script;
        script.default_response = doc.value("default", std::string());
        for (const auto& r : doc.value("rules", nlohmann::json::array())) {
            Rule rule;
            rule.contains = r.at("contains").get<std::string>();
            if (r.contains("responses"))
                rule.responses = r.at("responses").get<std::vector<std::string>>();
            else
                rule.responses.push_back(r.at("response").get<std::string>());
            script.rules.push_back(std::move(rule));
        }
        return script;
    }

    explicit ScriptedChatBackend(Script script)
        : ScriptedChatBackend(std::move(script.rules), std::move(script.default_response)) {}

    std::string id() const override { return id_; }

    std::string complete(const ChatRequest& request) override {
        const std::string haystack = request.system_text + "\n" + request.user_text;
        std::scoped_lock lock(mutex_);
        for (std::size_t i = 0; i < rules_.size(); ++i) {
            if (haystack.find(rules_[i].contains) == std::string::npos) continue;
            const auto& responses = rules_[i].responses;
            std::size_t pos = positions_[i];
            if (pos + 1 < responses.size()) ++positions_[i];
            return responses[pos];
        }
        if (!default_response_.empty()) return default_response_;
        throw Error(ErrorKind::model_output, "no scripted response matches the prompt");
    }

private:
    std::vector<Rule> rules_;
    std::string default_response_;
    std::vector<std::size_t> positions_;
    std::string id_;
    std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// HTTP backends (JSON-over-HTTP, OpenAI-shaped payloads).
// ---------------------------------------------------------------------------

struct HttpBackendConfig {
    std::string base_url;      // e.g. "http://127.0.0.1:8089"
    std::string model;
    std::string api_key_env;   // name of the env var holding the key; "" = none
    std::string embed_path = "/v1/embeddings";
    std::string chat_path = "/v1/chat/completions";
    std::size_t dims = 0;      // expected embedding dims, 0 = accept any
    int timeout_seconds = 60;
};

namespace detail {

inline httplib::Headers auth_headers(const std::string& api_key_env) {
    httplib::Headers headers;
    if (!api_key_env.empty()) {
        const char* key = std::getenv(api_key_env.c_str());
        if (!key || !*key)
            throw Error(ErrorKind::config, "API key env var not set: " + api_key_env);
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    return headers;
}

inline nlohmann::json post_json(const HttpBackendConfig& cfg, const std::string& path,
                                const nlohmann::json& body) {
    httplib::Client client(cfg.base_url);
    client.set_connection_timeout(cfg.timeout_seconds, 0);
    client.set_read_timeout(cfg.timeout_seconds, 0);
    auto res = client.Post(path, auth_headers(cfg.api_key_env), body.dump(), "application/json");
    if (!res)
        throw Error(ErrorKind::transport,
                    "no response from " + cfg.base_url + path + " (" +
                        httplib::to_string(res.error()) + ")");
    if (res->status >= 500)
        throw Error(ErrorKind::transport,
                    "server error " + std::to_string(res->status) + " from " + path);
    if (res->status != 200)
        throw Error(ErrorKind::config, "backend rejected request (" +
                                           std::to_string(res->status) + "): " + res->body);
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::model_output, std::string("unparseable backend JSON: ") + e.what());
    }
}

}  // namespace detail

class HttpEmbeddingBackend : public EmbeddingBackend {
public:
    explicit HttpEmbeddingBackend(HttpBackendConfig config) : config_(std::move(config)) {}

    std::string id() const override { return "http-embed-" + config_.model; }
    std::size_t dims() const override { return config_.dims; }

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& batch) override {
        nlohmann::json body{{"model", config_.model}, {"input", batch}};
        nlohmann::json reply = detail::post_json(config_, config_.embed_path, body);
        if (!reply.contains("data") || !reply["data"].is_array() ||
            reply["data"].size() != batch.size())
            throw Error(ErrorKind::model_output, "embedding response has wrong item count");
        std::vector<EmbeddingVector> out;
        out.reserve(batch.size());
        for (const auto& item : reply["data"]) {
            EmbeddingVector v;
            v.values = item.at("embedding").get<std::vector<double>>();
            out.push_back(std::move(v));
        }
        return out;
    }

private:
    HttpBackendConfig config_;
};

class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {}

    std::string id() const override { return "http-chat-" + config_.model; }

    std::string complete(const ChatRequest& request) override {
        nlohmann::json body{{"model", config_.model},
                            {"temperature", request.temperature},
                            {"messages",
                             {{{"role", "system"}, {"content", request.system_text}},
                              {{"role", "user"}, {"content", request.user_text}}}}};
        nlohmann::json reply = detail::post_json(config_, config_.chat_path, body);
        try {
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorKind::model_output, "chat response has no choices[0].message.content");
        }
    }

private:
    HttpBackendConfig config_;
};

// ---------------------------------------------------------------------------
// Gateway.
// ---------------------------------------------------------------------------

struct GatewayConfig {
    std::filesystem::path cache_dir;  // empty = in-memory only
    int max_attempts = 3;             // network attempts per request
    std::size_t token_budget = 32768; // chat prompt budget, chars/4 estimate
    int max_in_flight = 8;
    bool cache_enabled = true;
};

struct CallRecord {
    enum class Kind { embed_call, embed_cache_hit, chat_call, chat_cache_hit };
    Kind kind;
    std::string cache_key;
    std::string scope;   // caller-provided attribution label
    int attempts = 0;    // network attempts used (calls only)
};

inline std::size_t estimate_tokens(std::string_view text) { return text.size() / 4; }

class ModelGateway {
public:
    ModelGateway(std::unique_ptr<EmbeddingBackend> embedder, std::unique_ptr<ChatBackend> chatter,
                 GatewayConfig config = {})
        : embedder_(std::move(embedder)), chatter_(std::move(chatter)), config_(std::move(config)) {
        if (!config_.cache_dir.empty()) {
            std::filesystem::create_directories(config_.cache_dir / "embed");
            std::filesystem::create_directories(config_.cache_dir / "chat");
        }
    }

    static std::string embed_cache_key(std::string_view backend_id, std::string_view text) {
        return content_hash(backend_id) + "-" + content_hash(text);
    }

    static std::string chat_cache_key(std::string_view backend_id, std::string_view system_text,
                                      std::string_view user_text, double temperature) {
        char temp_buf[32];
        std::snprintf(temp_buf, sizeof temp_buf, "%.6f", temperature);
        std::string meta = std::string(backend_id) + '\x1f' + temp_buf;
        std::string texts = std::string(system_text) + '\x1f' + std::string(user_text);
        return content_hash(meta) + "-" + content_hash(texts);
    }

    // Attribution label attached to every call record made from this thread.
    void set_scope(std::string scope) { thread_scope() = std::move(scope); }

    const EmbeddingBackend& embedder() const { return *embedder_; }
    const ChatBackend& chatter() const { return *chatter_; }

    // One normalized vector per input, order preserved. Raw vectors are cached
    // by content hash; normalization happens on the way out so cached and
    // fresh results are bit-identical.
    std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& batch) {
        if (batch.empty()) throw Error(ErrorKind::data, "embed_texts: empty batch");
        for (const auto& t : batch)
            if (t.empty()) throw Error(ErrorKind::data, "embed_texts: empty text in batch");

        std::vector<EmbeddingVector> raw(batch.size());
        std::vector<std::size_t> misses;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const std::string key = embed_cache_key(embedder_->id(), batch[i]);
            if (auto cached = load_cached_embedding(key)) {
                raw[i] = std::move(*cached);
                record({CallRecord::Kind::embed_cache_hit, key, thread_scope(), 0});
            } else {
                misses.push_back(i);
            }
        }

        if (!misses.empty()) {
            std::vector<std::string> texts;
            texts.reserve(misses.size());
            for (std::size_t i : misses) texts.push_back(batch[i]);
            int attempts = 0;
            std::vector<EmbeddingVector> fetched = with_retries(attempts, [&] {
                InFlightGuard guard(*this);
                return embedder_->embed(texts);
            });
            if (fetched.size() != texts.size())
                throw Error(ErrorKind::model_output, "embedding backend returned wrong count");
            for (std::size_t k = 0; k < misses.size(); ++k) {
                const std::size_t i = misses[k];
                if (embedder_->dims() != 0 && fetched[k].dims() != embedder_->dims())
                    throw Error(ErrorKind::config,
                                "embedding dims " + std::to_string(fetched[k].dims()) +
                                    " != configured " + std::to_string(embedder_->dims()));
                for (double x : fetched[k].values)
                    if (!std::isfinite(x))
                        throw Error(ErrorKind::model_output, "non-finite embedding value");
                const std::string key = embed_cache_key(embedder_->id(), batch[i]);
                store_cached_embedding(key, batch[i], fetched[k]);
                record({CallRecord::Kind::embed_call, key, thread_scope(), attempts});
                raw[i] = std::move(fetched[k]);
            }
        }

        std::vector<EmbeddingVector> out;
        out.reserve(raw.size());
        for (auto& v : raw) {
            if (v.is_zero()) bump_degenerate();
            out.push_back(l2_normalized(v));
        }
        return out;
    }

    EmbeddingVector embed_text(const std::string& text) { return embed_texts({text})[0]; }

    // Cached chat completion; replays are byte-identical.
    std::string chat(const ChatRequest& request) {
        const std::size_t est = estimate_tokens(request.system_text) +
                                estimate_tokens(request.user_text);
        if (est > config_.token_budget)
            throw Error(ErrorKind::budget, "prompt estimate " + std::to_string(est) +
                                               " tokens exceeds budget " +
                                               std::to_string(config_.token_budget));
        const std::string key = chat_cache_key(chatter_->id(), request.system_text,
                                               request.user_text, request.temperature);
        if (auto cached = load_cached_chat(key)) {
            record({CallRecord::Kind::chat_cache_hit, key, thread_scope(), 0});
            return *cached;
        }
        int attempts = 0;
        std::string response = with_retries(attempts, [&] {
            InFlightGuard guard(*this);
            return chatter_->complete(request);
        });
        if (response.empty()) throw Error(ErrorKind::model_output, "empty chat response");
        store_cached_chat(key, request, response);
        record({CallRecord::Kind::chat_call, key, thread_scope(), attempts});
        return response;
    }

    std::vector<CallRecord> call_log() const {
        std::scoped_lock lock(log_mutex_);
        return call_log_;
    }

    std::size_t degenerate_embedding_count() const {
        std::scoped_lock lock(log_mutex_);
        return degenerate_embeddings_;
    }

private:
    struct InFlightGuard {
        explicit InFlightGuard(ModelGateway& g) : gateway(g) { gateway.in_flight_.acquire(); }
        ~InFlightGuard() { gateway.in_flight_.release(); }
        ModelGateway& gateway;
    };

    static std::string& thread_scope() {
        static thread_local std::string scope;
        return scope;
    }

    template <typename Fn>
    auto with_retries(int& attempts, Fn&& fn) -> decltype(fn()) {
        const int max_attempts = config_.max_attempts < 1 ? 1 : config_.max_attempts;
        for (;;) {
            ++attempts;
            try {
                return fn();
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::transport || attempts >= max_attempts)
                    throw Error(e.kind(), std::string(e.what()) + " (after " +
                                              std::to_string(attempts) + " attempts)");
            }
        }
    }

    std::filesystem::path embed_cache_path(const std::string& key) const {
        return config_.cache_dir / "embed" / (key + ".json");
    }
    std::filesystem::path chat_cache_path(const std::string& key) const {
        return config_.cache_dir / "chat" / (key + ".json");
    }

    std::optional<EmbeddingVector> load_cached_embedding(const std::string& key) {
        if (!config_.cache_enabled) return std::nullopt;
        {
            std::scoped_lock lock(mem_mutex_);
            auto it = mem_embed_.find(key);
            if (it != mem_embed_.end()) return it->second;
        }
        if (config_.cache_dir.empty()) return std::nullopt;
        const auto path = embed_cache_path(key);
        if (!std::filesystem::exists(path)) return std::nullopt;
        try {
            nlohmann::json doc = nlohmann::json::parse(read_text_file(path));
            EmbeddingVector v;
            v.values = doc.at("vector").get<std::vector<double>>();
            std::scoped_lock lock(mem_mutex_);
            mem_embed_[key] = v;
            return v;
        } catch (const std::exception&) {
            return std::nullopt;  // corrupt cache entry: treat as a miss
        }
    }

    void store_cached_embedding(const std::string& key, const std::string& text,
                                const EmbeddingVector& raw) {
        if (!config_.cache_enabled) return;
        {
            std::scoped_lock lock(mem_mutex_);
            mem_embed_[key] = raw;
        }
        if (config_.cache_dir.empty()) return;
        nlohmann::json doc{{"backend_id", embedder_->id()},
                           {"text_hash", content_hash(text)},
                           {"vector", raw.values}};
        atomic_write_file(embed_cache_path(key), doc.dump());
    }

    std::optional<std::string> load_cached_chat(const std::string& key) {
        if (!config_.cache_enabled) return std::nullopt;
        {
            std::scoped_lock lock(mem_mutex_);
            auto it = mem_chat_.find(key);
            if (it != mem_chat_.end()) return it->second;
        }
        if (config_.cache_dir.empty()) return std::nullopt;
        const auto path = chat_cache_path(key);
        if (!std::filesystem::exists(path)) return std::nullopt;
        try {
            nlohmann::json doc = nlohmann::json::parse(read_text_file(path));
            auto response = doc.at("response").get<std::string>();
            std::scoped_lock lock(mem_mutex_);
            mem_chat_[key] = response;
            return response;
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }

    void store_cached_chat(const std::string& key, const ChatRequest& request,
                           const std::string& response) {
        if (!config_.cache_enabled) return;
        {
            std::scoped_lock lock(mem_mutex_);
            mem_chat_[key] = response;
        }
        if (config_.cache_dir.empty()) return;
        nlohmann::json doc{{"backend_id", chatter_->id()},
                           {"system", request.system_text},
                           {"user", request.user_text},
                           {"temperature", request.temperature},
                           {"response", response}};
        atomic_write_file(chat_cache_path(key), doc.dump());
    }

    void record(CallRecord rec) {
        std::scoped_lock lock(log_mutex_);
        call_log_.push_back(std::move(rec));
    }

    void bump_degenerate() {
        std::scoped_lock lock(log_mutex_);
        ++degenerate_embeddings_;
    }

    std::unique_ptr<EmbeddingBackend> embedder_;
    std::unique_ptr<ChatBackend> chatter_;
    GatewayConfig config_;
    std::counting_semaphore<256> in_flight_{
        config_.max_in_flight > 0 && config_.max_in_flight <= 256 ? config_.max_in_flight : 8};

    mutable std::mutex mem_mutex_;
    std::unordered_map<std::string, EmbeddingVector> mem_embed_;
    std::unordered_map<std::string, std::string> mem_chat_;

    mutable std::mutex log_mutex_;
    std::vector<CallRecord> call_log_;
    std::size_t degenerate_embeddings_ = 0;
};

}  // namespace refix
