#pragma once

#include "untangle/error.hpp"
#include "untangle/io.hpp"
#include "untangle/label.hpp"
#include "untangle/prompt.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

namespace untangle {

enum class Provider { OpenAICompatible, GeminiCompatible, Mock };

std::string_view to_string(Provider provider) noexcept;
std::optional<Provider> parse_provider(std::string_view name) noexcept;

struct ModelConfig {
    Provider provider = Provider::Mock;
    std::string model_id = "mock";
    double temperature = 0.0;
    int max_output_tokens = 1024;
    double timeout_seconds = 60.0;
    int max_retries = 3;
    std::string base_url;                 // empty: the provider's public endpoint
    std::filesystem::path responder;      // mock only: JSONL {prompt_sha256, response}
    double requests_per_second = 2.0;     // token bucket; <= 0 disables
    std::chrono::milliseconds backoff_base{500};
    int concurrency = 4;

    void validate() const;  // throws InvalidArgument
};

struct ParsedVerdict {
    Label label = Label::Unparseable;
    std::optional<std::string> reasoning;
};

// Never throws. Single-word mode: punctuation dropped, case folded, then
// exactly "buggy", "notbuggy" or "not buggy". Reasoning mode: the last line
// that mentions a label decides; mentioning both there is Unparseable.
ParsedVerdict parse_verdict(std::string_view raw, bool expects_reasoning);

struct Verdict {
    Label label = Label::Unparseable;
    std::optional<std::string> reasoning;
    std::string raw;
    Provider provider = Provider::Mock;
    std::string model_id;
    PromptVariant variant = PromptVariant::DiffMessage;
    double latency_ms = 0.0;
    bool cached = false;
};

json to_json(const Verdict& verdict);

// --- HTTP plumbing shared by chat and embedding providers ------------------

struct HttpRequest {
    std::string url;  // scheme://host[:port]/path
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
    double timeout_seconds = 60.0;
};

struct HttpResponse {
    int status = 0;  // 0: transport failure
    std::string body;
    std::string error;
};

using HttpTransport = std::function<HttpResponse(const HttpRequest&)>;

// httplib-backed POST with TLS support.
HttpResponse default_http_post(const HttpRequest& request);

// Maps an HTTP outcome to the error taxonomy. Returns nothing on 2xx.
// `retryable` is set for transport failures, 429 and 5xx.
std::optional<Error> classify_http_failure(const HttpResponse& response, bool& retryable);

// Retries retryable failures with exponential backoff (base * 2^attempt).
HttpResponse post_with_retries(const HttpTransport& transport, const HttpRequest& request, int max_retries,
                               std::chrono::milliseconds backoff_base);

// Reads an API key from the environment; throws AuthFailure when unset.
std::string api_key_for(Provider provider);

class TokenBucket {
public:
    explicit TokenBucket(double rate_per_second, double burst = 1.0);
    void acquire();

private:
    double rate_;
    double burst_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mutex_;
};

// --- Response cache -------------------------------------------------------

struct CacheEntry {
    std::string key;
    std::string model_id;
    std::string prompt_sha256;
    std::string raw;
    std::int64_t timestamp = 0;
};

// hash(provider, model_id, temperature, prompt)
std::string cache_key(const ModelConfig& cfg, std::string_view prompt);

// One JSONL file per provider under `dir`. Concurrent readers, serialized
// appends. A null directory keeps the cache in memory only.
class ResponseCache {
public:
    explicit ResponseCache(std::optional<std::filesystem::path> dir = std::nullopt);

    std::optional<CacheEntry> lookup(Provider provider, const std::string& key);
    void store(Provider provider, const CacheEntry& entry);
    std::size_t size() const;

private:
    void load(Provider provider);

    std::optional<std::filesystem::path> dir_;
    std::map<Provider, std::map<std::string, CacheEntry>> entries_;
    std::map<Provider, bool> loaded_;
    mutable std::shared_mutex mutex_;
};

// --- Providers --------------------------------------------------------------

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    // Returns the raw completion text; throws ProviderUnavailable,
    // AuthFailure or PromptTooLarge.
    virtual std::string complete(const std::string& prompt) = 0;
};

// Answers from a JSONL responder file keyed by prompt SHA-256. An entry with
// prompt_sha256 "*" is the fallback answer.
class MockChatProvider : public ChatProvider {
public:
    explicit MockChatProvider(const std::filesystem::path& responder);
    explicit MockChatProvider(std::map<std::string, std::string> responses);
    std::string complete(const std::string& prompt) override;

private:
    std::map<std::string, std::string> responses_;
};

class HttpChatProvider : public ChatProvider {
public:
    HttpChatProvider(ModelConfig cfg, HttpTransport transport = default_http_post, std::string api_key = {});
    std::string complete(const std::string& prompt) override;

private:
    ModelConfig cfg_;
    HttpTransport transport_;
    std::string api_key_;
};

std::unique_ptr<ChatProvider> make_chat_provider(const ModelConfig& cfg);

// --- Gateway ----------------------------------------------------------------

class Gateway {
public:
    Gateway(ModelConfig cfg, ResponseCache& cache, std::unique_ptr<ChatProvider> provider = nullptr);

    Verdict classify(const PromptText& prompt);

    // Bounded pool (cfg.concurrency in flight); results in input order.
    std::vector<Verdict> classify_batch(std::span<const PromptText> prompts);

    // Requests that reached the provider (cache misses).
    std::size_t request_count() const { return requests_.load(); }
    const ModelConfig& config() const { return cfg_; }

private:
    ModelConfig cfg_;
    ResponseCache& cache_;
    std::unique_ptr<ChatProvider> provider_;
    std::unique_ptr<TokenBucket> bucket_;
    std::atomic<std::size_t> requests_{0};
};

// Cache hit: stored raw, cached=true. Miss: provider request, stored.
Verdict classify_change(const PromptText& prompt, Gateway& gateway);

}  // namespace untangle
