#include "untangle/llm.hpp"

#include <httplib.h>

#include <cstdlib>
#include <thread>

namespace untangle {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme = url.find("://");
    const auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

bool mentions_context_limit(const std::string& body) {
    const std::string b = to_lower(body);
    for (const char* needle : {"context_length", "context length", "maximum context", "too long", "too many tokens",
                               "exceeds the maximum"})
        if (b.find(needle) != std::string::npos) return true;
    return false;
}

std::string trim_body(const std::string& body) { return body.size() > 300 ? body.substr(0, 300) + "..." : body; }

}  // namespace

HttpResponse default_http_post(const HttpRequest& request) {
    const auto [origin, path] = split_url(request.url);
    httplib::Client client(origin);
    const auto secs = static_cast<time_t>(request.timeout_seconds);
    const auto usecs = static_cast<time_t>((request.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);
    auto res = client.Post(path, headers, request.body, "application/json");
    HttpResponse out;
    if (!res) {
        out.error = httplib::to_string(res.error());
        return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
}

std::optional<Error> classify_http_failure(const HttpResponse& r, bool& retryable) {
    retryable = false;
    if (r.status >= 200 && r.status < 300) return std::nullopt;
    if (r.status == 0) {
        retryable = true;
        return Error(ErrorCode::ProviderUnavailable, "transport failure: " + r.error);
    }
    if (r.status == 401 || r.status == 403)
        return Error(ErrorCode::AuthFailure, "HTTP " + std::to_string(r.status) + ": " + trim_body(r.body));
    if (r.status == 413 || (r.status == 400 && mentions_context_limit(r.body)))
        return Error(ErrorCode::PromptTooLarge, "provider rejected the prompt: " + trim_body(r.body));
    retryable = r.status == 408 || r.status == 429 || r.status >= 500;
    return Error(ErrorCode::ProviderUnavailable, "HTTP " + std::to_string(r.status) + ": " + trim_body(r.body));
}

HttpResponse post_with_retries(const HttpTransport& transport, const HttpRequest& request, int max_retries,
                               std::chrono::milliseconds backoff_base) {
    for (int attempt = 0;; ++attempt) {
        HttpResponse r = transport(request);
        bool retryable = false;
        auto failure = classify_http_failure(r, retryable);
        if (!failure) return r;
        if (!retryable || attempt >= max_retries) {
            if (failure->code() == ErrorCode::ProviderUnavailable && attempt > 0)
                throw Error(ErrorCode::ProviderUnavailable,
                            "gave up after " + std::to_string(attempt + 1) + " attempts; last: " + failure->what());
            throw *failure;
        }
        std::this_thread::sleep_for(backoff_base * (1LL << attempt));
    }
}

std::string api_key_for(Provider provider) {
    const char* var = provider == Provider::GeminiCompatible ? "UNTANGLE_GEMINI_KEY" : "UNTANGLE_OPENAI_KEY";
    const char* value = std::getenv(var);
    if (!value || !*value) throw Error(ErrorCode::AuthFailure, std::string(var) + " is not set");
    return value;
}

HttpChatProvider::HttpChatProvider(ModelConfig cfg, HttpTransport transport, std::string api_key)
    : cfg_(std::move(cfg)), transport_(std::move(transport)), api_key_(std::move(api_key)) {
    if (api_key_.empty()) api_key_ = api_key_for(cfg_.provider);
}

std::string HttpChatProvider::complete(const std::string& prompt) {
    HttpRequest req;
    req.timeout_seconds = cfg_.timeout_seconds;
    req.headers.emplace_back("Content-Type", "application/json");
    json body;
    if (cfg_.provider == Provider::GeminiCompatible) {
        const std::string base = cfg_.base_url.empty() ? "https://generativelanguage.googleapis.com" : cfg_.base_url;
        req.url = base + "/v1beta/models/" + cfg_.model_id + ":generateContent";
        req.headers.emplace_back("x-goog-api-key", api_key_);
        body = {{"contents", json::array({{{"role", "user"}, {"parts", json::array({{{"text", prompt}}})}}})},
                {"generationConfig", {{"temperature", cfg_.temperature}, {"maxOutputTokens", cfg_.max_output_tokens}}}};
    } else {
        const std::string base = cfg_.base_url.empty() ? "https://api.openai.com" : cfg_.base_url;
        req.url = base + "/v1/chat/completions";
        req.headers.emplace_back("Authorization", "Bearer " + api_key_);
        body = {{"model", cfg_.model_id},
                {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                {"temperature", cfg_.temperature},
                {"max_tokens", cfg_.max_output_tokens}};
    }
    req.body = body.dump();
    const HttpResponse r = post_with_retries(transport_, req, cfg_.max_retries, cfg_.backoff_base);

    try {
        const json doc = json::parse(r.body);
        if (cfg_.provider == Provider::GeminiCompatible) {
            std::string text;
            for (const auto& part : doc.at("candidates").at(0).at("content").at("parts"))
                text += part.value("text", "");
            return text;
        }
        const auto& content = doc.at("choices").at(0).at("message").at("content");
        return content.is_string() ? content.get<std::string>() : std::string();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ProviderUnavailable, std::string("unexpected response shape: ") + e.what());
    }
}

std::unique_ptr<ChatProvider> make_chat_provider(const ModelConfig& cfg) {
    if (cfg.provider == Provider::Mock) return std::make_unique<MockChatProvider>(cfg.responder);
    return std::make_unique<HttpChatProvider>(cfg);
}

}  // namespace untangle
