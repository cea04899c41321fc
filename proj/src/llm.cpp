#include "untangle/llm.hpp"

#include "untangle/hashing.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iostream>
#include <thread>

namespace untangle {

std::string_view to_string(Provider provider) noexcept {
    switch (provider) {
        case Provider::OpenAICompatible: return "openai_compatible";
        case Provider::GeminiCompatible: return "gemini_compatible";
        case Provider::Mock: return "mock";
    }
    return "mock";
}

std::optional<Provider> parse_provider(std::string_view name) noexcept {
    const std::string n = to_lower(name);
    if (n == "openai_compatible" || n == "openai") return Provider::OpenAICompatible;
    if (n == "gemini_compatible" || n == "gemini") return Provider::GeminiCompatible;
    if (n == "mock") return Provider::Mock;
    return std::nullopt;
}

void ModelConfig::validate() const {
    if (model_id.empty()) throw Error(ErrorCode::InvalidArgument, "model_id is empty");
    if (!(temperature >= 0.0)) throw Error(ErrorCode::InvalidArgument, "temperature must be >= 0");
    if (max_output_tokens <= 0) throw Error(ErrorCode::InvalidArgument, "max_output_tokens must be positive");
    if (!(timeout_seconds > 0.0)) throw Error(ErrorCode::InvalidArgument, "timeout must be positive");
    if (max_retries < 0 || max_retries > 10) throw Error(ErrorCode::InvalidArgument, "max_retries must be in [0, 10]");
    if (concurrency < 1) throw Error(ErrorCode::InvalidArgument, "concurrency must be >= 1");
    if (provider == Provider::Mock && responder.empty())
        throw Error(ErrorCode::InvalidArgument, "the mock provider needs a responder file");
}

// --- verdict parsing ---------------------------------------------------------

namespace {

std::vector<std::string> words(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

struct Mentions {
    bool buggy = false;
    bool notbuggy = false;
};

Mentions mentions(std::string_view line) {
    Mentions m;
    const auto w = words(line);
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] == "notbuggy") {
            m.notbuggy = true;
        } else if (w[i] == "buggy") {
            if (i > 0 && w[i - 1] == "not")
                m.notbuggy = true;
            else
                m.buggy = true;
        }
    }
    return m;
}

}  // namespace

ParsedVerdict parse_verdict(std::string_view raw, bool expects_reasoning) {
    ParsedVerdict out;
    if (!expects_reasoning) {
        const auto w = words(raw);
        std::string joined;
        for (const auto& x : w) joined += (joined.empty() ? "" : " ") + x;
        if (joined == "buggy")
            out.label = Label::Buggy;
        else if (joined == "notbuggy" || joined == "not buggy")
            out.label = Label::NotBuggy;
        return out;
    }

    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= raw.size()) {
        std::size_t end = raw.find('\n', pos);
        if (end == std::string_view::npos) end = raw.size();
        lines.push_back(raw.substr(pos, end - pos));
        pos = end + 1;
    }
    for (std::size_t i = lines.size(); i-- > 0;) {
        const Mentions m = mentions(lines[i]);
        if (!m.buggy && !m.notbuggy) continue;
        if (m.buggy && m.notbuggy) return out;  // ambiguous deciding line
        out.label = m.buggy ? Label::Buggy : Label::NotBuggy;
        std::string reasoning;
        for (std::size_t k = 0; k < i; ++k) {
            reasoning.append(lines[k]);
            reasoning += '\n';
        }
        reasoning = trim(reasoning);
        if (!reasoning.empty()) out.reasoning = std::move(reasoning);
        return out;
    }
    return out;
}

json to_json(const Verdict& v) {
    return json{{"label", std::string(to_string(v.label))},
                {"reasoning", v.reasoning ? json(*v.reasoning) : json(nullptr)},
                {"raw", v.raw},
                {"provider", std::string(to_string(v.provider))},
                {"model_id", v.model_id},
                {"variant", std::string(to_string(v.variant))}};
}

// --- rate limiting -------------------------------------------------------------

TokenBucket::TokenBucket(double rate_per_second, double burst)
    : rate_(rate_per_second), burst_(std::max(1.0, burst)), tokens_(std::max(1.0, burst)),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
    if (rate_ <= 0.0) return;
    std::unique_lock lock(mutex_);
    for (;;) {
        const auto now = std::chrono::steady_clock::now();
        tokens_ = std::min(burst_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
        last_ = now;
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        const double wait = (1.0 - tokens_) / rate_;
        // Sleeping with the lock held keeps waiters in FIFO-ish order.
        std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    }
}

// --- cache -------------------------------------------------------------------

std::string cache_key(const ModelConfig& cfg, std::string_view prompt) {
    std::string material;
    material.append(to_string(cfg.provider)).push_back('\n');
    material.append(cfg.model_id).push_back('\n');
    material.append(format_double(cfg.temperature)).push_back('\n');
    material.append(prompt);
    return sha256_hex(material);
}

ResponseCache::ResponseCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
    if (dir_) {
        std::error_code ec;
        std::filesystem::create_directories(*dir_, ec);
        if (ec) throw Error(ErrorCode::IoFailure, "cannot create cache directory " + dir_->string());
    }
}

void ResponseCache::load(Provider provider) {
    // Caller holds the unique lock.
    loaded_[provider] = true;
    if (!dir_) return;
    const auto path = *dir_ / (std::string(to_string(provider)) + ".jsonl");
    if (!std::filesystem::exists(path)) return;
    auto& bucket = entries_[provider];
    for (const auto& row : read_jsonl(path)) {
        CacheEntry e;
        e.key = row.at("key").get<std::string>();
        e.model_id = row.value("model_id", "");
        e.prompt_sha256 = row.value("prompt_sha256", "");
        e.raw = row.at("raw").get<std::string>();
        e.timestamp = row.value("timestamp", std::int64_t{0});
        bucket.insert_or_assign(e.key, std::move(e));
    }
}

std::optional<CacheEntry> ResponseCache::lookup(Provider provider, const std::string& key) {
    {
        std::shared_lock lock(mutex_);
        if (loaded_.contains(provider)) {
            auto& bucket = entries_[provider];
            auto it = bucket.find(key);
            if (it == bucket.end()) return std::nullopt;
            return it->second;
        }
    }
    std::unique_lock lock(mutex_);
    if (!loaded_.contains(provider)) load(provider);
    auto& bucket = entries_[provider];
    auto it = bucket.find(key);
    if (it == bucket.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::store(Provider provider, const CacheEntry& entry) {
    std::unique_lock lock(mutex_);
    if (!loaded_.contains(provider)) load(provider);
    entries_[provider].insert_or_assign(entry.key, entry);
    if (!dir_) return;
    const auto path = *dir_ / (std::string(to_string(provider)) + ".jsonl");
    json row{{"key", entry.key},
             {"model_id", entry.model_id},
             {"prompt_sha256", entry.prompt_sha256},
             {"raw", entry.raw},
             {"timestamp", entry.timestamp}};
    const std::string line = row.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    const ssize_t n = ::write(fd, line.data(), line.size());
    ::close(fd);
    if (n != static_cast<ssize_t>(line.size())) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

std::size_t ResponseCache::size() const {
    std::shared_lock lock(mutex_);
    std::size_t n = 0;
    for (const auto& [_, bucket] : entries_) n += bucket.size();
    return n;
}

// --- mock provider -------------------------------------------------------------

MockChatProvider::MockChatProvider(const std::filesystem::path& responder) {
    if (!std::filesystem::exists(responder))
        throw Error(ErrorCode::IoFailure, "responder file " + responder.string() + " not found");
    for (const auto& row : read_jsonl(responder)) {
        if (!row.contains("prompt_sha256") || !row.contains("response"))
            throw Error(ErrorCode::ParseFailure, "responder rows need prompt_sha256 and response");
        responses_.insert_or_assign(row["prompt_sha256"].get<std::string>(), row["response"].get<std::string>());
    }
}

MockChatProvider::MockChatProvider(std::map<std::string, std::string> responses) : responses_(std::move(responses)) {}

std::string MockChatProvider::complete(const std::string& prompt) {
    auto it = responses_.find(sha256_hex(prompt));
    if (it == responses_.end()) it = responses_.find("*");
    if (it == responses_.end()) throw Error(ErrorCode::ProviderUnavailable, "mock responder has no answer for prompt");
    return it->second;
}

// --- gateway -------------------------------------------------------------------

Gateway::Gateway(ModelConfig cfg, ResponseCache& cache, std::unique_ptr<ChatProvider> provider)
    : cfg_(std::move(cfg)), cache_(cache), provider_(std::move(provider)) {
    if (!provider_) {
        cfg_.validate();
        provider_ = make_chat_provider(cfg_);
    }
    // The local mock is not rate limited.
    if (cfg_.provider != Provider::Mock && cfg_.requests_per_second > 0.0)
        bucket_ = std::make_unique<TokenBucket>(cfg_.requests_per_second);
}

Verdict Gateway::classify(const PromptText& prompt) {
    if (prompt.text.empty()) throw Error(ErrorCode::InvalidArgument, "empty prompt");
    Verdict v;
    v.provider = cfg_.provider;
    v.model_id = cfg_.model_id;
    v.variant = prompt.variant;

    const std::string key = cache_key(cfg_, prompt.text);
    const auto start = std::chrono::steady_clock::now();
    if (auto hit = cache_.lookup(cfg_.provider, key)) {
        v.raw = std::move(hit->raw);
        v.cached = true;
    } else {
        if (bucket_) bucket_->acquire();
        ++requests_;
        v.raw = provider_->complete(prompt.text);
        const auto now = std::chrono::system_clock::now().time_since_epoch();
        cache_.store(cfg_.provider, CacheEntry{key, cfg_.model_id, sha256_hex(prompt.text), v.raw,
                                               std::chrono::duration_cast<std::chrono::seconds>(now).count()});
    }
    v.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    auto parsed = parse_verdict(v.raw, expects_reasoning(prompt.variant));
    v.label = parsed.label;
    v.reasoning = std::move(parsed.reasoning);
    return v;
}

std::vector<Verdict> Gateway::classify_batch(std::span<const PromptText> prompts) {
    std::vector<Verdict> out(prompts.size());
    // Identical prompts are requested once; duplicates read the cache after.
    std::map<std::string, std::size_t> first;
    std::vector<std::size_t> unique;
    std::vector<std::size_t> repeats;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        if (first.emplace(cache_key(cfg_, prompts[i].text), i).second)
            unique.push_back(i);
        else
            repeats.push_back(i);
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= unique.size()) return;
            try {
                out[unique[k]] = classify(prompts[unique[k]]);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = unique.size();
                return;
            }
        }
    };
    const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(cfg_.concurrency), unique.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    if (threads > 0) worker();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    for (std::size_t i : repeats) out[i] = classify(prompts[i]);

    const auto unparseable =
        std::count_if(out.begin(), out.end(), [](const Verdict& v) { return v.label == Label::Unparseable; });
    if (unparseable > 0)
        std::cerr << "untangle: " << unparseable << " of " << out.size() << " responses were unparseable\n";
    return out;
}

Verdict classify_change(const PromptText& prompt, Gateway& gateway) { return gateway.classify(prompt); }

}  // namespace untangle
