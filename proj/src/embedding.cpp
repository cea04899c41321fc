#include "untangle/embedding.hpp"

#include "untangle/error.hpp"
#include "untangle/hashing.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cctype>
#include <cmath>

namespace untangle {

void EmbedConfig::validate() const {
    if (token_limit < 16) throw Error(ErrorCode::InvalidArgument, "token_limit must be >= 16");
    if (pooling != "mean") throw Error(ErrorCode::InvalidArgument, "only mean pooling is supported");
    if (model_id.empty()) throw Error(ErrorCode::InvalidArgument, "model_id is empty");
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (std::isalnum(c) || c == '_' || c >= 0x80) {
            std::size_t j = i;
            while (j < text.size()) {
                const auto d = static_cast<unsigned char>(text[j]);
                if (!(std::isalnum(d) || d == '_' || d >= 0x80)) break;
                ++j;
            }
            tokens.emplace_back(text.substr(i, j - i));
            i = j;
        } else {
            tokens.emplace_back(1, text[i]);
            ++i;
        }
    }
    return tokens;
}

std::vector<double> window_mean_pool(std::span<const std::string> tokens, std::size_t window,
                                     const std::function<std::vector<double>(std::span<const std::string>)>& encode) {
    if (tokens.empty()) throw Error(ErrorCode::EmptyInput, "no tokens to pool");
    if (window == 0) throw Error(ErrorCode::InvalidArgument, "window must be >= 1");
    std::vector<double> sum;
    std::size_t count = 0;
    for (std::size_t start = 0; start < tokens.size(); start += window) {
        const auto v = encode(tokens.subspan(start, std::min(window, tokens.size() - start)));
        if (sum.empty()) {
            sum.assign(v.size(), 0.0);
        } else if (v.size() != sum.size()) {
            throw Error(ErrorCode::DimensionMismatch, "window vectors differ in length");
        }
        for (std::size_t k = 0; k < v.size(); ++k) sum[k] += v[k];
        ++count;
    }
    for (auto& x : sum) x /= static_cast<double>(count);
    return sum;
}

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void check_dimension(const std::vector<double>& v) {
    if (v.size() != kEmbeddingDim)
        throw Error(ErrorCode::DimensionMismatch,
                    "encoder returned " + std::to_string(v.size()) + " values, expected " + std::to_string(kEmbeddingDim));
    for (double x : v)
        if (!std::isfinite(x)) throw Error(ErrorCode::DimensionMismatch, "encoder returned a non-finite value");
}

}  // namespace

std::vector<double> hashing_encode(std::string_view text) {
    std::vector<double> v(kEmbeddingDim, 0.0);
    const auto tokens = tokenize(text);
    const auto add = [&](std::uint64_t h) {
        h ^= h >> 33;
        h *= 0xff51afd7ed558ccdULL;
        h ^= h >> 33;
        v[h % kEmbeddingDim] += (h >> 63) ? -1.0 : 1.0;
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        add(fnv1a(tokens[i]));
        if (i + 1 < tokens.size()) add(fnv1a(tokens[i + 1], fnv1a(tokens[i]) ^ 0x9e3779b97f4a7c15ULL));
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (auto& x : v) x /= norm;
    }
    return v;
}

TextEncoder make_remote_encoder(const EmbedConfig& cfg, HttpTransport transport, std::string api_key) {
    if (api_key.empty()) api_key = api_key_for(cfg.backend);
    return [cfg, transport = std::move(transport), api_key = std::move(api_key)](std::string_view text) {
        HttpRequest req;
        req.timeout_seconds = cfg.timeout_seconds;
        req.headers.emplace_back("Content-Type", "application/json");
        json body;
        if (cfg.backend == Provider::GeminiCompatible) {
            const std::string base = cfg.base_url.empty() ? "https://generativelanguage.googleapis.com" : cfg.base_url;
            req.url = base + "/v1beta/models/" + cfg.model_id + ":embedContent";
            req.headers.emplace_back("x-goog-api-key", api_key);
            body = {{"content", {{"parts", json::array({{{"text", std::string(text)}}})}}},
                    {"taskType", "CLASSIFICATION"},
                    {"outputDimensionality", kEmbeddingDim}};
        } else {
            const std::string base = cfg.base_url.empty() ? "https://api.openai.com" : cfg.base_url;
            req.url = base + "/v1/embeddings";
            req.headers.emplace_back("Authorization", "Bearer " + api_key);
            body = {{"model", cfg.model_id}, {"input", std::string(text)}, {"dimensions", kEmbeddingDim}};
        }
        req.body = body.dump();
        const auto r = post_with_retries(transport, req, cfg.max_retries, cfg.backoff_base);
        try {
            const json doc = json::parse(r.body);
            if (cfg.backend == Provider::GeminiCompatible)
                return doc.at("embedding").at("values").get<std::vector<double>>();
            return doc.at("data").at(0).at("embedding").get<std::vector<double>>();
        } catch (const json::exception& e) {
            throw Error(ErrorCode::ProviderUnavailable, std::string("unexpected embedding response: ") + e.what());
        }
    };
}

std::string embedding_input(std::string_view message, std::string_view diff) {
    std::string input(diff);
    input += '\n';
    input.append(message);
    return input;
}

EmbeddingCache::EmbeddingCache(std::optional<std::filesystem::path> file) : file_(std::move(file)) {
    if (!file_ || !std::filesystem::exists(*file_)) return;
    for (const auto& row : read_jsonl(*file_)) {
        auto v = embedding_from_json(row);
        entries_.insert_or_assign({v.source_model, v.input_sha256}, std::move(v.values));
    }
}

std::optional<std::vector<double>> EmbeddingCache::lookup(const std::string& model_id, const std::string& sha) {
    std::lock_guard lock(mutex_);
    auto it = entries_.find({model_id, sha});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void EmbeddingCache::store(const EmbeddingVector& vector) {
    std::lock_guard lock(mutex_);
    entries_.insert_or_assign({vector.source_model, vector.input_sha256}, vector.values);
    if (!file_) return;
    if (file_->has_parent_path()) std::filesystem::create_directories(file_->parent_path());
    const std::string line = to_json(vector).dump() + "\n";
    const int fd = ::open(file_->c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(ErrorCode::IoFailure, "cannot open " + file_->string());
    const ssize_t n = ::write(fd, line.data(), line.size());
    ::close(fd);
    if (n != static_cast<ssize_t>(line.size())) throw Error(ErrorCode::IoFailure, "short write to " + file_->string());
}

EmbeddingVector embed_change(std::string_view message, std::string_view diff, const EmbedConfig& cfg,
                             const TextEncoder& encoder, EmbeddingCache* cache) {
    cfg.validate();
    if (diff.empty()) throw Error(ErrorCode::InvalidArgument, "diff is empty");
    const std::string input = embedding_input(message, diff);

    EmbeddingVector out;
    out.source_model = cfg.model_id;
    out.input_sha256 = sha256_hex(input);
    if (cache) {
        if (auto hit = cache->lookup(out.source_model, out.input_sha256)) {
            out.values = std::move(*hit);
            return out;
        }
    }

    TextEncoder encode = encoder;
    if (!encode) encode = cfg.provider == EmbedProvider::LocalMock ? TextEncoder(hashing_encode) : make_remote_encoder(cfg);
    const auto checked = [&](std::string_view text) {
        auto v = encode(text);
        check_dimension(v);
        return v;
    };

    if (cfg.provider == EmbedProvider::LocalMock) {
        const auto tokens = tokenize(input);
        if (tokens.empty()) throw Error(ErrorCode::InvalidArgument, "input has no tokens");
        out.values = window_mean_pool(tokens, cfg.token_limit, [&](std::span<const std::string> w) {
            std::string text;
            for (const auto& t : w) {
                if (!text.empty()) text += ' ';
                text += t;
            }
            return checked(text);
        });
    } else {
        // Provider tokenizers are unavailable offline: 4 characters count as
        // one token and windows use 90% of the limit.
        std::vector<std::string> pieces;
        for (std::size_t i = 0; i < input.size(); i += 4) pieces.push_back(input.substr(i, 4));
        const std::size_t window =
            pieces.size() <= cfg.token_limit ? cfg.token_limit : std::max<std::size_t>(1, cfg.token_limit * 9 / 10);
        out.values = window_mean_pool(pieces, window, [&](std::span<const std::string> w) {
            std::string text;
            for (const auto& p : w) text += p;
            return checked(text);
        });
    }
    if (cache) cache->store(out);
    return out;
}

json to_json(const EmbeddingVector& v) {
    return json{{"input_sha256", v.input_sha256}, {"model_id", v.source_model}, {"values", v.values}};
}

EmbeddingVector embedding_from_json(const json& row) {
    try {
        EmbeddingVector v;
        v.input_sha256 = row.at("input_sha256").get<std::string>();
        v.source_model = row.value("model_id", "");
        v.values = row.at("values").get<std::vector<double>>();
        check_dimension(v.values);
        return v;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseFailure, std::string("malformed embedding row: ") + e.what());
    }
}

}  // namespace untangle
