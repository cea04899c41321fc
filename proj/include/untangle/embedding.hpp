#pragma once

#include "untangle/io.hpp"
#include "untangle/llm.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace untangle {

inline constexpr std::size_t kEmbeddingDim = 768;

struct EmbeddingVector {
    std::vector<double> values;
    std::string source_model;
    std::string input_sha256;
};

enum class EmbedProvider { Remote, LocalMock };

struct EmbedConfig {
    EmbedProvider provider = EmbedProvider::LocalMock;
    std::string model_id = "hash-768";
    std::size_t token_limit = 512;
    std::string pooling = "mean";
    // Remote only.
    Provider backend = Provider::GeminiCompatible;
    std::string base_url;
    double timeout_seconds = 60.0;
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{500};

    void validate() const;
};

// Encodes one window of text.
using TextEncoder = std::function<std::vector<double>(std::string_view)>;

// Alphanumeric/underscore runs and single punctuation characters;
// whitespace separates and is dropped.
std::vector<std::string> tokenize(std::string_view text);

// Consecutive non-overlapping windows of at most `window` tokens; the
// component-wise unweighted mean of the per-window vectors.
std::vector<double> window_mean_pool(std::span<const std::string> tokens, std::size_t window,
                                     const std::function<std::vector<double>(std::span<const std::string>)>& encode);

// Deterministic signed feature hashing of unigrams and bigrams into 768
// buckets, L2-normalized. Stands in for a neural encoder offline.
std::vector<double> hashing_encode(std::string_view text);

// Remote embedding endpoint (OpenAI /v1/embeddings or Gemini embedContent
// with the CLASSIFICATION task type).
TextEncoder make_remote_encoder(const EmbedConfig& cfg, HttpTransport transport = default_http_post,
                                std::string api_key = {});

std::string embedding_input(std::string_view message, std::string_view diff);

// Embedding cache JSONL: {input_sha256, model_id, values}.
class EmbeddingCache {
public:
    explicit EmbeddingCache(std::optional<std::filesystem::path> file = std::nullopt);
    std::optional<std::vector<double>> lookup(const std::string& model_id, const std::string& input_sha256);
    void store(const EmbeddingVector& vector);

private:
    std::optional<std::filesystem::path> file_;
    std::map<std::pair<std::string, std::string>, std::vector<double>> entries_;
    std::mutex mutex_;
};

// input = diff + "\n" + message. Short inputs are encoded in one call,
// longer ones through window_mean_pool. `encoder` overrides the encoder the
// config would pick. Throws ProviderUnavailable, DimensionMismatch.
EmbeddingVector embed_change(std::string_view message, std::string_view diff, const EmbedConfig& cfg,
                             const TextEncoder& encoder = {}, EmbeddingCache* cache = nullptr);

json to_json(const EmbeddingVector& vector);
EmbeddingVector embedding_from_json(const json& row);

}  // namespace untangle
