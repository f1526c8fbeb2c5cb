#pragma once

#include <cstddef>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cdr/http_client.hpp"

namespace cdr {

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
};

/// Maps texts to vectors, one per input and in input order.
/// Implementations must be safe to call from several threads.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    /// Stable identifier; part of the embedding cache key.
    virtual std::string id() const = 0;
    virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) = 0;
};

/// Embeds a single text. Throws std::invalid_argument for text that is
/// empty after trimming and ProviderError for backend failures or a
/// response violating the provider contract (count, dimension, NaN/Inf).
EmbeddingVector embed(std::string_view text, EmbeddingProvider& provider);

/// Batch form of embed() with the same checks.
std::vector<EmbeddingVector> embed_all(std::span<const std::string> texts, EmbeddingProvider& provider);

/// Offline bag-of-tokens embedding: lowercase, strip punctuation, split
/// on whitespace, hash each token into one of 256 buckets, sum the
/// one-hot vectors and L2-normalize. Texts sharing more tokens are more
/// similar.
class MockEmbeddingProvider final : public EmbeddingProvider {
public:
    static constexpr std::size_t kDim = 256;

    std::string id() const override { return "mock-hash-256"; }
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;

    static EmbeddingVector embed_text(std::string_view text);
};

struct RemoteEmbeddingConfig {
    std::string url;
    std::string model;
    std::string api_key;
    RetryPolicy retry;

    /// Reads CDR_AGENT_EMBED_URL, CDR_AGENT_EMBED_MODEL and
    /// CDR_AGENT_API_KEY. Throws std::runtime_error if the URL is unset.
    static RemoteEmbeddingConfig from_env();
};

/// Client for OpenAI-style embedding endpoints: POST {"input": [...],
/// "model": ...} answered by {"data": [{"index": i, "embedding": [...]}]}.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit RemoteEmbeddingProvider(RemoteEmbeddingConfig config);

    std::string id() const override { return "remote:" + config_.url + "#" + config_.model; }
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;

private:
    RemoteEmbeddingConfig config_;
    Endpoint endpoint_;
};

/// Thread-safe memo of embeddings keyed by (provider id, SHA-256 of text).
class EmbeddingCache {
public:
    /// Returns embeddings for `texts`, asking the provider only for the
    /// ones not cached yet.
    std::vector<EmbeddingVector> get(std::span<const std::string> texts, EmbeddingProvider& provider);

    std::size_t size() const;
    void clear();

private:
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, EmbeddingVector> entries_;
};

}  // namespace cdr
