#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lithoquery::embed {

/// Unit-norm embedding stored in single precision. A text without any token
/// produces a zero vector flagged `empty`; it has no defined similarity.
struct EmbeddingVector {
    std::vector<float> values;
    bool empty = false;

    std::size_t dims() const { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

/// L2-normalizes in double precision; all-zero input yields an empty vector.
EmbeddingVector normalize(std::span<const double> raw);

/// Cosine similarity accumulated left to right in double precision and
/// clamped to [-1, 1]. Throws Error(shape) on a dims mismatch and
/// Error(undefined_similarity) for empty vectors.
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

/// Lowercased alphanumeric tokens of `text`.
std::vector<std::string> tokenize(std::string_view text);

/// Deterministic bag-of-words embedding: FNV-1a 64-bit token hash modulo
/// `dims`, per-bucket counts, L2 normalization.
EmbeddingVector reference_embed(std::string_view text, std::size_t dims);

enum class ProviderKind { reference, remote };

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual const std::string& provider_id() const = 0;
    virtual ProviderKind kind() const = 0;
    virtual const std::string& model_name() const = 0;
    virtual std::size_t dims() const = 0;

    /// Raw (not necessarily normalized) vectors for one batch, in input order.
    virtual std::vector<std::vector<double>> compute(std::span<const std::string> texts) = 0;
};

class ReferenceProvider final : public EmbeddingProvider {
public:
    explicit ReferenceProvider(std::size_t dims = 256, std::string provider_id = "reference");

    const std::string& provider_id() const override { return id_; }
    ProviderKind kind() const override { return ProviderKind::reference; }
    const std::string& model_name() const override { return model_; }
    std::size_t dims() const override { return dims_; }
    std::vector<std::vector<double>> compute(std::span<const std::string> texts) override;

    /// Unnormalized bucket counts for one text.
    static std::vector<double> bucket_counts(std::string_view text, std::size_t dims);

private:
    std::string id_;
    std::string model_;
    std::size_t dims_;
};

struct RemoteProviderConfig {
    std::string provider_id;
    std::string endpoint;  // e.g. http://127.0.0.1:9000
    std::string model_name;
    std::size_t dims = 0;
    int timeout_seconds = 60;
};

/// Client for `POST {endpoint}/embed` with body {"model", "texts"} answering
/// {"vectors": [[...], ...]}.
class RemoteProvider final : public EmbeddingProvider {
public:
    explicit RemoteProvider(RemoteProviderConfig config);

    const std::string& provider_id() const override { return config_.provider_id; }
    ProviderKind kind() const override { return ProviderKind::remote; }
    const std::string& model_name() const override { return config_.model_name; }
    std::size_t dims() const override { return config_.dims; }
    std::vector<std::vector<double>> compute(std::span<const std::string> texts) override;

private:
    RemoteProviderConfig config_;
};

/// Content-addressed embedding cache: in memory, optionally mirrored to disk
/// as `<root>/<provider_id>/<model_name>/<sha256 hex>` files holding a
/// little-endian u32 dimension count followed by that many f32 values.
class EmbeddingCache {
public:
    explicit EmbeddingCache(std::optional<std::filesystem::path> root = std::nullopt);

    struct Key {
        std::string provider_id;
        std::string model_name;
        std::string text_sha256;
    };

    std::optional<EmbeddingVector> lookup(const Key& key);
    void store(const Key& key, const EmbeddingVector& vec);

    std::size_t hits() const { return hits_.load(); }
    std::size_t misses() const { return misses_.load(); }

    std::optional<std::filesystem::path> entry_path(const Key& key) const;

    static std::string encode(const EmbeddingVector& vec);
    /// Throws Error(cache) on a malformed entry.
    static EmbeddingVector decode(std::string_view bytes);

private:
    std::optional<std::filesystem::path> root_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, EmbeddingVector> memory_;
    std::atomic<std::size_t> hits_{0};
    std::atomic<std::size_t> misses_{0};
};

inline constexpr std::size_t kDefaultBatchSize = 64;

/// Embeds `texts` in input order. Duplicate texts are computed once; cache
/// misses are sent to the provider in batches of `batch_size`.
std::vector<EmbeddingVector> embed_with_cache(EmbeddingProvider& provider, EmbeddingCache* cache,
                                              std::span<const std::string> texts,
                                              std::size_t batch_size = kDefaultBatchSize);

}  // namespace lithoquery::embed
