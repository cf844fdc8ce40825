#include "lithoquery/embed.hpp"

#include "lithoquery/error.hpp"
#include "lithoquery/hash.hpp"
#include "lithoquery/io.hpp"

#include "http_url.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>

namespace lithoquery::embed {

EmbeddingVector normalize(std::span<const double> raw) {
    double sq = 0.0;
    for (double x : raw) {
        if (!std::isfinite(x)) throw Error(ErrorCode::provider, "embedding has a non-finite component");
        sq += x * x;
    }
    EmbeddingVector out;
    out.values.assign(raw.size(), 0.0f);
    if (sq == 0.0) {
        out.empty = true;
        return out;
    }
    const double norm = std::sqrt(sq);
    for (std::size_t i = 0; i < raw.size(); ++i) out.values[i] = static_cast<float>(raw[i] / norm);
    return out;
}

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dims() != v.dims())
        throw Error(ErrorCode::shape, "cosine of vectors with " + std::to_string(u.dims()) + " and " +
                                          std::to_string(v.dims()) + " dims");
    if (u.empty || v.empty) throw Error(ErrorCode::undefined_similarity, "cosine of an empty embedding");
    double dot = 0.0;
    double uu = 0.0;
    double vv = 0.0;
    for (std::size_t i = 0; i < u.values.size(); ++i) {
        const double a = u.values[i];
        const double b = v.values[i];
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if (uu == 0.0 || vv == 0.0) throw Error(ErrorCode::undefined_similarity, "cosine of a zero vector");
    return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (c < 0x80 && std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::vector<double> ReferenceProvider::bucket_counts(std::string_view text, std::size_t dims) {
    if (dims == 0) throw Error(ErrorCode::input, "embedding dims must be positive");
    std::vector<double> counts(dims, 0.0);
    for (const auto& token : tokenize(text)) counts[fnv1a64(token) % dims] += 1.0;
    return counts;
}

EmbeddingVector reference_embed(std::string_view text, std::size_t dims) {
    return normalize(ReferenceProvider::bucket_counts(text, dims));
}

ReferenceProvider::ReferenceProvider(std::size_t dims, std::string provider_id)
    : id_(std::move(provider_id)), model_("fnv1a-bag-of-words-" + std::to_string(dims)), dims_(dims) {
    if (dims == 0) throw Error(ErrorCode::config, "reference provider needs dims > 0");
}

std::vector<std::vector<double>> ReferenceProvider::compute(std::span<const std::string> texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(bucket_counts(t, dims_));
    return out;
}

RemoteProvider::RemoteProvider(RemoteProviderConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw Error(ErrorCode::config, "remote provider needs an endpoint");
    if (config_.dims == 0) throw Error(ErrorCode::config, "remote provider needs dims > 0");
}

std::vector<std::vector<double>> RemoteProvider::compute(std::span<const std::string> texts) {
    const auto target = detail::split_url(config_.endpoint);
    httplib::Client client(target.origin);
    client.set_connection_timeout(config_.timeout_seconds);
    client.set_read_timeout(config_.timeout_seconds);

    nlohmann::json body{{"model", config_.model_name}, {"texts", std::vector<std::string>(texts.begin(), texts.end())}};
    auto res = client.Post(target.base_path + "/embed", body.dump(), "application/json");
    if (!res)
        throw Error(ErrorCode::provider, "request to " + config_.endpoint + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw Error(ErrorCode::provider, config_.endpoint + " answered HTTP " + std::to_string(res->status));

    nlohmann::json reply;
    try {
        reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::provider, config_.endpoint + " returned a non-JSON body");
    }
    if (!reply.is_object() || !reply.contains("vectors") || !reply["vectors"].is_array() ||
        reply["vectors"].size() != texts.size())
        throw Error(ErrorCode::provider, config_.endpoint + " returned a malformed vectors array");
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& v : reply["vectors"]) {
        if (!v.is_array()) throw Error(ErrorCode::provider, "vector entry is not an array");
        std::vector<double> row;
        row.reserve(v.size());
        for (const auto& x : v) {
            if (!x.is_number()) throw Error(ErrorCode::provider, "vector component is not a number");
            row.push_back(x.get<double>());
        }
        out.push_back(std::move(row));
    }
    return out;
}

namespace {

std::string cache_key_string(const EmbeddingCache::Key& key) {
    return key.provider_id + '\x1f' + key.model_name + '\x1f' + key.text_sha256;
}

std::string sanitize_component(std::string_view s) {
    std::string out;
    for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ? c : '_');
    if (out.empty() || out == "." || out == "..") out = "_" + out;
    return out;
}

void put_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32_le(const char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

}  // namespace

EmbeddingCache::EmbeddingCache(std::optional<std::filesystem::path> root) : root_(std::move(root)) {}

std::optional<std::filesystem::path> EmbeddingCache::entry_path(const Key& key) const {
    if (!root_) return std::nullopt;
    return *root_ / sanitize_component(key.provider_id) / sanitize_component(key.model_name) / key.text_sha256;
}

std::string EmbeddingCache::encode(const EmbeddingVector& vec) {
    std::string out;
    out.reserve(4 + 4 * vec.values.size());
    put_u32_le(out, static_cast<std::uint32_t>(vec.values.size()));
    for (float f : vec.values) put_u32_le(out, std::bit_cast<std::uint32_t>(f));
    return out;
}

EmbeddingVector EmbeddingCache::decode(std::string_view bytes) {
    if (bytes.size() < 4) throw Error(ErrorCode::cache, "cache entry shorter than its header");
    const std::uint32_t dims = get_u32_le(bytes.data());
    if (dims == 0 || bytes.size() != 4 + 4 * static_cast<std::size_t>(dims))
        throw Error(ErrorCode::cache, "cache entry length does not match its dims");
    EmbeddingVector vec;
    vec.values.resize(dims);
    bool all_zero = true;
    for (std::uint32_t i = 0; i < dims; ++i) {
        const float f = std::bit_cast<float>(get_u32_le(bytes.data() + 4 + 4 * i));
        if (!std::isfinite(f)) throw Error(ErrorCode::cache, "cache entry has a non-finite component");
        if (f != 0.0f) all_zero = false;
        vec.values[i] = f;
    }
    vec.empty = all_zero;
    return vec;
}

std::optional<EmbeddingVector> EmbeddingCache::lookup(const Key& key) {
    const auto mkey = cache_key_string(key);
    {
        std::shared_lock lock(mutex_);
        if (auto it = memory_.find(mkey); it != memory_.end()) {
            ++hits_;
            return it->second;
        }
    }
    if (auto path = entry_path(key); path && std::filesystem::exists(*path)) {
        EmbeddingVector vec;
        try {
            vec = decode(io::read_text(*path));
        } catch (const Error& e) {
            std::error_code ec;
            std::filesystem::remove(*path, ec);
            throw Error(ErrorCode::cache, "invalidated corrupt cache entry " + path->string() + ": " + e.what());
        }
        std::unique_lock lock(mutex_);
        memory_.insert_or_assign(mkey, vec);
        ++hits_;
        return vec;
    }
    ++misses_;
    return std::nullopt;
}

void EmbeddingCache::store(const Key& key, const EmbeddingVector& vec) {
    {
        std::unique_lock lock(mutex_);
        memory_.insert_or_assign(cache_key_string(key), vec);
    }
    if (auto path = entry_path(key)) io::write_atomic(*path, encode(vec));
}

std::vector<EmbeddingVector> embed_with_cache(EmbeddingProvider& provider, EmbeddingCache* cache,
                                              std::span<const std::string> texts, std::size_t batch_size) {
    if (batch_size == 0) throw Error(ErrorCode::config, "batch size must be positive");

    // Deduplicate while keeping first-occurrence order.
    std::unordered_map<std::string_view, std::size_t> slot_of;
    std::vector<std::size_t> slot_for_input(texts.size());
    std::vector<std::string_view> unique;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        auto [it, inserted] = slot_of.emplace(texts[i], unique.size());
        if (inserted) unique.push_back(texts[i]);
        slot_for_input[i] = it->second;
    }

    std::vector<std::optional<EmbeddingVector>> resolved(unique.size());
    std::vector<EmbeddingCache::Key> keys(unique.size());
    std::vector<std::size_t> misses;
    for (std::size_t s = 0; s < unique.size(); ++s) {
        keys[s] = {provider.provider_id(), provider.model_name(), sha256_hex(unique[s])};
        if (cache) resolved[s] = cache->lookup(keys[s]);
        if (!resolved[s]) misses.push_back(s);
    }

    const std::size_t batches = (misses.size() + batch_size - 1) / batch_size;
    for (std::size_t b = 0; b < batches; ++b) {
        const std::string where = "batch " + std::to_string(b + 1) + " of " + std::to_string(batches);
        const std::size_t begin = b * batch_size;
        const std::size_t end = std::min(misses.size(), begin + batch_size);
        std::vector<std::string> batch;
        batch.reserve(end - begin);
        for (std::size_t m = begin; m < end; ++m) batch.emplace_back(unique[misses[m]]);

        std::vector<std::vector<double>> raw;
        try {
            raw = provider.compute(batch);
        } catch (const Error& e) {
            throw Error(ErrorCode::provider, where + ": " + e.what());
        } catch (const std::exception& e) {
            throw Error(ErrorCode::provider, where + ": " + e.what());
        }
        if (raw.size() != batch.size())
            throw Error(ErrorCode::provider, where + ": expected " + std::to_string(batch.size()) +
                                                 " vectors, got " + std::to_string(raw.size()));
        for (std::size_t k = 0; k < raw.size(); ++k) {
            if (raw[k].size() != provider.dims())
                throw Error(ErrorCode::provider, where + ": vector has " + std::to_string(raw[k].size()) +
                                                     " dims, provider declares " + std::to_string(provider.dims()));
            auto vec = normalize(raw[k]);
            const std::size_t slot = misses[begin + k];
            if (cache) cache->store(keys[slot], vec);
            resolved[slot] = std::move(vec);
        }
    }

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) out.push_back(*resolved[slot_for_input[i]]);
    return out;
}

}  // namespace lithoquery::embed
