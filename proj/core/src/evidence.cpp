#include "lithoquery/evidence.hpp"

#include "lithoquery/error.hpp"
#include "lithoquery/hash.hpp"
#include "lithoquery/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace lithoquery::evidence {

ScoredLayer score_dataset(const geodata::GeoDataset& dataset, std::string_view query,
                          embed::EmbeddingProvider& provider, const ScoreOptions& options) {
    const std::string cleaned = geodata::clean_description(query);
    if (cleaned.empty()) throw Error(ErrorCode::input, "query is empty after cleaning");
    if (dataset.empty()) throw Error(ErrorCode::input, "dataset " + dataset.id() + " has no records");

    const std::string query_text(query);
    const auto query_vec = embed::embed_with_cache(provider, options.cache, std::span(&query_text, 1),
                                                   options.batch_size)
                               .front();
    if (query_vec.empty) throw Error(ErrorCode::input, "query has no embeddable token");

    std::vector<std::size_t> order(dataset.count());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return dataset.records()[a].record_id < dataset.records()[b].record_id;
    });
    std::vector<std::string> descriptions;
    descriptions.reserve(order.size());
    for (auto i : order) descriptions.push_back(dataset.records()[i].full_desc);

    std::vector<embed::EmbeddingVector> vectors;
    try {
        vectors = embed::embed_with_cache(provider, options.cache, descriptions, options.batch_size);
    } catch (const Error& e) {
        const std::size_t cached = options.cache ? options.cache->hits() : 0;
        throw Error(e.code(), std::string(e.what()) + " (" + std::to_string(cached) + " of " +
                                  std::to_string(descriptions.size()) + " descriptions served from cache)");
    }

    ScoredLayer out;
    out.dataset_id = dataset.id();
    out.query = query_text;
    out.provider_id = provider.provider_id();
    out.model_name = provider.model_name();
    out.created_at = io::utc_timestamp();
    out.scores.reserve(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (vectors[k].empty) {
            ++out.excluded_count;
            continue;
        }
        out.scores.push_back({dataset.records()[order[k]].record_id, embed::cosine(query_vec, vectors[k])});
    }
    out.layer_id = stable_id("sc-", dataset.id() + '\x1f' + query_text + '\x1f' + out.provider_id + '\x1f' +
                                        out.model_name);
    return out;
}

std::vector<RecordId> rank_records(const ScoredLayer& scored) {
    std::vector<RecordScore> sorted = scored.scores;
    std::sort(sorted.begin(), sorted.end(), [](const RecordScore& a, const RecordScore& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.record_id < b.record_id;
    });
    std::vector<RecordId> ids;
    ids.reserve(sorted.size());
    for (const auto& s : sorted) ids.push_back(s.record_id);
    return ids;
}

std::size_t selection_size(double tau, std::size_t n) {
    const double exact = tau * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
    return std::min(n, std::max<std::size_t>(k, n > 0 ? 1 : 0));
}

double tau_from_percentile(double percentile) {
    if (!(percentile >= 0.0 && percentile < 100.0))
        throw Error(ErrorCode::input, "percentile cutoff must lie in [0, 100)");
    return 1.0 - percentile / 100.0;
}

namespace {

void check_tau(double tau) {
    if (!(tau > 0.0 && tau <= 1.0)) {
        std::ostringstream msg;
        msg << "tau must lie in (0, 1], got " << tau;
        throw Error(ErrorCode::input, msg.str());
    }
}

}  // namespace

std::vector<RecordId> select_top_ids(const ScoredLayer& scored, double tau) {
    check_tau(tau);
    auto ranked = rank_records(scored);
    ranked.resize(selection_size(tau, ranked.size()));
    return ranked;
}

geometry::MultiPolygon union_of_records(const geodata::GeoDataset& dataset, std::span<const RecordId> ids) {
    std::vector<geometry::MultiPolygon> parts;
    parts.reserve(ids.size());
    for (auto id : ids) parts.push_back(dataset.record(id).geometry);
    return geometry::union_all(std::move(parts));
}

EvidenceLayer select_top(const ScoredLayer& scored, double tau, const geodata::GeoDataset& dataset) {
    EvidenceLayer out;
    out.selected = select_top_ids(scored, tau);
    out.tau = tau;
    out.source_scored_layer_id = scored.layer_id;
    std::ostringstream material;
    material.precision(17);
    material << scored.layer_id << '\x1f' << tau;
    out.layer_id = stable_id("ev-", material.str());
    out.geometry = {union_of_records(dataset, out.selected), dataset.crs()};
    return out;
}

std::vector<HistogramBin> layer_histogram(const ScoredLayer& scored, int bins) {
    if (bins < 1) throw Error(ErrorCode::input, "bins must be at least 1");
    if (scored.scores.empty()) throw Error(ErrorCode::input, "scored layer has no scores");
    auto [lo_it, hi_it] = std::minmax_element(scored.scores.begin(), scored.scores.end(),
                                              [](const auto& a, const auto& b) { return a.score < b.score; });
    const double lo = lo_it->score;
    const double hi = hi_it->score;
    if (lo == hi) return {{lo, hi, scored.scores.size()}};

    const double width = (hi - lo) / bins;
    std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
    for (int b = 0; b < bins; ++b) {
        out[b].low = lo + width * b;
        out[b].high = b + 1 == bins ? hi : lo + width * (b + 1);
    }
    for (const auto& s : scored.scores) {
        // Smallest bin whose upper edge reaches the score.
        auto b = static_cast<int>(std::ceil((s.score - lo) / width)) - 1;
        b = std::clamp(b, 0, bins - 1);
        if (b + 1 < bins && s.score > out[b].high) ++b;
        if (b > 0 && s.score <= out[b - 1].high) --b;
        ++out[b].count;
    }
    return out;
}

}  // namespace lithoquery::evidence
