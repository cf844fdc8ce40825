#pragma once

#include "lithoquery/embed.hpp"
#include "lithoquery/geodata.hpp"
#include "lithoquery/geometry.hpp"

#include <string>
#include <vector>

namespace lithoquery::evidence {

using geodata::RecordId;

struct RecordScore {
    RecordId record_id = 0;
    double score = 0.0;
};

/// Similarity of every eligible record to one query. Records whose
/// description has no embeddable token are excluded and only counted.
struct ScoredLayer {
    std::string layer_id;
    std::string dataset_id;
    std::string query;
    std::string provider_id;
    std::string model_name;
    std::vector<RecordScore> scores;  // ascending record_id
    std::size_t excluded_count = 0;
    std::string created_at;

    std::size_t eligible() const { return scores.size(); }
};

struct EvidenceLayer {
    std::string layer_id;
    std::string source_scored_layer_id;
    double tau = 1.0;
    std::vector<RecordId> selected;  // best first
    geometry::LayerGeometry geometry;
};

struct ScoreOptions {
    embed::EmbeddingCache* cache = nullptr;
    std::size_t batch_size = embed::kDefaultBatchSize;
};

ScoredLayer score_dataset(const geodata::GeoDataset& dataset, std::string_view query,
                          embed::EmbeddingProvider& provider, const ScoreOptions& options = {});

/// Record ids ordered by descending score, ties by ascending record_id.
std::vector<RecordId> rank_records(const ScoredLayer& scored);

/// ceil(tau * n), guarded against products like 0.7 * 10 landing a hair above
/// an integer.
std::size_t selection_size(double tau, std::size_t n);

/// Converts a percentile cutoff p in [0, 100) to the kept fraction 1 - p/100.
double tau_from_percentile(double percentile);

/// Keeps the top ceil(tau * N_eligible) records and unions their geometry.
EvidenceLayer select_top(const ScoredLayer& scored, double tau, const geodata::GeoDataset& dataset);

/// Selection without geometry; used where only membership matters.
std::vector<RecordId> select_top_ids(const ScoredLayer& scored, double tau);

geometry::MultiPolygon union_of_records(const geodata::GeoDataset& dataset, std::span<const RecordId> ids);

struct HistogramBin {
    double low = 0.0;
    double high = 0.0;
    std::size_t count = 0;
};

/// Equal-width bins over [min, max] of the scores. The first bin is closed
/// on both ends, later bins are (low, high]. A constant score list yields a
/// single bin.
std::vector<HistogramBin> layer_histogram(const ScoredLayer& scored, int bins);

}  // namespace lithoquery::evidence
