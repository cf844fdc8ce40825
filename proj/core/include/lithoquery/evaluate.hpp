#pragma once

#include "lithoquery/contact.hpp"
#include "lithoquery/evidence.hpp"
#include "lithoquery/geodata.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace lithoquery::evaluate {

using geodata::RecordId;

enum class CurveVariant { method, random_mean, random_std, oracle };

const char* to_string(CurveVariant v) noexcept;

/// Recall of known sites when only the top (100 - p)% of a ranking is kept,
/// for cutoff percentiles p = 1..100.
struct RecallCurve {
    std::vector<int> cutoff_percentiles;
    std::vector<double> recall;
    std::vector<std::size_t> selected_counts;
    double buffer_m = 0.0;
    CurveVariant variant = CurveVariant::method;
};

/// Records kept at cutoff percentile p: ceil((100 - p) * n / 100), at least one.
std::size_t cutoff_count(int percentile, std::size_t n);

/// Which sites each record covers once its geometry is buffered by
/// `buffer_m`. A site counts as covered when it lies in the closed region or
/// within `buffer_m` of it (exact round buffer).
class SiteCoverage {
public:
    SiteCoverage(const geodata::GeoDataset& dataset, const geodata::SiteSet& sites, double buffer_m);

    std::span<const std::uint32_t> covered_by(RecordId id) const;
    std::size_t site_count() const { return site_count_; }
    double buffer_m() const { return buffer_m_; }

private:
    std::unordered_map<RecordId, std::vector<std::uint32_t>> covered_;
    std::size_t site_count_ = 0;
    double buffer_m_ = 0.0;
};

RecallCurve recall_curve(std::span<const RecordId> ranking, const SiteCoverage& coverage);
RecallCurve recall_curve(std::span<const RecordId> ranking, const geodata::GeoDataset& dataset,
                         const geodata::SiteSet& sites, double buffer_m);

/// Recall of the union of several rankings' selections at each cutoff.
RecallCurve union_recall_curve(std::span<const std::vector<RecordId>> rankings, const SiteCoverage& coverage);

/// Records by descending number of covered sites, ties by ascending
/// record_id. With `greedy` each step instead takes the record adding the
/// most not-yet-covered sites.
std::vector<RecordId> oracle_ranking(const geodata::GeoDataset& dataset, const SiteCoverage& coverage,
                                     bool greedy = false);

/// Deterministic Fisher-Yates shuffle driven by mt19937_64.
std::vector<RecordId> seeded_shuffle(std::vector<RecordId> ids, std::uint64_t& state_seed);

struct BaselineCurves {
    RecallCurve random_mean;
    RecallCurve random_std;  // sample standard deviation; zero for one trial
    RecallCurve oracle;
};

BaselineCurves baseline_curves(const geodata::GeoDataset& dataset, const SiteCoverage& coverage, int trials,
                               std::uint64_t seed, bool greedy_oracle = false);
BaselineCurves baseline_curves(const geodata::GeoDataset& dataset, const geodata::SiteSet& sites, int trials,
                               std::uint64_t seed, double buffer_m, bool greedy_oracle = false);

struct AreaMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double iou = 0.0;
    bool empty_prediction = false;
    double pred_area = 0.0;
    double truth_area = 0.0;
    double intersection_area = 0.0;
    std::string pred_layer_id;
    std::string truth_layer_id;
};

/// Area precision, recall, F1 and IoU of a predicted layer against truth.
/// An empty prediction yields precision 0 with `empty_prediction` set.
AreaMetrics area_metrics(const geometry::LayerGeometry& pred, const geometry::LayerGeometry& truth);

struct GridSpec {
    std::vector<std::vector<double>> taus;  // one list per scored layer
    std::vector<double> r1;
    std::vector<double> r2;
    int arc_segments = geometry::kDefaultArcSegments;

    std::size_t cell_count() const;
};

struct GridCell {
    std::vector<double> taus;
    double r1 = 0.0;
    double r2 = 0.0;
    std::optional<AreaMetrics> metrics;
    std::string error;
    double selected_area = 0.0;  // summed area of the evidence layers
};

struct GridSearchResult {
    GridSpec grid;
    std::vector<GridCell> surface;  // row-major, last axis (r2) fastest
    std::optional<std::size_t> best_index;
    double best_f1 = 0.0;
};

struct GridOptions {
    unsigned threads = 0;
    std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Evaluates the contact pipeline for every grid cell. Cells that fail record
/// their error and the sweep continues. The best cell maximizes F1, then
/// minimizes selected area, then compares configurations lexicographically.
GridSearchResult grid_search(const geodata::GeoDataset& dataset, std::span<const evidence::ScoredLayer> layers,
                             const geometry::LayerGeometry& truth, const GridSpec& grid,
                             const GridOptions& options = {});

}  // namespace lithoquery::evaluate
