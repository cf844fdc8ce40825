#include "lithoquery/evaluate.hpp"

#include "lithoquery/error.hpp"
#include "lithoquery/parallel.hpp"

#include <boost/geometry/index/rtree.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace lithoquery::evaluate {

namespace bgi = boost::geometry::index;

const char* to_string(CurveVariant v) noexcept {
    switch (v) {
        case CurveVariant::method: return "method";
        case CurveVariant::random_mean: return "random_mean";
        case CurveVariant::random_std: return "random_std";
        case CurveVariant::oracle: return "oracle";
    }
    return "unknown";
}

std::size_t cutoff_count(int percentile, std::size_t n) {
    if (percentile < 1 || percentile > 100) throw Error(ErrorCode::input, "cutoff percentile must be in 1..100");
    const std::size_t keep = (static_cast<std::size_t>(100 - percentile) * n + 99) / 100;
    return std::min(n, std::max<std::size_t>(keep, 1));
}

SiteCoverage::SiteCoverage(const geodata::GeoDataset& dataset, const geodata::SiteSet& sites, double buffer_m)
    : site_count_(sites.size()), buffer_m_(buffer_m) {
    if (sites.empty()) throw Error(ErrorCode::input, "no sites to evaluate against");
    if (!(buffer_m >= 0.0)) throw Error(ErrorCode::input, "buffer_m must be non-negative");
    if (buffer_m > 0.0 && dataset.crs() != geometry::Crs::albers_projected)
        throw Error(ErrorCode::state, "buffered recall needs a projected dataset");

    using Entry = std::pair<geometry::Point, std::uint32_t>;
    const auto positions = geodata::site_positions(sites, dataset);
    std::vector<Entry> entries;
    entries.reserve(positions.size());
    for (std::uint32_t i = 0; i < positions.size(); ++i) entries.emplace_back(positions[i], i);
    const bgi::rtree<Entry, bgi::quadratic<16>> index(entries.begin(), entries.end());

    std::vector<std::vector<std::uint32_t>> per_record(dataset.count());
    parallel_for(dataset.count(), [&](std::size_t r) {
        const auto& geom = dataset.records()[r].geometry;
        if (geom.empty()) return;
        auto box = geometry::envelope(geom);
        box.min_corner().x(box.min_corner().x() - buffer_m);
        box.min_corner().y(box.min_corner().y() - buffer_m);
        box.max_corner().x(box.max_corner().x() + buffer_m);
        box.max_corner().y(box.max_corner().y() + buffer_m);
        std::vector<Entry> candidates;
        index.query(bgi::intersects(box), std::back_inserter(candidates));
        auto& hits = per_record[r];
        for (const auto& [pt, id] : candidates) {
            if (geometry::covers(geom, pt) || (buffer_m > 0.0 && geometry::distance(geom, pt) <= buffer_m))
                hits.push_back(id);
        }
        std::sort(hits.begin(), hits.end());
    });
    for (std::size_t r = 0; r < dataset.count(); ++r)
        covered_.emplace(dataset.records()[r].record_id, std::move(per_record[r]));
}

std::span<const std::uint32_t> SiteCoverage::covered_by(RecordId id) const {
    auto it = covered_.find(id);
    if (it == covered_.end()) throw Error(ErrorCode::not_found, "record " + std::to_string(id) + " not in coverage");
    return it->second;
}

namespace {

std::vector<int> all_cutoffs() {
    std::vector<int> p(100);
    std::iota(p.begin(), p.end(), 1);
    return p;
}

}  // namespace

RecallCurve union_recall_curve(std::span<const std::vector<RecordId>> rankings, const SiteCoverage& coverage) {
    if (rankings.empty()) throw Error(ErrorCode::input, "no rankings given");
    RecallCurve curve;
    curve.cutoff_percentiles = all_cutoffs();
    curve.recall.assign(100, 0.0);
    curve.selected_counts.assign(100, 0);
    curve.buffer_m = coverage.buffer_m();

    std::vector<char> covered(coverage.site_count(), 0);
    std::size_t covered_count = 0;
    std::vector<std::size_t> taken(rankings.size(), 0);
    // Walk from the strictest cutoff (p = 100) to the loosest so selections only grow.
    for (int p = 100; p >= 1; --p) {
        std::size_t selected = 0;
        for (std::size_t j = 0; j < rankings.size(); ++j) {
            const auto& ranking = rankings[j];
            if (ranking.empty()) continue;
            const std::size_t k = cutoff_count(p, ranking.size());
            for (; taken[j] < k; ++taken[j]) {
                for (auto site : coverage.covered_by(ranking[taken[j]])) {
                    if (!covered[site]) {
                        covered[site] = 1;
                        ++covered_count;
                    }
                }
            }
            selected += k;
        }
        curve.recall[static_cast<std::size_t>(p - 1)] =
            static_cast<double>(covered_count) / static_cast<double>(coverage.site_count());
        curve.selected_counts[static_cast<std::size_t>(p - 1)] = selected;
    }
    return curve;
}

RecallCurve recall_curve(std::span<const RecordId> ranking, const SiteCoverage& coverage) {
    const std::vector<RecordId> one(ranking.begin(), ranking.end());
    return union_recall_curve(std::span(&one, 1), coverage);
}

RecallCurve recall_curve(std::span<const RecordId> ranking, const geodata::GeoDataset& dataset,
                         const geodata::SiteSet& sites, double buffer_m) {
    return recall_curve(ranking, SiteCoverage(dataset, sites, buffer_m));
}

std::vector<RecordId> oracle_ranking(const geodata::GeoDataset& dataset, const SiteCoverage& coverage, bool greedy) {
    std::vector<RecordId> ids;
    ids.reserve(dataset.count());
    for (const auto& r : dataset.records()) ids.push_back(r.record_id);
    std::sort(ids.begin(), ids.end());

    if (!greedy) {
        std::stable_sort(ids.begin(), ids.end(), [&](RecordId a, RecordId b) {
            return coverage.covered_by(a).size() > coverage.covered_by(b).size();
        });
        return ids;
    }

    std::vector<char> covered(coverage.site_count(), 0);
    std::vector<char> used(ids.size(), 0);
    std::vector<RecordId> out;
    out.reserve(ids.size());
    for (std::size_t step = 0; step < ids.size(); ++step) {
        std::size_t best = ids.size();
        std::size_t best_gain = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (used[i]) continue;
            std::size_t gain = 0;
            for (auto s : coverage.covered_by(ids[i])) gain += covered[s] ? 0 : 1;
            if (best == ids.size() || gain > best_gain) {
                best = i;
                best_gain = gain;
            }
        }
        used[best] = 1;
        for (auto s : coverage.covered_by(ids[best])) covered[s] = 1;
        out.push_back(ids[best]);
    }
    return out;
}

namespace {

// Unbiased integer in [0, bound) from a 64-bit engine; avoids the
// implementation-defined std::uniform_int_distribution.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % bound;
}

void shuffle_in_place(std::vector<RecordId>& ids, std::mt19937_64& rng) {
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[uniform_below(rng, i)]);
}

}  // namespace

std::vector<RecordId> seeded_shuffle(std::vector<RecordId> ids, std::uint64_t& state_seed) {
    std::mt19937_64 rng(state_seed);
    shuffle_in_place(ids, rng);
    state_seed = rng();
    return ids;
}

BaselineCurves baseline_curves(const geodata::GeoDataset& dataset, const SiteCoverage& coverage, int trials,
                               std::uint64_t seed, bool greedy_oracle) {
    if (trials < 1) throw Error(ErrorCode::input, "trials must be at least 1");
    std::vector<RecordId> ids;
    ids.reserve(dataset.count());
    for (const auto& r : dataset.records()) ids.push_back(r.record_id);
    std::sort(ids.begin(), ids.end());

    std::mt19937_64 rng(seed);
    std::vector<RecallCurve> runs;
    runs.reserve(static_cast<std::size_t>(trials));
    for (int t = 0; t < trials; ++t) {
        auto shuffled = ids;
        shuffle_in_place(shuffled, rng);
        runs.push_back(recall_curve(shuffled, coverage));
    }

    BaselineCurves out;
    out.random_mean = runs.front();
    out.random_mean.variant = CurveVariant::random_mean;
    out.random_std = runs.front();
    out.random_std.variant = CurveVariant::random_std;
    for (std::size_t p = 0; p < 100; ++p) {
        double sum = 0.0;
        for (const auto& r : runs) sum += r.recall[p];
        const double mean = sum / trials;
        double sq = 0.0;
        for (const auto& r : runs) sq += (r.recall[p] - mean) * (r.recall[p] - mean);
        out.random_mean.recall[p] = mean;
        out.random_std.recall[p] = trials > 1 ? std::sqrt(sq / (trials - 1)) : 0.0;
    }
    out.oracle = recall_curve(oracle_ranking(dataset, coverage, greedy_oracle), coverage);
    out.oracle.variant = CurveVariant::oracle;
    return out;
}

BaselineCurves baseline_curves(const geodata::GeoDataset& dataset, const geodata::SiteSet& sites, int trials,
                               std::uint64_t seed, double buffer_m, bool greedy_oracle) {
    return baseline_curves(dataset, SiteCoverage(dataset, sites, buffer_m), trials, seed, greedy_oracle);
}

AreaMetrics area_metrics(const geometry::LayerGeometry& pred, const geometry::LayerGeometry& truth) {
    if (pred.crs != truth.crs) throw Error(ErrorCode::state, "prediction and truth are in different CRSs");
    if (truth.crs != geometry::Crs::albers_projected)
        throw Error(ErrorCode::state, "area metrics need projected coordinates");
    AreaMetrics m;
    m.truth_area = geometry::area(truth.shape);
    if (!(m.truth_area > 0.0)) throw Error(ErrorCode::input, "truth layer is empty");
    m.pred_area = geometry::area(pred.shape);
    if (!(m.pred_area > 0.0)) {
        m.empty_prediction = true;
        return m;
    }
    m.intersection_area = geometry::area(geometry::intersect(pred.shape, truth.shape));
    m.precision = std::clamp(m.intersection_area / m.pred_area, 0.0, 1.0);
    m.recall = std::clamp(m.intersection_area / m.truth_area, 0.0, 1.0);
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    const double union_area = m.pred_area + m.truth_area - m.intersection_area;
    m.iou = union_area > 0.0 ? std::clamp(m.intersection_area / union_area, 0.0, 1.0) : 0.0;
    return m;
}

std::size_t GridSpec::cell_count() const {
    std::size_t n = r1.size() * r2.size();
    for (const auto& t : taus) n *= t.size();
    return taus.empty() ? 0 : n;
}

namespace {

bool config_less(const GridCell& a, const GridCell& b) {
    if (a.taus != b.taus) return a.taus < b.taus;
    if (a.r1 != b.r1) return a.r1 < b.r1;
    return a.r2 < b.r2;
}

bool better(const GridCell& a, const GridCell& b) {
    if (a.metrics->f1 != b.metrics->f1) return a.metrics->f1 > b.metrics->f1;
    if (a.selected_area != b.selected_area) return a.selected_area < b.selected_area;
    return config_less(a, b);
}

}  // namespace

GridSearchResult grid_search(const geodata::GeoDataset& dataset, std::span<const evidence::ScoredLayer> layers,
                             const geometry::LayerGeometry& truth, const GridSpec& grid,
                             const GridOptions& options) {
    if (layers.size() < 2) throw Error(ErrorCode::input, "grid search needs at least two scored layers");
    if (grid.taus.size() != layers.size())
        throw Error(ErrorCode::input, "grid needs one tau list per scored layer");
    if (grid.cell_count() == 0) throw Error(ErrorCode::input, "grid is empty");
    if (!(geometry::area(truth.shape) > 0.0)) throw Error(ErrorCode::input, "truth layer is empty");

    const std::size_t L = layers.size();

    // Evidence geometry per (layer, tau) and its r1 buffer per (layer, tau, r1).
    std::vector<std::vector<std::optional<evidence::EvidenceLayer>>> evidence_layers(L);
    std::vector<std::vector<std::string>> evidence_errors(L);
    std::vector<std::pair<std::size_t, std::size_t>> ev_jobs;
    for (std::size_t l = 0; l < L; ++l) {
        evidence_layers[l].resize(grid.taus[l].size());
        evidence_errors[l].resize(grid.taus[l].size());
        for (std::size_t t = 0; t < grid.taus[l].size(); ++t) ev_jobs.emplace_back(l, t);
    }
    parallel_for(
        ev_jobs.size(),
        [&](std::size_t j) {
            auto [l, t] = ev_jobs[j];
            try {
                evidence_layers[l][t] = evidence::select_top(layers[l], grid.taus[l][t], dataset);
            } catch (const std::exception& e) {
                evidence_errors[l][t] = e.what();
            }
        },
        options.threads);

    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, geometry::LayerGeometry> buffered;
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> buf_jobs;
    for (const auto& [l, t] : ev_jobs)
        if (evidence_layers[l][t])
            for (std::size_t r = 0; r < grid.r1.size(); ++r) buf_jobs.emplace_back(l, t, r);
    std::vector<std::optional<geometry::LayerGeometry>> buf_results(buf_jobs.size());
    std::vector<std::string> buf_errors(buf_jobs.size());
    parallel_for(
        buf_jobs.size(),
        [&](std::size_t j) {
            auto [l, t, r] = buf_jobs[j];
            try {
                buf_results[j] = contact::buffer_layer(evidence_layers[l][t]->geometry, grid.r1[r], grid.arc_segments);
            } catch (const std::exception& e) {
                buf_errors[j] = e.what();
            }
        },
        options.threads);
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::string> buffer_errors;
    for (std::size_t j = 0; j < buf_jobs.size(); ++j) {
        if (buf_results[j]) buffered.emplace(buf_jobs[j], std::move(*buf_results[j]));
        else buffer_errors.emplace(buf_jobs[j], buf_errors[j]);
    }

    GridSearchResult result;
    result.grid = grid;
    const std::size_t total = grid.cell_count();
    result.surface.resize(total);
    std::atomic<std::size_t> done{0};

    parallel_for(
        total,
        [&](std::size_t cell_index) {
            // Decode the row-major index, r2 fastest.
            std::size_t rest = cell_index;
            const std::size_t r2_i = rest % grid.r2.size();
            rest /= grid.r2.size();
            const std::size_t r1_i = rest % grid.r1.size();
            rest /= grid.r1.size();
            std::vector<std::size_t> tau_i(L);
            for (std::size_t l = L; l-- > 0;) {
                tau_i[l] = rest % grid.taus[l].size();
                rest /= grid.taus[l].size();
            }

            GridCell& cell = result.surface[cell_index];
            cell.r1 = grid.r1[r1_i];
            cell.r2 = grid.r2[r2_i];
            for (std::size_t l = 0; l < L; ++l) cell.taus.push_back(grid.taus[l][tau_i[l]]);
            try {
                contact::ContactParams params{cell.r1, cell.r2, grid.arc_segments};
                params.validate();
                for (std::size_t l = 0; l < L; ++l) {
                    if (!evidence_layers[l][tau_i[l]]) throw Error(ErrorCode::input, evidence_errors[l][tau_i[l]]);
                    cell.selected_area += geometry::area(evidence_layers[l][tau_i[l]]->geometry.shape);
                }
                // Same sequence of operations as contact::find_contact.
                auto key = [&](std::size_t l) { return std::make_tuple(l, tau_i[l], r1_i); };
                auto fetch = [&](std::size_t l) -> const geometry::LayerGeometry& {
                    auto it = buffered.find(key(l));
                    if (it == buffered.end()) throw Error(ErrorCode::geometry, buffer_errors.at(key(l)));
                    return it->second;
                };
                geometry::LayerGeometry acc = fetch(0);
                for (std::size_t l = 1; l < L; ++l) acc = contact::intersect_layers(acc, fetch(l));
                const auto contact_layer = contact::buffer_layer(acc, cell.r2, grid.arc_segments);
                cell.metrics = area_metrics(contact_layer, truth);
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
            const std::size_t finished = ++done;
            if (options.progress) options.progress(finished, total);
        },
        options.threads);

    for (std::size_t i = 0; i < total; ++i) {
        const auto& cell = result.surface[i];
        if (!cell.metrics) continue;
        if (!result.best_index || better(cell, result.surface[*result.best_index])) result.best_index = i;
    }
    if (result.best_index) result.best_f1 = result.surface[*result.best_index].metrics->f1;
    return result;
}

}  // namespace lithoquery::evaluate
