#include "lithoquery/error.hpp"
#include "lithoquery/evaluate.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

namespace evl = lithoquery::evaluate;
namespace gd = lithoquery::geodata;
namespace geo = lithoquery::geometry;
using lithoquery::Error;
using lithoquery::ErrorCode;
using lqtest::box;
using lqtest::projected;

namespace {

gd::SiteSet sites_at(const std::vector<std::pair<double, double>>& pts) {
    gd::SiteSet s;
    for (std::size_t i = 0; i < pts.size(); ++i) s.sites.push_back({std::to_string(i), "", pts[i].first, pts[i].second});
    return s;
}

// Sites are given in dataset coordinates; the projected fixture treats
// longitude/latitude fields as already projected positions through this
// helper, which inverts the default projection.
gd::SiteSet projected_sites(const std::vector<std::pair<double, double>>& xy) {
    const lithoquery::projection::Albers albers;
    gd::SiteSet s;
    for (std::size_t i = 0; i < xy.size(); ++i) {
        const auto ll = albers.inverse({xy[i].first, xy[i].second});
        s.sites.push_back({"s" + std::to_string(i), "", ll.x(), ll.y()});
    }
    return s;
}

// Three 1 km squares covering two, one and zero of three sites.
struct ThreePolygons {
    gd::GeoDataset ds = lqtest::make_dataset({{0, {}, "a", box(0, 0, 1000, 1000)},
                                              {1, {}, "b", box(2000, 0, 3000, 1000)},
                                              {2, {}, "c", box(4000, 0, 5000, 1000)}});
    gd::SiteSet sites = projected_sites({{100, 100}, {900, 900}, {2500, 500}});
};

double recall_at_count(const evl::RecallCurve& c, std::size_t count) {
    for (std::size_t i = 0; i < c.recall.size(); ++i)
        if (c.selected_counts[i] == count) return c.recall[i];
    ADD_FAILURE() << "no cutoff selects " << count;
    return -1;
}

}  // namespace

TEST(CutoffCount, CeilingWithFloorOfOne) {
    EXPECT_EQ(evl::cutoff_count(1, 3), 3u);
    EXPECT_EQ(evl::cutoff_count(34, 3), 2u);
    EXPECT_EQ(evl::cutoff_count(67, 3), 1u);
    EXPECT_EQ(evl::cutoff_count(100, 3), 1u);
    EXPECT_EQ(evl::cutoff_count(50, 7000), 3500u);
    EXPECT_EQ(evl::cutoff_count(99, 7000), 70u);
}

TEST(RecallCurve, ThreePolygonExample) {
    ThreePolygons f;
    const std::vector<gd::RecordId> ranking{0, 1, 2};
    const auto c = evl::recall_curve(ranking, f.ds, f.sites, 0.0);
    ASSERT_EQ(c.cutoff_percentiles.size(), 100u);
    EXPECT_EQ(c.cutoff_percentiles.front(), 1);
    EXPECT_EQ(c.cutoff_percentiles.back(), 100);
    EXPECT_NEAR(recall_at_count(c, 1), 2.0 / 3.0, 1e-12);
    EXPECT_EQ(recall_at_count(c, 2), 1.0);
    EXPECT_EQ(recall_at_count(c, 3), 1.0);
}

TEST(RecallCurve, BufferNeverLowersRecall) {
    ThreePolygons f;
    const std::vector<gd::RecordId> ranking{2, 1, 0};
    const auto c0 = evl::recall_curve(ranking, f.ds, f.sites, 0.0);
    const auto c1600 = evl::recall_curve(ranking, f.ds, f.sites, 1600.0);
    for (std::size_t i = 0; i < c0.recall.size(); ++i) EXPECT_GE(c1600.recall[i], c0.recall[i]);
    EXPECT_EQ(recall_at_count(c0, 1), 0.0);
    EXPECT_NEAR(recall_at_count(c1600, 1), 1.0 / 3.0, 1e-12);  // (2500, 500) is 1500 m from record 2
}

TEST(RecallCurve, SiteOnEdgeIsCovered) {
    // The box's east edge passes exactly through the projected site.
    const auto edge = lithoquery::projection::Albers().forward({-95.99, 40.0});
    const auto ds = lqtest::make_dataset({{0, {}, "a", box(-1000, -1000, edge.x(), 1000)}});
    gd::SiteSet s = sites_at({{-96.0, 40.0}});  // projection origin, interior
    const auto on_edge = sites_at({{-95.99, 40.0}});
    const std::vector<gd::RecordId> ranking{0};
    EXPECT_EQ(evl::recall_curve(ranking, ds, on_edge, 0.0).recall.front(), 1.0);
    EXPECT_EQ(evl::recall_curve(ranking, ds, s, 0.0).recall.front(), 1.0);
}

TEST(RecallCurve, EmptySitesIsInputError) {
    ThreePolygons f;
    const std::vector<gd::RecordId> ranking{0};
    try {
        evl::recall_curve(ranking, f.ds, gd::SiteSet{}, 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::input);
    }
}

TEST(RecallCurve, BufferOnGeographicDatasetIsStateError) {
    const auto ds = lqtest::make_dataset({{0, {}, "a", box(-100, 30, -99, 31)}}, geo::Crs::geographic_wgs84);
    const auto s = sites_at({{-99.5, 30.5}});
    try {
        evl::SiteCoverage(ds, s, 100.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::state);
    }
    const std::vector<gd::RecordId> ranking{0};
    EXPECT_EQ(evl::recall_curve(ranking, ds, s, 0.0).recall.back(), 1.0);
}

TEST(Baselines, SingleTrialHasZeroStd) {
    ThreePolygons f;
    const auto b = evl::baseline_curves(f.ds, f.sites, 1, 42, 0.0);
    for (double v : b.random_std.recall) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(b.random_mean.variant, evl::CurveVariant::random_mean);
}

TEST(Baselines, OracleOnThreePolygons) {
    ThreePolygons f;
    const auto b = evl::baseline_curves(f.ds, f.sites, 3, 1, 0.0);
    EXPECT_NEAR(recall_at_count(b.oracle, 1), 2.0 / 3.0, 1e-12);
    EXPECT_EQ(recall_at_count(b.oracle, 2), 1.0);
    EXPECT_EQ(recall_at_count(b.oracle, 3), 1.0);
}

TEST(Baselines, FixedSeedIsBitwiseReproducible) {
    ThreePolygons f;
    const auto a = evl::baseline_curves(f.ds, f.sites, 10, 1234, 300.0);
    const auto b = evl::baseline_curves(f.ds, f.sites, 10, 1234, 300.0);
    EXPECT_EQ(a.random_mean.recall, b.random_mean.recall);
    EXPECT_EQ(a.random_std.recall, b.random_std.recall);
}

TEST(Baselines, MatchIndependentShuffleOracle) {
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> u(0, 20000);
    std::vector<lqtest::RecordSpec> specs;
    std::vector<std::array<double, 4>> boxes;
    for (int i = 0; i < 25; ++i) {
        const double x = (i % 5) * 4000.0, y = (i / 5) * 4000.0;
        boxes.push_back({x, y, x + 2000, y + 2000});
        specs.push_back({i, {}, "d", box(x, y, x + 2000, y + 2000)});
    }
    const auto ds = lqtest::make_dataset(specs);
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < 40; ++i) pts.push_back({u(rng), u(rng)});
    const auto sites = projected_sites(pts);
    const auto positions = gd::site_positions(sites, ds);
    const double buffer = 300.0;
    const int trials = 10;
    const std::uint64_t seed = 99;

    // Reference: Fisher-Yates with rejection sampling over one mt19937_64.
    std::mt19937_64 gen(seed);
    auto below = [&](std::uint64_t bound) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x = gen();
        while (x >= limit) x = gen();
        return x % bound;
    };
    std::vector<std::vector<double>> runs;
    for (int t = 0; t < trials; ++t) {
        std::vector<int> ids(25);
        for (int i = 0; i < 25; ++i) ids[i] = i;
        for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[below(i)]);
        std::vector<double> curve;
        for (int p = 1; p <= 100; ++p) {
            const std::size_t k = std::min<std::size_t>(25, std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((100 - p) * 25 / 100.0 - 1e-12))));
            int covered = 0;
            for (const auto& pt : positions) {
                bool hit = false;
                for (std::size_t j = 0; j < k && !hit; ++j) {
                    const auto& bx = boxes[ids[j]];
                    hit = lqtest::box_distance(bx[0], bx[1], bx[2], bx[3], pt.x(), pt.y()) <= buffer;
                }
                covered += hit;
            }
            curve.push_back(double(covered) / positions.size());
        }
        runs.push_back(curve);
    }
    const auto b = evl::baseline_curves(ds, sites, trials, seed, buffer);
    for (int i = 0; i < 100; ++i) {
        double mean = 0;
        for (const auto& r : runs) mean += r[i];
        mean /= trials;
        double var = 0;
        for (const auto& r : runs) var += (r[i] - mean) * (r[i] - mean);
        const double sd = std::sqrt(var / (trials - 1));
        EXPECT_NEAR(b.random_mean.recall[i], mean, 1e-12) << i;
        EXPECT_NEAR(b.random_std.recall[i], sd, 1e-12) << i;
    }
}

TEST(Oracle, GreedyVariantHandlesOverlappingCoverage) {
    // Records 0 and 1 cover the same two sites; record 2 covers a third.
    const auto ds = lqtest::make_dataset({{0, {}, "a", box(0, 0, 1000, 1000)},
                                          {1, {}, "b", box(0, 0, 1000, 1000)},
                                          {2, {}, "c", box(3000, 0, 3500, 500)}});
    const auto sites = projected_sites({{100, 100}, {500, 500}, {3200, 200}});
    const evl::SiteCoverage cov(ds, sites, 0.0);
    EXPECT_EQ(evl::oracle_ranking(ds, cov), (std::vector<gd::RecordId>{0, 1, 2}));
    EXPECT_EQ(evl::oracle_ranking(ds, cov, true), (std::vector<gd::RecordId>{0, 2, 1}));
}

TEST(UnionCurve, CoversEitherSelection) {
    ThreePolygons f;
    const evl::SiteCoverage cov(f.ds, f.sites, 0.0);
    const std::vector<std::vector<gd::RecordId>> rankings{{2, 0, 1}, {1, 2, 0}};
    const auto u = evl::union_recall_curve(rankings, cov);
    EXPECT_NEAR(recall_at_count(u, 2), 1.0 / 3.0, 1e-12);  // records 2 and 1 together
    EXPECT_EQ(u.recall.front(), 1.0);
    for (std::size_t i = 1; i < u.recall.size(); ++i) EXPECT_LE(u.recall[i], u.recall[i - 1]);
}

TEST(AreaMetrics, AnalyticFixtures) {
    const auto sq = projected(box(0, 0, 1, 1));
    auto m = evl::area_metrics(sq, sq);
    EXPECT_NEAR(m.precision, 1, 1e-9);
    EXPECT_NEAR(m.recall, 1, 1e-9);
    EXPECT_NEAR(m.f1, 1, 1e-9);
    EXPECT_NEAR(m.iou, 1, 1e-9);
    m = evl::area_metrics(projected(box(5, 5, 6, 6)), sq);
    EXPECT_EQ(m.precision, 0);
    EXPECT_EQ(m.recall, 0);
    EXPECT_EQ(m.f1, 0);
    EXPECT_EQ(m.iou, 0);
    m = evl::area_metrics(projected(box(0.5, 0, 1.5, 1)), sq);
    EXPECT_NEAR(m.precision, 0.5, 1e-9);
    EXPECT_NEAR(m.recall, 0.5, 1e-9);
    EXPECT_NEAR(m.f1, 0.5, 1e-9);
    EXPECT_NEAR(m.iou, 1.0 / 3.0, 1e-9);
}

TEST(AreaMetrics, EmptyPredictionIsFlagged) {
    const auto m = evl::area_metrics(projected({}), projected(box(0, 0, 1, 1)));
    EXPECT_TRUE(m.empty_prediction);
    EXPECT_EQ(m.precision, 0);
    EXPECT_EQ(m.f1, 0);
}

TEST(AreaMetrics, Errors) {
    try {
        evl::area_metrics(projected(box(0, 0, 1, 1)), {box(0, 0, 1, 1), geo::Crs::geographic_wgs84});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::state);
    }
    try {
        evl::area_metrics(projected(box(0, 0, 1, 1)), projected({}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::input);
    }
}

TEST(AreaMetrics, RandomConvexPairsMatchClippingOracle) {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> u(0, 10);
    std::uniform_real_distribution<double> ang(0, std::numbers::pi);
    for (int t = 0; t < 200; ++t) {
        auto rect = [&] {
            const double cx = u(rng), cy = u(rng), w = 1 + u(rng) / 2, h = 1 + u(rng) / 2, a = ang(rng);
            lqtest::Poly p;
            for (auto [sx, sy] : {std::pair{-1, -1}, {1, -1}, {1, 1}, {-1, 1}})
                p.emplace_back(cx + sx * w / 2 * std::cos(a) - sy * h / 2 * std::sin(a),
                               cy + sx * w / 2 * std::sin(a) + sy * h / 2 * std::cos(a));
            return p;
        };
        const auto a = rect();
        const auto b = rect();
        auto to_geo = [](const lqtest::Poly& p) {
            geo::Polygon poly;
            for (const auto& [x, y] : p) poly.outer().push_back({x, y});
            poly.outer().push_back(poly.outer().front());
            geo::MultiPolygon g{poly};
            geo::normalize(g);
            return g;
        };
        const double inter = std::max(0.0, lqtest::shoelace(lqtest::clip_convex(a, b)));
        const double pa = lqtest::shoelace(a), pb = lqtest::shoelace(b);
        const auto m = evl::area_metrics(projected(to_geo(a)), projected(to_geo(b)));
        EXPECT_NEAR(m.precision, inter / pa, 1e-9);
        EXPECT_NEAR(m.recall, inter / pb, 1e-9);
        EXPECT_NEAR(m.iou, inter / (pa + pb - inter), 1e-9);
        if (m.precision + m.recall > 0) {
            EXPECT_NEAR(m.f1, 2 * m.precision * m.recall / (m.precision + m.recall), 1e-12);
            EXPECT_LE(m.iou, m.f1 / (2 - m.f1) + 1e-9);
        }
        EXPECT_LE(m.iou, std::min(m.precision, m.recall) + 1e-12);
    }
}

namespace {

struct GridFixture {
    lqtest::StripWorld world = lqtest::strip_world(4);
    std::vector<lithoquery::evidence::ScoredLayer> layers;
    geo::LayerGeometry truth;

    GridFixture() {
        lithoquery::embed::ReferenceProvider p(512);
        layers.push_back(lithoquery::evidence::score_dataset(world.dataset, world.host_query, p));
        layers.push_back(lithoquery::evidence::score_dataset(world.dataset, world.source_query, p));
        std::vector<geo::LayerGeometry> ev;
        for (const auto& l : layers) ev.push_back(lithoquery::evidence::select_top(l, 0.25, world.dataset).geometry);
        truth = lithoquery::contact::find_contact(ev, {300, 200, 16}).geometry;
    }
};

}  // namespace

TEST(GridSearch, SingleCell) {
    GridFixture f;
    evl::GridSpec grid{{{0.25}, {0.25}}, {300}, {200}, 16};
    const auto r = evl::grid_search(f.world.dataset, f.layers, f.truth, grid);
    ASSERT_EQ(r.surface.size(), 1u);
    ASSERT_EQ(r.best_index, 0u);
    EXPECT_EQ(r.best_f1, r.surface[0].metrics->f1);
    EXPECT_NEAR(r.best_f1, 1.0, 1e-9);
}

TEST(GridSearch, BestIsSurfaceMaximumAndDeterministic) {
    GridFixture f;
    evl::GridSpec grid{{{0.125, 0.25, 0.5}, {0.25, 0.5}}, {100, 300}, {0, 200}, 16};
    const auto a = evl::grid_search(f.world.dataset, f.layers, f.truth, grid, {4, {}});
    const auto b = evl::grid_search(f.world.dataset, f.layers, f.truth, grid, {1, {}});
    ASSERT_EQ(a.surface.size(), grid.cell_count());
    EXPECT_EQ(grid.cell_count(), 24u);
    double max_f1 = 0;
    for (const auto& c : a.surface) max_f1 = std::max(max_f1, c.metrics->f1);
    EXPECT_EQ(a.best_f1, max_f1);
    const auto& best = a.surface[*a.best_index];
    EXPECT_EQ(best.taus, (std::vector<double>{0.25, 0.25}));
    EXPECT_EQ(best.r1, 300);
    EXPECT_EQ(best.r2, 200);
    for (std::size_t i = 0; i < a.surface.size(); ++i) {
        EXPECT_EQ(a.surface[i].taus, b.surface[i].taus);
        EXPECT_EQ(a.surface[i].metrics->f1, b.surface[i].metrics->f1);
        EXPECT_EQ(a.surface[i].metrics->iou, b.surface[i].metrics->iou);
        EXPECT_EQ(a.surface[i].selected_area, b.surface[i].selected_area);
    }
    // Row-major order with r2 fastest.
    EXPECT_EQ(a.surface[0].r2, 0);
    EXPECT_EQ(a.surface[1].r2, 200);
    EXPECT_EQ(a.surface[2].r1, 300);
}

TEST(GridSearch, CellErrorsAreRecorded) {
    GridFixture f;
    evl::GridSpec grid{{{0.25, 1.5}, {0.25}}, {300}, {200}, 16};
    std::size_t progress_calls = 0;
    const auto r = evl::grid_search(f.world.dataset, f.layers, f.truth, grid,
                                    {2, [&](std::size_t, std::size_t) { ++progress_calls; }});
    ASSERT_EQ(r.surface.size(), 2u);
    EXPECT_TRUE(r.surface[0].metrics.has_value());
    EXPECT_FALSE(r.surface[1].metrics.has_value());
    EXPECT_FALSE(r.surface[1].error.empty());
    EXPECT_EQ(r.best_index, 0u);
    EXPECT_GT(progress_calls, 0u);
}

TEST(GridSearch, RejectsMalformedGrids) {
    GridFixture f;
    std::vector<lithoquery::evidence::ScoredLayer> one{f.layers[0]};
    EXPECT_THROW(evl::grid_search(f.world.dataset, one, f.truth, {{{0.25}}, {1}, {1}, 16}), Error);
    EXPECT_THROW(evl::grid_search(f.world.dataset, f.layers, f.truth, {{{0.25}}, {1}, {1}, 16}), Error);
    EXPECT_THROW(evl::grid_search(f.world.dataset, f.layers, f.truth, {{{0.25}, {}}, {1}, {1}, 16}), Error);
}
