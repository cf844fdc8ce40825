#include "lithoquery/error.hpp"
#include "lithoquery/geodata.hpp"
#include "lithoquery/geojson.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>

namespace gd = lithoquery::geodata;
namespace geo = lithoquery::geometry;
using lithoquery::Error;
using lithoquery::ErrorCode;
using lqtest::box;

namespace {

gd::IngestConfig simple_config(std::size_t min_len = 0) {
    gd::IngestConfig cfg;
    cfg.signature_columns = {"UNIT_NAME", "MAJOR1"};
    cfg.key_columns = {"STATE", "UNIT_LINK"};
    cfg.min_desc_length = min_len;
    return cfg;
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::io;
}

class GeodataFiles : public ::testing::Test {
protected:
    lqtest::TempDir dir;

    void write_three(const std::string& third_name = "Limestone") {
        lqtest::write_file(dir / "attrs.csv",
                           "UNIT_LINK,STATE,UNIT_NAME,MAJOR1\n"
                           "U1,NV,Granite,granite\n"
                           "U2,NV,Pioche Shale,shale\n"
                           "U3,CA," + third_name + ",limestone\n");
        lqtest::write_file(dir / "geom.geojson",
                           lqtest::feature_collection({{-117, 38, -116.9, 38.1, {{"UNIT_LINK", "U1"}}},
                                                       {-116.9, 38, -116.8, 38.1, {{"UNIT_LINK", "U2"}}},
                                                       {-116.8, 38, -116.7, 38.1, {{"UNIT_LINK", "U3"}}}}));
    }
};

}  // namespace

TEST_F(GeodataFiles, ThreeRowIdentityJoin) {
    write_three();
    const auto rep = gd::load_dataset(dir / "attrs.csv", dir / "geom.geojson", simple_config());
    EXPECT_EQ(rep.dataset.count(), 3u);
    EXPECT_EQ(rep.dropped, 0u);
    EXPECT_EQ(rep.dataset.crs(), geo::Crs::geographic_wgs84);
    EXPECT_EQ(rep.dataset.records()[0].full_desc, "Granite. granite");
    EXPECT_EQ(rep.dataset.records()[2].key, (std::vector<std::string>{"CA", "U3"}));
}

TEST_F(GeodataFiles, ShortDescriptionIsDropped) {
    write_three();
    lqtest::write_file(dir / "attrs.csv",
                       "UNIT_LINK,STATE,UNIT_NAME,MAJOR1\n"
                       "U1,NV,granite,\n"
                       "U2,NV,Pioche Shale,shale and siltstone\n"
                       "U3,CA,Limestone,limestone and dolomite\n");
    const auto rep = gd::load_dataset(dir / "attrs.csv", dir / "geom.geojson", simple_config(10));
    EXPECT_EQ(rep.dataset.count(), 2u);
    EXPECT_EQ(rep.dropped, 1u);
    EXPECT_FALSE(rep.dataset.index_of(0).has_value());
}

TEST_F(GeodataFiles, MissingJoinIdNamesFeatureIndex) {
    write_three();
    lqtest::write_file(dir / "geom.geojson",
                       lqtest::feature_collection({{-117, 38, -116.9, 38.1, {{"UNIT_LINK", "U1"}}},
                                                   {-116.9, 38, -116.8, 38.1, {{"OTHER", "x"}}}}));
    try {
        gd::load_dataset(dir / "attrs.csv", dir / "geom.geojson", simple_config());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ingest);
        EXPECT_NE(std::string(e.what()).find("feature 1"), std::string::npos) << e.what();
    }
}

TEST_F(GeodataFiles, MissingConfiguredColumnIsConfigError) {
    write_three();
    auto cfg = simple_config();
    cfg.signature_columns.push_back("UNITDESC");
    EXPECT_EQ(code_of([&] { gd::load_dataset(dir / "attrs.csv", dir / "geom.geojson", cfg); }), ErrorCode::config);
}

TEST_F(GeodataFiles, MalformedInputsAreParseErrors) {
    write_three();
    lqtest::write_file(dir / "bad.geojson", "{\"type\": \"FeatureCollection\", \"features\": [");
    EXPECT_EQ(code_of([&] { gd::load_dataset(dir / "attrs.csv", dir / "bad.geojson", simple_config()); }),
              ErrorCode::parse);
    lqtest::write_file(dir / "bad.csv", "UNIT_LINK,STATE\nU1,\"NV\n");
    EXPECT_EQ(code_of([&] { gd::load_dataset(dir / "bad.csv", dir / "geom.geojson", simple_config()); }),
              ErrorCode::parse);
}

TEST_F(GeodataFiles, SgmcShapedRowsOmitMissingFields) {
    const std::vector<std::string> header = {"UNIT_LINK", "STATE",  "ORIG_LABEL", "SGMC_LABEL", "UNIT_NAME",
                                             "MAJOR1",    "MAJOR2", "MAJOR3",     "MINOR1",     "MINOR2",
                                             "MINOR3",    "MINOR4", "MINOR5",     "GENERALIZE", "UNITDESC"};
    std::string csv;
    for (std::size_t i = 0; i < header.size(); ++i) csv += (i ? "," : "") + header[i];
    csv += "\n";
    std::vector<lqtest::FeatureSpec> feats;
    std::vector<std::string> expected;
    for (int r = 0; r < 12; ++r) {
        const bool sparse = r == 4 || r == 9;
        std::vector<std::string> row = {"L" + std::to_string(r), "NV", "K" + std::to_string(r), "NVK" + std::to_string(r)};
        std::vector<std::string> present;
        for (std::size_t c = 4; c < header.size(); ++c) {
            std::string v;
            if (!sparse || c == 4 || c == 5) v = header[c] + " value " + std::to_string(r);
            row.push_back(v);
            if (!v.empty()) present.push_back(v);
        }
        std::string joined;
        for (const auto& p : present) joined += (joined.empty() ? "" : ". ") + p;
        expected.push_back(joined);
        for (std::size_t i = 0; i < row.size(); ++i) csv += (i ? "," : "") + row[i];
        csv += "\n";
        feats.push_back({-117.0 + r * 0.1, 38, -116.95 + r * 0.1, 38.05, {{"UNIT_LINK", row[0]}}});
    }
    lqtest::write_file(dir / "sgmc.csv", csv);
    lqtest::write_file(dir / "sgmc.geojson", lqtest::feature_collection(feats));
    gd::IngestConfig cfg;  // default signature and key columns
    const auto rep = gd::load_dataset(dir / "sgmc.csv", dir / "sgmc.geojson", cfg);
    ASSERT_EQ(rep.dataset.count(), 12u);
    for (int r = 0; r < 12; ++r) EXPECT_EQ(rep.dataset.records()[r].full_desc, expected[r]);
    EXPECT_EQ(rep.dataset.records()[4].full_desc, "UNIT_NAME value 4. MAJOR1 value 4");
}

TEST(Dissolve, MergesMatchingKeys) {
    auto ds = lqtest::make_dataset({{0, {"NV", "Kg"}, "granite", box(0, 0, 1, 1)},
                                    {1, {"NV", "Kg"}, "granite", box(3, 0, 4, 1)},
                                    {2, {"CA", "Pzl"}, "limestone", box(6, 0, 7, 1)}});
    const auto out = gd::dissolve(ds).dataset;
    ASSERT_EQ(out.count(), 2u);
    EXPECT_EQ(out.records()[0].record_id, 0);
    EXPECT_EQ(out.records()[1].record_id, 1);
    EXPECT_NEAR(geo::area(out.records()[0].geometry), 2.0, 1e-9);
    EXPECT_EQ(out.records()[0].key, (std::vector<std::string>{"NV", "Kg"}));
}

TEST(Dissolve, DifferingDescriptionsWarnAndFirstWins) {
    auto ds = lqtest::make_dataset({{5, {"A"}, "second", box(0, 0, 1, 1)}, {2, {"A"}, "first", box(1, 0, 2, 1)}});
    const auto rep = gd::dissolve(ds);
    ASSERT_EQ(rep.dataset.count(), 1u);
    EXPECT_EQ(rep.dataset.records()[0].full_desc, "first");
    EXPECT_EQ(rep.warnings.size(), 1u);
    EXPECT_NEAR(geo::area(rep.dataset.records()[0].geometry), 2.0, 1e-9);
}

TEST(Dissolve, OverlappingMembersKeepUnionArea) {
    auto ds = lqtest::make_dataset({{0, {"A"}, "x", box(0, 0, 2, 2)}, {1, {"A"}, "x", box(1, 1, 3, 3)}});
    EXPECT_NEAR(geo::area(gd::dissolve(ds).dataset.records()[0].geometry), 7.0, 1e-9);
}

TEST(Dissolve, IdempotentOnRandomGroups) {
    std::mt19937 rng(11);
    std::vector<lqtest::RecordSpec> specs;
    for (int i = 0; i < 60; ++i) {
        const double x = (i % 10) * 3.0, y = (i / 10) * 3.0;
        specs.push_back({i, {"G" + std::to_string(rng() % 5)}, "desc", box(x, y, x + 1, y + 1)});
    }
    const auto once = gd::dissolve(lqtest::make_dataset(specs)).dataset;
    const auto twice = gd::dissolve(once).dataset;
    ASSERT_EQ(once.count(), twice.count());
    for (std::size_t i = 0; i < once.count(); ++i) {
        EXPECT_EQ(once.records()[i].key, twice.records()[i].key);
        EXPECT_NEAR(geo::area(once.records()[i].geometry), geo::area(twice.records()[i].geometry), 1e-9);
    }
}

TEST(Project, MapsEveryVertexAndMarksCrs) {
    auto ds = lqtest::make_dataset({{0, {}, "a", box(-96.0, 40.0, -95.0, 41.0)}}, geo::Crs::geographic_wgs84);
    const auto p = gd::project_dataset(ds);
    EXPECT_EQ(p.crs(), geo::Crs::albers_projected);
    const auto& ring = p.records()[0].geometry.front().outer();
    EXPECT_NEAR(ring.front().x(), 0.0, 1e-6);
    EXPECT_NEAR(ring.front().y(), 0.0, 1e-6);
    EXPECT_GT(geo::area(p.records()[0].geometry), 5e9);
    EXPECT_EQ(code_of([&] { gd::project_dataset(p); }), ErrorCode::state);
}

TEST(Clip, ContainingFocusKeepsEverything) {
    auto ds = lqtest::make_dataset({{0, {}, "a", box(0, 0, 1, 1)}, {1, {}, "b", box(2, 0, 3, 1)}},
                                   geo::Crs::geographic_wgs84);
    const auto f = gd::FocusArea::make("all", {{-1, -1}, {5, -1}, {5, 5}, {-1, 5}, {-1, -1}});
    const auto out = gd::clip_to_focus(ds, f);
    ASSERT_EQ(out.count(), 2u);
    EXPECT_NEAR(geo::area(out.records()[0].geometry), 1.0, 1e-9);
    EXPECT_NEAR(geo::area(out.records()[1].geometry), 1.0, 1e-9);
}

TEST(Clip, DisjointFocusEmptiesDataset) {
    auto ds = lqtest::make_dataset({{0, {}, "a", box(0, 0, 1, 1)}}, geo::Crs::geographic_wgs84);
    const auto f = gd::FocusArea::make("far", {{10, 10}, {11, 10}, {11, 11}, {10, 11}, {10, 10}});
    EXPECT_EQ(gd::clip_to_focus(ds, f).count(), 0u);
}

TEST(Clip, HalfPlaneBoxHalvesSquare) {
    auto ds = lqtest::make_dataset({{0, {}, "a", box(0, 0, 1, 1)}}, geo::Crs::geographic_wgs84);
    const auto f = gd::FocusArea::make("left", {{-1, -1}, {0.5, -1}, {0.5, 2}, {-1, 2}, {-1, -1}});
    EXPECT_NEAR(geo::area(gd::clip_to_focus(ds, f).records()[0].geometry), 0.5, 1e-9);
}

TEST(Clip, InvalidFocusRingIsGeometryError) {
    EXPECT_EQ(code_of([] { gd::FocusArea::make("bow", {{0, 0}, {1, 1}, {1, 0}, {0, 1}, {0, 0}}); }),
              ErrorCode::geometry);
    EXPECT_EQ(code_of([] { gd::FocusArea::make("short", {{0, 0}, {1, 1}}); }), ErrorCode::geometry);
    const auto closed = gd::FocusArea::make("open", {{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    EXPECT_TRUE(boost::geometry::equals(closed.ring.front(), closed.ring.back()));
}

TEST(Sites, ValidCsv) {
    const auto rep = gd::parse_sites(
        "site_id,name,longitude,latitude\n1,a,-117,38\n2,b,-117.1,38.1\n3,c,-116,37\n4,d,-115,36\n5,e,0,0\n",
        "sites.csv");
    EXPECT_EQ(rep.sites.size(), 5u);
    EXPECT_TRUE(rep.skipped.empty());
}

TEST(Sites, OutOfRangeRowSkippedWithLine) {
    const auto rep = gd::parse_sites("site_id,name,longitude,latitude\n1,a,-117,38\n2,b,-117,95\n", "sites.csv");
    EXPECT_EQ(rep.sites.size(), 1u);
    ASSERT_EQ(rep.skipped.size(), 1u);
    EXPECT_NE(rep.skipped[0].find("line 3"), std::string::npos) << rep.skipped[0];
}

TEST(Sites, GeoJsonSkipsNonPoints) {
    const std::string doc = R"({"type":"FeatureCollection","features":[
      {"type":"Feature","properties":{"site_id":"a"},"geometry":{"type":"Point","coordinates":[-117,38]}},
      {"type":"Feature","properties":{"site_id":"b"},"geometry":{"type":"Point","coordinates":[-116,37]}},
      {"type":"Feature","properties":{"site_id":"c"},"geometry":{"type":"LineString","coordinates":[[0,0],[1,1]]}}]})";
    const auto rep = gd::parse_sites(doc, "sites.geojson");
    EXPECT_EQ(rep.sites.size(), 2u);
    EXPECT_EQ(rep.skipped.size(), 1u);
}

TEST(Sites, NoValidRowsIsIngestError) {
    EXPECT_EQ(code_of([] { gd::parse_sites("site_id,name,longitude,latitude\n1,a,500,38\n", "s.csv"); }),
              ErrorCode::ingest);
}

TEST(Sites, DuplicateIdsAreSkipped) {
    const auto rep = gd::parse_sites("site_id,name,longitude,latitude\n1,a,-117,38\n1,b,-116,38\n", "s.csv");
    EXPECT_EQ(rep.sites.size(), 1u);
    EXPECT_EQ(rep.skipped.size(), 1u);
}

TEST(Export, ReingestRoundTripsCountKeysDescriptions) {
    auto ds = lqtest::make_dataset({{0, {"NV", "Kg"}, "Granite. granite", box(-117, 38, -116.9, 38.1)},
                                    {1, {"CA", "Pzl"}, "Limestone. limestone", box(-116.9, 38, -116.8, 38.1)}},
                                   geo::Crs::geographic_wgs84);
    // make_dataset only stores DESC; add the key columns as attributes.
    auto meta = ds.metadata();
    std::vector<gd::PolygonRecord> recs(ds.records().begin(), ds.records().end());
    for (auto& r : recs) {
        r.attributes = {{"STATE", r.key[0]}, {"LABEL", r.key[1]}, {"DESC", r.full_desc}};
    }
    meta.key_columns = {"STATE", "LABEL"};
    ds = gd::GeoDataset(meta, recs);
    const auto doc = gd::export_geojson(ds);
    gd::IngestConfig cfg;
    cfg.signature_columns = {"DESC"};
    cfg.key_columns = {"STATE", "LABEL"};
    cfg.min_desc_length = 0;
    const auto back = gd::load_dataset_from_json(std::nullopt, doc, cfg, "roundtrip").dataset;
    ASSERT_EQ(back.count(), ds.count());
    for (std::size_t i = 0; i < ds.count(); ++i) {
        EXPECT_EQ(back.records()[i].key, ds.records()[i].key);
        EXPECT_EQ(back.records()[i].full_desc, ds.records()[i].full_desc);
        EXPECT_NEAR(geo::area(back.records()[i].geometry), geo::area(ds.records()[i].geometry), 1e-12);
    }
}

TEST(Storage, JsonRoundTripKeepsMetadata) {
    auto ds = gd::project_dataset(
        lqtest::make_dataset({{3, {"k"}, "some text", box(-100, 35, -99.5, 35.5)}}, geo::Crs::geographic_wgs84));
    const auto back = gd::from_storage_json(gd::to_storage_json(ds));
    EXPECT_EQ(back.id(), ds.id());
    EXPECT_EQ(back.crs(), ds.crs());
    EXPECT_EQ(back.records()[0].record_id, 3);
    EXPECT_EQ(back.records()[0].full_desc, "some text");
    EXPECT_DOUBLE_EQ(geo::area(back.records()[0].geometry), geo::area(ds.records()[0].geometry));
}
