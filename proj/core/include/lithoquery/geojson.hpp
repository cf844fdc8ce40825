#pragma once

#include "lithoquery/geometry.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lithoquery::geojson {

using Json = nlohmann::ordered_json;

struct PolygonFeature {
    std::size_t index = 0;  // position in the source FeatureCollection
    Json properties = Json::object();
    geometry::MultiPolygon geometry;
};

struct PolygonFeatures {
    std::vector<PolygonFeature> features;
    std::vector<std::string> warnings;
};

/// Parses JSON text; syntax errors become Error(parse) carrying the byte offset.
Json parse(std::string_view text, const std::string& source_name);
Json read_file(const std::filesystem::path& path);

/// Reads every Polygon/MultiPolygon feature of a FeatureCollection. Open rings
/// are closed with a warning; short or self-intersecting rings raise
/// Error(ingest) naming the feature index.
PolygonFeatures read_polygon_features(const Json& doc);

/// Geometry-only view of a FeatureCollection, Feature or bare geometry:
/// the union of every polygonal part.
geometry::MultiPolygon read_area(const Json& doc);

geometry::MultiPolygon read_multipolygon(const Json& geometry, std::size_t feature_index,
                                         std::vector<std::string>* warnings);

Json to_geometry(const geometry::MultiPolygon& g);
Json make_feature(Json properties, const geometry::MultiPolygon& g);
Json make_collection(std::vector<Json> features);

}  // namespace lithoquery::geojson

namespace lithoquery::geojson {

/// Reads coordinates without validation; for files this library wrote itself.
geometry::MultiPolygon read_multipolygon_trusted(const Json& geometry);

}  // namespace lithoquery::geojson
