#include "lithoquery/geojson.hpp"

#include "lithoquery/error.hpp"
#include "lithoquery/io.hpp"

namespace lithoquery::geojson {

namespace {

std::string where(std::size_t feature_index) {
    return "feature " + std::to_string(feature_index);
}

geometry::Point read_position(const Json& pos, std::size_t feature_index) {
    if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number())
        throw Error(ErrorCode::ingest, where(feature_index) + ": malformed position");
    return {pos[0].get<double>(), pos[1].get<double>()};
}

geometry::Ring read_ring(const Json& coords, std::size_t feature_index,
                         std::vector<std::string>* warnings) {
    if (!coords.is_array())
        throw Error(ErrorCode::ingest, where(feature_index) + ": ring is not an array");
    geometry::Ring ring;
    ring.reserve(coords.size() + 1);
    for (const auto& pos : coords) ring.push_back(read_position(pos, feature_index));
    if (!ring.empty() && !geometry::bg::equals(ring.front(), ring.back())) {
        ring.push_back(ring.front());
        if (warnings) warnings->push_back(where(feature_index) + ": closed an open ring");
    }
    if (ring.size() < 4)
        throw Error(ErrorCode::ingest,
                    where(feature_index) + ": ring has fewer than 4 positions");
    return ring;
}

geometry::Polygon read_polygon(const Json& rings, std::size_t feature_index,
                               std::vector<std::string>* warnings) {
    if (!rings.is_array() || rings.empty())
        throw Error(ErrorCode::ingest, where(feature_index) + ": polygon without rings");
    geometry::Polygon poly;
    poly.outer() = read_ring(rings[0], feature_index, warnings);
    for (std::size_t i = 1; i < rings.size(); ++i) {
        auto hole = read_ring(rings[i], feature_index, warnings);
        poly.inners().emplace_back(hole.begin(), hole.end());
    }
    geometry::bg::correct(poly);
    if (auto problem = geometry::validity_problem(poly); !problem.empty())
        throw Error(ErrorCode::ingest, where(feature_index) + ": invalid polygon (" + problem + ")");
    return poly;
}

}  // namespace

Json parse(std::string_view text, const std::string& source_name) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::parse, source_name + ": JSON syntax error at byte " +
                                          std::to_string(e.byte) + ": " + e.what());
    }
}

Json read_file(const std::filesystem::path& path) {
    return parse(io::read_text(path), path.string());
}

geometry::MultiPolygon read_multipolygon(const Json& geom, std::size_t feature_index,
                                         std::vector<std::string>* warnings) {
    if (!geom.is_object() || !geom.contains("type"))
        throw Error(ErrorCode::ingest, where(feature_index) + ": missing geometry");
    const auto type = geom["type"].get<std::string>();
    const Json& coords = geom.contains("coordinates") ? geom["coordinates"] : Json();
    geometry::MultiPolygon out;
    if (type == "Polygon") {
        out.push_back(read_polygon(coords, feature_index, warnings));
        return out;
    }
    if (type == "MultiPolygon") {
        if (!coords.is_array())
            throw Error(ErrorCode::ingest, where(feature_index) + ": malformed MultiPolygon");
        for (const auto& rings : coords) out.push_back(read_polygon(rings, feature_index, warnings));
        std::string reason;
        if (out.size() > 1 && !geometry::bg::is_valid(out, reason)) {
            // Overlapping members: replace by their union.
            std::vector<geometry::MultiPolygon> parts;
            for (auto& p : out) parts.push_back(geometry::MultiPolygon{p});
            out = geometry::union_all(std::move(parts));
            if (warnings)
                warnings->push_back(where(feature_index) + ": merged overlapping MultiPolygon members");
        }
        return out;
    }
    throw Error(ErrorCode::ingest, where(feature_index) + ": unsupported geometry type " + type);
}

PolygonFeatures read_polygon_features(const Json& doc) {
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
        !doc.contains("features") || !doc["features"].is_array())
        throw Error(ErrorCode::parse, "expected a GeoJSON FeatureCollection");
    PolygonFeatures out;
    const auto& features = doc["features"];
    out.features.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto& f = features[i];
        if (!f.is_object() || !f.contains("geometry"))
            throw Error(ErrorCode::ingest, where(i) + ": not a Feature");
        PolygonFeature pf;
        pf.index = i;
        if (f.contains("properties") && f["properties"].is_object()) pf.properties = f["properties"];
        pf.geometry = read_multipolygon(f["geometry"], i, &out.warnings);
        out.features.push_back(std::move(pf));
    }
    return out;
}

geometry::MultiPolygon read_area(const Json& doc) {
    if (!doc.is_object()) throw Error(ErrorCode::parse, "expected a GeoJSON object");
    const auto type = doc.value("type", "");
    if (type == "FeatureCollection") {
        std::vector<geometry::MultiPolygon> parts;
        for (auto& f : read_polygon_features(doc).features) parts.push_back(std::move(f.geometry));
        return geometry::union_all(std::move(parts));
    }
    if (type == "Feature") return read_multipolygon(doc["geometry"], 0, nullptr);
    return read_multipolygon(doc, 0, nullptr);
}

Json to_geometry(const geometry::MultiPolygon& g) {
    auto ring_json = [](const auto& ring) {
        Json r = Json::array();
        for (const auto& p : ring) r.push_back(Json::array({p.x(), p.y()}));
        return r;
    };
    Json coords = Json::array();
    for (const auto& poly : g) {
        Json rings = Json::array();
        rings.push_back(ring_json(poly.outer()));
        for (const auto& inner : poly.inners()) rings.push_back(ring_json(inner));
        coords.push_back(std::move(rings));
    }
    return Json{{"type", "MultiPolygon"}, {"coordinates", std::move(coords)}};
}

Json make_feature(Json properties, const geometry::MultiPolygon& g) {
    return Json{{"type", "Feature"}, {"properties", std::move(properties)}, {"geometry", to_geometry(g)}};
}

Json make_collection(std::vector<Json> features) {
    Json fc{{"type", "FeatureCollection"}, {"features", Json::array()}};
    for (auto& f : features) fc["features"].push_back(std::move(f));
    return fc;
}

}  // namespace lithoquery::geojson

namespace lithoquery::geojson {

geometry::MultiPolygon read_multipolygon_trusted(const Json& geom) {
    auto read_rings = [](const Json& rings, geometry::Polygon& poly) {
        bool first = true;
        for (const auto& ring : rings) {
            geometry::Ring r;
            r.reserve(ring.size());
            for (const auto& pos : ring) r.push_back({pos[0].get<double>(), pos[1].get<double>()});
            if (first) {
                poly.outer() = std::move(r);
                first = false;
            } else {
                poly.inners().emplace_back(r.begin(), r.end());
            }
        }
    };
    geometry::MultiPolygon out;
    const auto type = geom.value("type", "");
    if (type == "Polygon") {
        out.emplace_back();
        read_rings(geom["coordinates"], out.back());
    } else if (type == "MultiPolygon") {
        for (const auto& rings : geom["coordinates"]) {
            out.emplace_back();
            read_rings(rings, out.back());
        }
    } else {
        throw Error(ErrorCode::parse, "stored geometry has unsupported type '" + type + "'");
    }
    return out;
}

}  // namespace lithoquery::geojson
