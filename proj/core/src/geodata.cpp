#include "lithoquery/geodata.hpp"

#include "lithoquery/csv.hpp"
#include "lithoquery/error.hpp"
#include "lithoquery/hash.hpp"
#include "lithoquery/io.hpp"
#include "lithoquery/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <unordered_map>

namespace lithoquery::geodata {

using geojson::Json;

const std::vector<std::string>& default_signature_columns() {
    static const std::vector<std::string> columns = {
        "UNIT_NAME", "MAJOR1", "MAJOR2", "MAJOR3", "MINOR1",     "MINOR2",
        "MINOR3",    "MINOR4", "MINOR5", "GENERALIZE", "UNITDESC",
    };
    return columns;
}

const std::vector<std::string>& default_key_columns() {
    static const std::vector<std::string> columns = {"STATE", "ORIG_LABEL", "SGMC_LABEL", "UNIT_LINK"};
    return columns;
}

const std::string* PolygonRecord::attribute(std::string_view heading) const {
    for (const auto& [h, v] : attributes)
        if (h == heading) return &v;
    return nullptr;
}

struct GeoDataset::Impl {
    Metadata meta;
    std::vector<PolygonRecord> records;
    std::unordered_map<RecordId, std::size_t> index;
};

GeoDataset::GeoDataset() : impl_(std::make_shared<Impl>()) {}

const std::string& GeoDataset::id() const { return impl_->meta.dataset_id; }
geometry::Crs GeoDataset::crs() const { return impl_->meta.crs; }
const GeoDataset::Metadata& GeoDataset::metadata() const { return impl_->meta; }
std::span<const PolygonRecord> GeoDataset::records() const { return impl_->records; }
std::size_t GeoDataset::count() const { return impl_->records.size(); }
bool GeoDataset::empty() const { return impl_->records.empty(); }

GeoDataset::GeoDataset(Metadata meta, std::vector<PolygonRecord> records) {
    auto impl = std::make_shared<Impl>();
    impl->meta = std::move(meta);
    impl->records = std::move(records);
    impl->index.reserve(impl->records.size());
    for (std::size_t i = 0; i < impl->records.size(); ++i) {
        auto [it, inserted] = impl->index.emplace(impl->records[i].record_id, i);
        if (!inserted)
            throw Error(ErrorCode::state,
                        "duplicate record_id " + std::to_string(impl->records[i].record_id));
    }
    impl_ = std::move(impl);
}

std::optional<std::size_t> GeoDataset::index_of(RecordId id) const {
    auto it = impl_->index.find(id);
    if (it == impl_->index.end()) return std::nullopt;
    return it->second;
}

const PolygonRecord& GeoDataset::record(RecordId record_id) const {
    auto idx = index_of(record_id);
    if (!idx)
        throw Error(ErrorCode::not_found, "no record " + std::to_string(record_id) + " in " + id());
    return impl_->records[*idx];
}

GeoDataset GeoDataset::with_metadata(Metadata meta) const {
    auto impl = std::make_shared<Impl>(*impl_);
    impl->meta = std::move(meta);
    GeoDataset out;
    out.impl_ = std::move(impl);
    return out;
}

namespace {

const std::set<std::string, std::less<>> kReservedProperties = {"record_id", "full_desc", "score",
                                                                "rank", "layer_id"};

std::string property_text(const Json& value) {
    if (value.is_null()) return {};
    if (value.is_string()) return value.get<std::string>();
    return value.dump();
}

std::string config_fingerprint(const IngestConfig& config) {
    std::string out;
    for (const auto& c : config.signature_columns) out += c + ",";
    out += "|";
    for (const auto& c : config.key_columns) out += c + ",";
    out += "|" + config.join_column + "|" + std::to_string(config.min_desc_length);
    return out;
}

}  // namespace

IngestReport load_dataset_from_json(const std::optional<std::string>& attribute_csv,
                                    const Json& features_doc, const IngestConfig& config,
                                    const std::string& provenance) {
    IngestReport report;
    auto features = geojson::read_polygon_features(features_doc);
    report.warnings = std::move(features.warnings);

    std::optional<csv::Table> table;
    std::unordered_map<std::string, std::size_t> row_by_join;
    if (attribute_csv) {
        table = csv::parse(*attribute_csv);
        auto require = [&](const std::string& column) {
            if (!table->column(column))
                throw Error(ErrorCode::config, "attribute table has no column '" + column + "'");
        };
        require(config.join_column);
        for (const auto& c : config.signature_columns) require(c);
        for (const auto& c : config.key_columns) require(c);
        const std::size_t join_idx = *table->column(config.join_column);
        for (std::size_t r = 0; r < table->rows.size(); ++r) {
            auto [it, inserted] = row_by_join.emplace(table->rows[r].fields[join_idx], r);
            if (!inserted)
                report.warnings.push_back("CSV line " + std::to_string(table->rows[r].line) +
                                          ": duplicate join id '" + it->first + "' ignored");
        }
    } else {
        std::set<std::string, std::less<>> seen;
        for (const auto& f : features.features)
            for (const auto& [k, v] : f.properties.items()) seen.insert(k);
        for (const auto* list : {&config.signature_columns, &config.key_columns})
            for (const auto& c : *list)
                if (!seen.contains(c))
                    throw Error(ErrorCode::config, "no feature carries property '" + c + "'");
    }

    std::vector<PolygonRecord> records;
    records.reserve(features.features.size());
    for (auto& f : features.features) {
        PolygonRecord rec;
        rec.record_id = static_cast<RecordId>(f.index);
        if (table) {
            if (!f.properties.contains(config.join_column) || f.properties[config.join_column].is_null())
                throw Error(ErrorCode::ingest, "feature " + std::to_string(f.index) + ": missing join id '" +
                                                   config.join_column + "'");
            const auto join_value = property_text(f.properties[config.join_column]);
            auto it = row_by_join.find(join_value);
            if (it == row_by_join.end())
                throw Error(ErrorCode::ingest, "feature " + std::to_string(f.index) + ": join id '" +
                                                   join_value + "' has no attribute row");
            const auto& row = table->rows[it->second];
            for (std::size_t c = 0; c < table->header.size(); ++c)
                rec.attributes.emplace_back(table->header[c], row.fields[c]);
        } else {
            for (const auto& [k, v] : f.properties.items())
                if (!kReservedProperties.contains(k)) rec.attributes.emplace_back(k, property_text(v));
        }
        for (const auto& column : config.key_columns) {
            const auto* value = rec.attribute(column);
            rec.key.push_back(value ? *value : std::string());
        }
        rec.full_desc = clean_description(build_description(rec.attributes, config.signature_columns));
        if (rec.full_desc.empty() || rec.full_desc.size() < config.min_desc_length) {
            ++report.dropped;
            continue;
        }
        rec.geometry = std::move(f.geometry);
        records.push_back(std::move(rec));
    }

    GeoDataset::Metadata meta;
    meta.dataset_id = config.dataset_id.empty()
                          ? stable_id("ds-", provenance + "|" + config_fingerprint(config))
                          : config.dataset_id;
    meta.crs = geometry::Crs::geographic_wgs84;
    meta.signature_columns = config.signature_columns;
    meta.key_columns = config.key_columns;
    meta.provenance = provenance;
    report.dataset = GeoDataset(std::move(meta), std::move(records));
    return report;
}

IngestReport load_dataset(const std::filesystem::path& attribute_table_path,
                          const std::filesystem::path& geometry_path, const IngestConfig& config) {
    std::optional<std::string> csv_text;
    std::string provenance = "geometry=" + geometry_path.string();
    if (!attribute_table_path.empty()) {
        csv_text = io::read_text(attribute_table_path);
        provenance = "attributes=" + attribute_table_path.string() + ";" + provenance;
    }
    return load_dataset_from_json(csv_text, geojson::read_file(geometry_path), config, provenance);
}

DissolveReport dissolve(const GeoDataset& dataset, std::string new_id) {
    DissolveReport report;
    std::vector<const PolygonRecord*> ordered;
    ordered.reserve(dataset.count());
    for (const auto& r : dataset.records()) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(),
              [](const auto* a, const auto* b) { return a->record_id < b->record_id; });

    // Groups in order of their lowest member record_id.
    std::map<std::vector<std::string>, std::size_t> group_of;
    std::vector<std::vector<const PolygonRecord*>> groups;
    for (const auto* r : ordered) {
        auto [it, inserted] = group_of.emplace(r->key, groups.size());
        if (inserted) groups.emplace_back();
        groups[it->second].push_back(r);
    }

    std::vector<PolygonRecord> out(groups.size());
    parallel_for(groups.size(), [&](std::size_t g) {
        const auto& members = groups[g];
        PolygonRecord rec = *members.front();
        rec.record_id = static_cast<RecordId>(g);
        std::vector<geometry::MultiPolygon> parts;
        parts.reserve(members.size());
        for (const auto* m : members) parts.push_back(m->geometry);
        rec.geometry = geometry::union_all(std::move(parts));
        out[g] = std::move(rec);
    });
    for (const auto& members : groups) {
        for (const auto* m : members) {
            if (m->full_desc != members.front()->full_desc) {
                std::string key;
                for (const auto& k : members.front()->key) key += (key.empty() ? "" : "/") + k;
                report.warnings.push_back("records with key " + key +
                                          " have differing descriptions; kept record " +
                                          std::to_string(members.front()->record_id));
                break;
            }
        }
    }

    auto meta = dataset.metadata();
    meta.dataset_id = new_id.empty() ? stable_id("ds-", dataset.id() + "|dissolve") : std::move(new_id);
    meta.provenance += (meta.provenance.empty() ? "" : "; ") + std::string("dissolved");
    report.dataset = GeoDataset(std::move(meta), std::move(out));
    return report;
}

GeoDataset project_dataset(const GeoDataset& dataset, const projection::AlbersParams& params,
                           std::string new_id) {
    if (dataset.crs() != geometry::Crs::geographic_wgs84)
        throw Error(ErrorCode::state, "dataset " + dataset.id() + " is already projected");
    const projection::Albers albers(params);
    std::vector<PolygonRecord> records(dataset.records().begin(), dataset.records().end());
    for (auto& r : records) {
        r.geometry = projection::forward(albers, r.geometry);
        geometry::normalize(r.geometry);
    }
    auto meta = dataset.metadata();
    meta.dataset_id = new_id.empty() ? stable_id("ds-", dataset.id() + "|project") : std::move(new_id);
    meta.crs = geometry::Crs::albers_projected;
    meta.albers = params;
    meta.provenance += (meta.provenance.empty() ? "" : "; ") + std::string("projected");
    return GeoDataset(std::move(meta), std::move(records));
}

FocusArea FocusArea::make(std::string name, geometry::Ring ring) {
    if (!ring.empty() && !geometry::bg::equals(ring.front(), ring.back())) ring.push_back(ring.front());
    if (ring.size() < 4)
        throw Error(ErrorCode::geometry, "focus area '" + name + "' needs at least 3 distinct vertices");
    geometry::Polygon poly;
    poly.outer() = ring;
    geometry::bg::correct(poly);
    if (auto problem = geometry::validity_problem(poly); !problem.empty())
        throw Error(ErrorCode::geometry, "focus area '" + name + "' is invalid: " + problem);
    return FocusArea{std::move(name), std::move(poly.outer())};
}

geometry::MultiPolygon FocusArea::polygon() const {
    geometry::Polygon poly;
    poly.outer() = ring;
    return geometry::MultiPolygon{poly};
}

FocusArea focus_from_geojson(const std::string& name, const Json& doc) {
    Json geom = doc;
    if (doc.value("type", "") == "FeatureCollection") {
        if (doc["features"].size() != 1)
            throw Error(ErrorCode::geometry, "focus area must contain exactly one feature");
        geom = doc["features"][0]["geometry"];
    } else if (doc.value("type", "") == "Feature") {
        geom = doc["geometry"];
    }
    if (geom.value("type", "") != "Polygon" || !geom["coordinates"].is_array() ||
        geom["coordinates"].size() != 1)
        throw Error(ErrorCode::geometry, "focus area must be a single-ring Polygon");
    geometry::Ring ring;
    for (const auto& pos : geom["coordinates"][0]) {
        if (!pos.is_array() || pos.size() < 2)
            throw Error(ErrorCode::geometry, "focus area has a malformed position");
        ring.push_back({pos[0].get<double>(), pos[1].get<double>()});
    }
    return FocusArea::make(name, std::move(ring));
}

Json focus_to_geojson(const FocusArea& focus) {
    Json ring = Json::array();
    for (const auto& p : focus.ring) ring.push_back(Json::array({p.x(), p.y()}));
    return Json{{"type", "Feature"},
                {"properties", {{"name", focus.name}}},
                {"geometry", {{"type", "Polygon"}, {"coordinates", Json::array({ring})}}}};
}

GeoDataset clip_to_focus(const GeoDataset& dataset, const FocusArea& focus, std::string new_id) {
    auto checked = FocusArea::make(focus.name, focus.ring);
    geometry::MultiPolygon mask = checked.polygon();
    if (dataset.crs() == geometry::Crs::albers_projected) {
        geometry::Polygon dense;
        dense.outer() = projection::densify(checked.ring, 0.05);
        mask = projection::forward(projection::Albers(dataset.metadata().albers), geometry::MultiPolygon{dense});
        geometry::normalize(mask);
    }

    std::vector<std::optional<PolygonRecord>> clipped(dataset.count());
    parallel_for(dataset.count(), [&](std::size_t i) {
        const auto& rec = dataset.records()[i];
        auto g = geometry::intersect(rec.geometry, mask);
        if (geometry::is_empty(g) || geometry::area(g) <= 0.0) return;
        PolygonRecord out = rec;
        out.geometry = std::move(g);
        clipped[i] = std::move(out);
    });
    std::vector<PolygonRecord> records;
    for (auto& r : clipped)
        if (r) records.push_back(std::move(*r));

    auto meta = dataset.metadata();
    meta.dataset_id = new_id.empty() ? stable_id("ds-", dataset.id() + "|clip|" + focus.name) : std::move(new_id);
    meta.provenance += (meta.provenance.empty() ? "" : "; ") + ("clipped to " + focus.name);
    return GeoDataset(std::move(meta), std::move(records));
}

namespace {

std::optional<double> parse_double(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return value;
}

bool in_range(double lon, double lat) {
    return lon >= -180.0 && lon <= 180.0 && lat >= -90.0 && lat <= 90.0;
}

}  // namespace

SitesReport parse_sites(std::string_view content, const std::string& source_name) {
    SitesReport report;
    std::set<std::string, std::less<>> ids;
    auto accept = [&](Site site, const std::string& where) {
        if (!in_range(site.longitude, site.latitude)) {
            report.skipped.push_back(where + ": coordinates out of range");
            return;
        }
        if (!ids.insert(site.site_id).second) {
            report.skipped.push_back(where + ": duplicate site_id '" + site.site_id + "'");
            return;
        }
        report.sites.sites.push_back(std::move(site));
    };

    const auto first = content.find_first_not_of(" \t\r\n");
    if (first != std::string_view::npos && content[first] == '{') {
        const Json doc = geojson::parse(content, source_name);
        if (doc.value("type", "") != "FeatureCollection" || !doc["features"].is_array())
            throw Error(ErrorCode::parse, source_name + ": expected a FeatureCollection of Points");
        const auto& features = doc["features"];
        for (std::size_t i = 0; i < features.size(); ++i) {
            const std::string where = "feature " + std::to_string(i);
            const auto& f = features[i];
            const auto& geom = f.contains("geometry") ? f["geometry"] : Json();
            if (!geom.is_object() || geom.value("type", "") != "Point") {
                report.skipped.push_back(where + ": geometry is not a Point");
                continue;
            }
            const auto& c = geom["coordinates"];
            if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number()) {
                report.skipped.push_back(where + ": malformed Point coordinates");
                continue;
            }
            Site site;
            const Json props = f.contains("properties") && f["properties"].is_object() ? f["properties"]
                                                                                         : Json::object();
            if (props.contains("site_id")) site.site_id = property_text(props["site_id"]);
            else if (f.contains("id")) site.site_id = property_text(f["id"]);
            else site.site_id = std::to_string(i);
            if (props.contains("name")) site.name = property_text(props["name"]);
            site.longitude = c[0].get<double>();
            site.latitude = c[1].get<double>();
            accept(std::move(site), where);
        }
    } else {
        const auto table = csv::parse(content);
        const auto id_col = table.column("site_id");
        const auto name_col = table.column("name");
        const auto lon_col = table.column("longitude");
        const auto lat_col = table.column("latitude");
        if (!id_col || !lon_col || !lat_col)
            throw Error(ErrorCode::config, source_name + ": sites CSV needs site_id, longitude, latitude columns");
        for (const auto& row : table.rows) {
            const std::string where = "line " + std::to_string(row.line);
            const auto lon = parse_double(row.fields[*lon_col]);
            const auto lat = parse_double(row.fields[*lat_col]);
            if (!lon || !lat) {
                report.skipped.push_back(where + ": non-numeric coordinates");
                continue;
            }
            if (row.fields[*id_col].empty()) {
                report.skipped.push_back(where + ": empty site_id");
                continue;
            }
            accept(Site{row.fields[*id_col], name_col ? row.fields[*name_col] : std::string(), *lon, *lat},
                   where);
        }
    }
    if (report.sites.empty())
        throw Error(ErrorCode::ingest, source_name + ": no valid sites");
    return report;
}

SitesReport load_sites(const std::filesystem::path& path) {
    return parse_sites(io::read_text(path), path.string());
}

std::vector<geometry::Point> site_positions(const SiteSet& sites, const GeoDataset& dataset) {
    std::vector<geometry::Point> out;
    out.reserve(sites.size());
    if (dataset.crs() == geometry::Crs::albers_projected) {
        const projection::Albers albers(dataset.metadata().albers);
        for (const auto& s : sites.sites) out.push_back(albers.forward({s.longitude, s.latitude}));
    } else {
        for (const auto& s : sites.sites) out.push_back({s.longitude, s.latitude});
    }
    return out;
}

geometry::MultiPolygon to_wgs84(const geometry::MultiPolygon& g, const GeoDataset::Metadata& meta) {
    if (meta.crs == geometry::Crs::geographic_wgs84) return g;
    auto out = projection::inverse(projection::Albers(meta.albers), g);
    geometry::normalize(out);
    return out;
}

Json export_geojson(const GeoDataset& dataset) {
    std::vector<Json> features;
    features.reserve(dataset.count());
    for (const auto& r : dataset.records()) {
        Json props = Json::object();
        props["record_id"] = r.record_id;
        for (const auto& [h, v] : r.attributes) props[h] = v;
        props["full_desc"] = r.full_desc;
        features.push_back(geojson::make_feature(std::move(props), to_wgs84(r.geometry, dataset.metadata())));
    }
    return geojson::make_collection(std::move(features));
}

Json to_storage_json(const GeoDataset& dataset) {
    const auto& m = dataset.metadata();
    Json meta{{"dataset_id", m.dataset_id},
              {"crs", geometry::to_string(m.crs)},
              {"albers",
               {{"standard_parallel_1", m.albers.standard_parallel_1},
                {"standard_parallel_2", m.albers.standard_parallel_2},
                {"latitude_of_origin", m.albers.latitude_of_origin},
                {"central_meridian", m.albers.central_meridian},
                {"radius", m.albers.radius}}},
              {"signature_columns", m.signature_columns},
              {"key_columns", m.key_columns},
              {"provenance", m.provenance},
              {"count", dataset.count()}};
    std::vector<Json> features;
    features.reserve(dataset.count());
    for (const auto& r : dataset.records()) {
        Json attrs = Json::array();
        for (const auto& [h, v] : r.attributes) attrs.push_back(Json::array({h, v}));
        Json props{{"record_id", r.record_id}, {"key", r.key}, {"attributes", std::move(attrs)},
                   {"full_desc", r.full_desc}};
        features.push_back(geojson::make_feature(std::move(props), r.geometry));
    }
    Json doc = geojson::make_collection(std::move(features));
    doc["dataset"] = std::move(meta);
    return doc;
}

GeoDataset from_storage_json(const Json& doc) {
    if (!doc.contains("dataset")) throw Error(ErrorCode::parse, "stored dataset lacks metadata");
    const auto& m = doc["dataset"];
    GeoDataset::Metadata meta;
    meta.dataset_id = m["dataset_id"].get<std::string>();
    meta.crs = geometry::crs_from_string(m["crs"].get<std::string>());
    const auto& a = m["albers"];
    meta.albers = {a["standard_parallel_1"].get<double>(), a["standard_parallel_2"].get<double>(),
                   a["latitude_of_origin"].get<double>(), a["central_meridian"].get<double>(),
                   a["radius"].get<double>()};
    meta.signature_columns = m["signature_columns"].get<std::vector<std::string>>();
    meta.key_columns = m["key_columns"].get<std::vector<std::string>>();
    meta.provenance = m.value("provenance", "");
    std::vector<PolygonRecord> records;
    records.reserve(doc["features"].size());
    for (const auto& f : doc["features"]) {
        const auto& p = f["properties"];
        PolygonRecord r;
        r.record_id = p["record_id"].get<RecordId>();
        r.key = p["key"].get<std::vector<std::string>>();
        for (const auto& pair : p["attributes"])
            r.attributes.emplace_back(pair[0].get<std::string>(), pair[1].get<std::string>());
        r.full_desc = p["full_desc"].get<std::string>();
        r.geometry = geojson::read_multipolygon_trusted(f["geometry"]);
        records.push_back(std::move(r));
    }
    return GeoDataset(std::move(meta), std::move(records));
}

}  // namespace lithoquery::geodata
