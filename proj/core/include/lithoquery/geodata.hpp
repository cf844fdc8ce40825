#pragma once

#include "lithoquery/geojson.hpp"
#include "lithoquery/geometry.hpp"
#include "lithoquery/projection.hpp"
#include "lithoquery/text.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lithoquery::geodata {

using RecordId = std::int64_t;

const std::vector<std::string>& default_signature_columns();
const std::vector<std::string>& default_key_columns();

struct PolygonRecord {
    RecordId record_id = 0;
    std::vector<std::string> key;
    std::vector<Attribute> attributes;
    geometry::MultiPolygon geometry;
    std::string full_desc;

    const std::string* attribute(std::string_view heading) const;
};

/// Immutable snapshot of polygon records. Copies share storage; every
/// transformation returns a new dataset.
class GeoDataset {
public:
    struct Metadata {
        std::string dataset_id;
        geometry::Crs crs = geometry::Crs::geographic_wgs84;
        projection::AlbersParams albers;  // meaningful when crs is projected
        std::vector<std::string> signature_columns;
        std::vector<std::string> key_columns;
        std::string provenance;
    };

    GeoDataset();
    GeoDataset(Metadata meta, std::vector<PolygonRecord> records);

    const std::string& id() const;
    geometry::Crs crs() const;
    const Metadata& metadata() const;
    std::span<const PolygonRecord> records() const;
    std::size_t count() const;
    bool empty() const;

    /// Index into records() for `id`, if present.
    std::optional<std::size_t> index_of(RecordId id) const;
    const PolygonRecord& record(RecordId id) const;

    /// Same records under new metadata.
    GeoDataset with_metadata(Metadata meta) const;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
};

struct IngestConfig {
    std::string dataset_id;
    std::vector<std::string> signature_columns = default_signature_columns();
    std::vector<std::string> key_columns = default_key_columns();
    std::string join_column = "UNIT_LINK";
    std::size_t min_desc_length = 20;
};

struct IngestReport {
    GeoDataset dataset;
    std::size_t dropped = 0;
    std::vector<std::string> warnings;
};

/// Joins a CSV attribute table to GeoJSON features on `join_column` and
/// builds cleaned descriptions. With an empty `attribute_table_path` the
/// attributes come from the feature properties themselves.
IngestReport load_dataset(const std::filesystem::path& attribute_table_path,
                          const std::filesystem::path& geometry_path, const IngestConfig& config);

IngestReport load_dataset_from_json(const std::optional<std::string>& attribute_csv,
                                    const geojson::Json& features, const IngestConfig& config,
                                    const std::string& provenance);

struct DissolveReport {
    GeoDataset dataset;
    std::vector<std::string> warnings;
};

/// One record per distinct key tuple; geometry is the union of the members,
/// attributes come from the member with the lowest record_id.
DissolveReport dissolve(const GeoDataset& dataset, std::string new_id = {});

GeoDataset project_dataset(const GeoDataset& dataset, const projection::AlbersParams& params = {},
                           std::string new_id = {});

struct FocusArea {
    std::string name;
    geometry::Ring ring;  // geographic coordinates

    /// Throws Error(geometry) unless the ring is closed, has at least four
    /// positions and does not self-intersect. Open rings are closed first.
    static FocusArea make(std::string name, geometry::Ring ring);
    geometry::MultiPolygon polygon() const;
};

FocusArea focus_from_geojson(const std::string& name, const geojson::Json& doc);
geojson::Json focus_to_geojson(const FocusArea& focus);

/// Intersects every record with the focus polygon and drops empty results.
/// For projected datasets the focus ring is densified and projected.
GeoDataset clip_to_focus(const GeoDataset& dataset, const FocusArea& focus, std::string new_id = {});

struct Site {
    std::string site_id;
    std::string name;
    double longitude = 0;
    double latitude = 0;
};

struct SiteSet {
    std::vector<Site> sites;
    std::size_t size() const { return sites.size(); }
    bool empty() const { return sites.empty(); }
};

struct SitesReport {
    SiteSet sites;
    std::vector<std::string> skipped;  // one message per rejected row/feature
};

/// CSV with site_id,name,longitude,latitude or a GeoJSON FeatureCollection of
/// Points. Throws Error(ingest) if no valid site remains.
SitesReport load_sites(const std::filesystem::path& path);
SitesReport parse_sites(std::string_view content, const std::string& source_name);

/// Site positions in the dataset's coordinate system.
std::vector<geometry::Point> site_positions(const SiteSet& sites, const GeoDataset& dataset);

/// Geometry of a dataset record set in WGS84 longitude/latitude.
geometry::MultiPolygon to_wgs84(const geometry::MultiPolygon& g, const GeoDataset::Metadata& meta);

/// FeatureCollection in WGS84; properties carry record_id, every attribute and
/// full_desc so the output can be re-ingested.
geojson::Json export_geojson(const GeoDataset& dataset);

/// Storage form that keeps the native CRS and full metadata.
geojson::Json to_storage_json(const GeoDataset& dataset);
GeoDataset from_storage_json(const geojson::Json& doc);

}  // namespace lithoquery::geodata
