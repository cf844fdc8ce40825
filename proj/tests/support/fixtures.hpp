#pragma once

#include "lithoquery/evidence.hpp"
#include "lithoquery/geodata.hpp"
#include "lithoquery/geometry.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace lqtest {

namespace lq = lithoquery;
namespace geo = lithoquery::geometry;

// Unique directory removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

void write_file(const std::filesystem::path& path, const std::string& content);

struct RecordSpec {
    lq::geodata::RecordId id = 0;
    std::vector<std::string> key;
    std::string desc;
    geo::MultiPolygon shape;
};

lq::geodata::GeoDataset make_dataset(std::vector<RecordSpec> specs,
                                     geo::Crs crs = geo::Crs::albers_projected,
                                     const std::string& id = "ds-test");

geo::MultiPolygon box(double x0, double y0, double x1, double y1);
geo::LayerGeometry projected(geo::MultiPolygon shape);

// Host/source strip world: 16 adjacent 2000 m x 20000 m strips alternating
// host (Hi) and source (Si). Strip i of each kind carries its query text plus
// i filler tokens, so relevance falls off with i.
struct StripWorld {
    lq::geodata::GeoDataset dataset;
    std::string host_query;
    std::string source_query;
};

inline const char* kHostQuery = "limestones, calcareous to carbonaceous pelites.";
inline const char* kSourceQuery = "tonalite, granodiorite, quartz monzonite and granite.";

StripWorld strip_world(int pairs = 8);

// Sutherland-Hodgman clip of a polygon by a convex clip polygon (both CCW).
using Poly = std::vector<std::pair<double, double>>;
Poly clip_convex(const Poly& subject, const Poly& clip);
double shoelace(const Poly& p);

// Rounded rectangle: the exact outward buffer of an axis-aligned box,
// sampled with `per_quarter` segments per corner arc.
Poly rounded_box(double x0, double y0, double x1, double y1, double r, int per_quarter);

inline double buffered_square_area(double side, double r) {
    return side * side + 4.0 * side * r + 3.14159265358979323846 * r * r;
}

// Distance from a point to an axis-aligned box (0 inside or on the edge).
double box_distance(double x0, double y0, double x1, double y1, double px, double py);

// Scored layer from explicit (record_id, score) pairs.
lq::evidence::ScoredLayer scored(std::vector<std::pair<lq::geodata::RecordId, double>> scores,
                                 const std::string& dataset_id = "ds-test");

// GeoJSON FeatureCollection text of lon/lat boxes with properties.
struct FeatureSpec {
    double lon0, lat0, lon1, lat1;
    std::vector<std::pair<std::string, std::string>> properties;
};
std::string feature_collection(const std::vector<FeatureSpec>& features);

}  // namespace lqtest
