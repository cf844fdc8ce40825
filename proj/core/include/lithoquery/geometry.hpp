#pragma once

// Planar polygon primitives backed by Boost.Geometry. All polygons use
// counter-clockwise exterior rings and explicitly closed rings, matching the
// GeoJSON winding convention.

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/box.hpp>
#include <boost/geometry/geometries/multi_polygon.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>
#include <boost/geometry/geometries/ring.hpp>

#include <span>
#include <string>
#include <vector>

namespace lithoquery::geometry {

namespace bg = boost::geometry;

using Point = bg::model::d2::point_xy<double>;
using Ring = bg::model::ring<Point, false, true>;
using Polygon = bg::model::polygon<Point, false, true>;
using MultiPolygon = bg::model::multi_polygon<Polygon>;
using Box = bg::model::box<Point>;

enum class Crs { geographic_wgs84, albers_projected };

const char* to_string(Crs crs) noexcept;
Crs crs_from_string(const std::string& name);

// A multipolygon tagged with the coordinate system it lives in.
struct LayerGeometry {
    MultiPolygon shape;
    Crs crs = Crs::albers_projected;
};

/// Quarter-circle segment count used when callers do not specify one.
inline constexpr int kDefaultArcSegments = 16;

double area(const MultiPolygon& g);
double area(const Polygon& g);
bool is_empty(const MultiPolygon& g);

MultiPolygon unite(const MultiPolygon& a, const MultiPolygon& b);
MultiPolygon intersect(const MultiPolygon& a, const MultiPolygon& b);

/// Union of many parts by pairwise reduction. Parts whose envelopes do not
/// touch are concatenated instead of passed through the overlay machinery.
MultiPolygon union_all(std::vector<MultiPolygon> parts);

/// Outward buffer with round joins; `arc_segments` segments per quarter circle.
/// A distance of zero returns the input unchanged.
MultiPolygon buffer(const MultiPolygon& g, double distance, int arc_segments);

/// Closed-region containment: points on the boundary are covered.
bool covers(const MultiPolygon& g, const Point& p);
double distance(const MultiPolygon& g, const Point& p);

Box envelope(const MultiPolygon& g);

/// Fixes orientation and closure in place.
void normalize(MultiPolygon& g);

/// Empty string when `poly` is a valid simple polygon, otherwise the reason.
std::string validity_problem(const Polygon& poly);

MultiPolygon make_box(double min_x, double min_y, double max_x, double max_y);

}  // namespace lithoquery::geometry
