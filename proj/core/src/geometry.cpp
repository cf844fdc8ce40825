#include "lithoquery/geometry.hpp"

#include "lithoquery/error.hpp"

#include <algorithm>

namespace lithoquery::geometry {

const char* to_string(Crs crs) noexcept {
    switch (crs) {
        case Crs::geographic_wgs84: return "geographic-wgs84";
        case Crs::albers_projected: return "albers-conic-projected";
    }
    return "unknown";
}

Crs crs_from_string(const std::string& name) {
    if (name == "geographic-wgs84") return Crs::geographic_wgs84;
    if (name == "albers-conic-projected") return Crs::albers_projected;
    throw Error(ErrorCode::parse, "unknown CRS '" + name + "'");
}

double area(const MultiPolygon& g) { return bg::area(g); }

double area(const Polygon& g) { return bg::area(g); }

bool is_empty(const MultiPolygon& g) {
    return std::all_of(g.begin(), g.end(),
                       [](const Polygon& p) { return p.outer().empty(); });
}

namespace {

bool envelopes_disjoint(const MultiPolygon& a, const MultiPolygon& b) {
    if (a.empty() || b.empty()) return true;
    return bg::disjoint(envelope(a), envelope(b));
}

MultiPolygon concat(const MultiPolygon& a, const MultiPolygon& b) {
    MultiPolygon out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

}  // namespace

MultiPolygon unite(const MultiPolygon& a, const MultiPolygon& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    if (envelopes_disjoint(a, b)) return concat(a, b);
    MultiPolygon out;
    bg::union_(a, b, out);
    return out;
}

MultiPolygon intersect(const MultiPolygon& a, const MultiPolygon& b) {
    MultiPolygon out;
    if (envelopes_disjoint(a, b)) return out;

    // Drop members that cannot reach the other operand before overlaying.
    const Box box_a = envelope(a);
    const Box box_b = envelope(b);
    MultiPolygon lhs;
    MultiPolygon rhs;
    for (const auto& p : a)
        if (!bg::disjoint(bg::return_envelope<Box>(p), box_b)) lhs.push_back(p);
    for (const auto& p : b)
        if (!bg::disjoint(bg::return_envelope<Box>(p), box_a)) rhs.push_back(p);
    if (lhs.empty() || rhs.empty()) return out;

    bg::intersection(lhs, rhs, out);
    return out;
}

MultiPolygon union_all(std::vector<MultiPolygon> parts) {
    std::erase_if(parts, [](const MultiPolygon& m) { return m.empty(); });
    if (parts.empty()) return {};
    while (parts.size() > 1) {
        std::vector<MultiPolygon> next;
        next.reserve((parts.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < parts.size(); i += 2)
            next.push_back(unite(parts[i], parts[i + 1]));
        if (parts.size() % 2 == 1) next.push_back(std::move(parts.back()));
        parts = std::move(next);
    }
    return std::move(parts.front());
}

MultiPolygon buffer(const MultiPolygon& g, double distance, int arc_segments) {
    if (distance < 0.0)
        throw Error(ErrorCode::input, "buffer distance must be non-negative");
    if (arc_segments < 4)
        throw Error(ErrorCode::input, "arc_segments must be at least 4");
    if (distance == 0.0 || g.empty()) return g;

    namespace bs = bg::strategy::buffer;
    const int points_per_circle = 4 * arc_segments;
    MultiPolygon out;
    bg::buffer(g, out, bs::distance_symmetric<double>(distance), bs::side_straight(),
               bs::join_round(points_per_circle), bs::end_round(points_per_circle),
               bs::point_circle(points_per_circle));
    return out;
}

bool covers(const MultiPolygon& g, const Point& p) { return bg::covered_by(p, g); }

double distance(const MultiPolygon& g, const Point& p) { return bg::distance(p, g); }

Box envelope(const MultiPolygon& g) { return bg::return_envelope<Box>(g); }

void normalize(MultiPolygon& g) { bg::correct(g); }

std::string validity_problem(const Polygon& poly) {
    std::string message;
    if (bg::is_valid(poly, message)) return {};
    return message;
}

MultiPolygon make_box(double min_x, double min_y, double max_x, double max_y) {
    Polygon p;
    p.outer() = {{min_x, min_y}, {max_x, min_y}, {max_x, max_y}, {min_x, max_y}, {min_x, min_y}};
    return MultiPolygon{p};
}

}  // namespace lithoquery::geometry
