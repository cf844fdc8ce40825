#include "fixtures.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>

namespace lqtest {

TempDir::TempDir() {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("lqtest-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
}

geo::MultiPolygon box(double x0, double y0, double x1, double y1) { return geo::make_box(x0, y0, x1, y1); }

geo::LayerGeometry projected(geo::MultiPolygon shape) { return {std::move(shape), geo::Crs::albers_projected}; }

lq::geodata::GeoDataset make_dataset(std::vector<RecordSpec> specs, geo::Crs crs, const std::string& id) {
    lq::geodata::GeoDataset::Metadata meta;
    meta.dataset_id = id;
    meta.crs = crs;
    meta.signature_columns = {"DESC"};
    meta.key_columns = {"KEY"};
    meta.provenance = "test fixture";
    std::vector<lq::geodata::PolygonRecord> records;
    for (auto& s : specs) {
        lq::geodata::PolygonRecord r;
        r.record_id = s.id;
        r.key = s.key.empty() ? std::vector<std::string>{std::to_string(s.id)} : s.key;
        r.attributes = {{"DESC", s.desc}};
        r.geometry = std::move(s.shape);
        r.full_desc = s.desc;
        records.push_back(std::move(r));
    }
    return lq::geodata::GeoDataset(std::move(meta), std::move(records));
}

StripWorld strip_world(int pairs) {
    std::vector<RecordSpec> specs;
    const double w = 2000.0;
    const double h = 20000.0;
    for (int i = 0; i < pairs; ++i) {
        std::string filler;
        for (int f = 0; f < i; ++f) filler += " filler" + std::string(1, static_cast<char>('a' + i)) + std::to_string(f);
        const double x = 2 * i * w;
        specs.push_back({2 * i, {"H" + std::to_string(i)}, kHostQuery + filler, box(x, 0, x + w, h)});
        specs.push_back({2 * i + 1, {"S" + std::to_string(i)}, kSourceQuery + filler, box(x + w, 0, x + 2 * w, h)});
    }
    return {make_dataset(std::move(specs), geo::Crs::albers_projected, "ds-strips"), kHostQuery, kSourceQuery};
}

namespace {

double cross(const std::pair<double, double>& a, const std::pair<double, double>& b,
             const std::pair<double, double>& p) {
    return (b.first - a.first) * (p.second - a.second) - (b.second - a.second) * (p.first - a.first);
}

std::pair<double, double> line_hit(const std::pair<double, double>& p, const std::pair<double, double>& q,
                                   const std::pair<double, double>& a, const std::pair<double, double>& b) {
    const double cp = cross(a, b, p);
    const double cq = cross(a, b, q);
    const double t = cp / (cp - cq);
    return {p.first + t * (q.first - p.first), p.second + t * (q.second - p.second)};
}

}  // namespace

Poly clip_convex(const Poly& subject, const Poly& clip) {
    Poly out = subject;
    for (std::size_t i = 0; i < clip.size() && !out.empty(); ++i) {
        const auto& a = clip[i];
        const auto& b = clip[(i + 1) % clip.size()];
        Poly input;
        input.swap(out);
        for (std::size_t j = 0; j < input.size(); ++j) {
            const auto& p = input[j];
            const auto& q = input[(j + 1) % input.size()];
            const bool p_in = cross(a, b, p) >= 0;
            const bool q_in = cross(a, b, q) >= 0;
            if (p_in) out.push_back(p);
            if (p_in != q_in) out.push_back(line_hit(p, q, a, b));
        }
    }
    return out;
}

double shoelace(const Poly& p) {
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto& a = p[i];
        const auto& b = p[(i + 1) % p.size()];
        s += a.first * b.second - b.first * a.second;
    }
    return s / 2.0;
}

Poly rounded_box(double x0, double y0, double x1, double y1, double r, int per_quarter) {
    // Counter-clockwise: lower right, upper right, upper left, lower left.
    const double cx[] = {x1, x1, x0, x0};
    const double cy[] = {y0, y1, y1, y0};
    Poly out;
    for (int c = 0; c < 4; ++c) {
        const double from = -std::numbers::pi / 2 + c * std::numbers::pi / 2;
        for (int s = 0; s <= per_quarter; ++s) {
            const double t = from + (std::numbers::pi / 2) * s / per_quarter;
            out.emplace_back(cx[c] + r * std::cos(t), cy[c] + r * std::sin(t));
        }
    }
    return out;
}

double box_distance(double x0, double y0, double x1, double y1, double px, double py) {
    const double dx = std::max({x0 - px, 0.0, px - x1});
    const double dy = std::max({y0 - py, 0.0, py - y1});
    return std::hypot(dx, dy);
}

lq::evidence::ScoredLayer scored(std::vector<std::pair<lq::geodata::RecordId, double>> scores,
                                 const std::string& dataset_id) {
    lq::evidence::ScoredLayer out;
    out.layer_id = "sc-test";
    out.dataset_id = dataset_id;
    out.query = "test";
    out.provider_id = "reference";
    std::sort(scores.begin(), scores.end());
    for (const auto& [id, s] : scores) out.scores.push_back({id, s});
    return out;
}

std::string feature_collection(const std::vector<FeatureSpec>& features) {
    nlohmann::ordered_json fc{{"type", "FeatureCollection"}, {"features", nlohmann::ordered_json::array()}};
    for (const auto& f : features) {
        nlohmann::ordered_json props = nlohmann::ordered_json::object();
        for (const auto& [k, v] : f.properties) props[k] = v;
        nlohmann::ordered_json ring = nlohmann::ordered_json::array(
            {{f.lon0, f.lat0}, {f.lon1, f.lat0}, {f.lon1, f.lat1}, {f.lon0, f.lat1}, {f.lon0, f.lat0}});
        fc["features"].push_back({{"type", "Feature"},
                                  {"properties", props},
                                  {"geometry", {{"type", "Polygon"}, {"coordinates", {ring}}}}});
    }
    return fc.dump();
}

}  // namespace lqtest
