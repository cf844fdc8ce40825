#include "lithoquery/projection.hpp"

#include "lithoquery/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lithoquery::projection {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

template <typename Fn>
geometry::MultiPolygon transform(const geometry::MultiPolygon& g, Fn&& fn) {
    geometry::MultiPolygon out = g;
    for (auto& poly : out) {
        for (auto& p : poly.outer()) p = fn(p);
        for (auto& inner : poly.inners())
            for (auto& p : inner) p = fn(p);
    }
    return out;
}

}  // namespace

Albers::Albers(const AlbersParams& params) : params_(params) {
    const double phi1 = params.standard_parallel_1 * kDegToRad;
    const double phi2 = params.standard_parallel_2 * kDegToRad;
    n_ = (std::sin(phi1) + std::sin(phi2)) / 2.0;
    if (std::abs(n_) < 1e-12)
        throw Error(ErrorCode::config, "standard parallels must not be symmetric about the equator");
    c_ = std::cos(phi1) * std::cos(phi1) + 2.0 * n_ * std::sin(phi1);
    const double phi0 = params.latitude_of_origin * kDegToRad;
    rho0_ = params.radius * std::sqrt(c_ - 2.0 * n_ * std::sin(phi0)) / n_;
}

geometry::Point Albers::forward(const geometry::Point& lonlat) const {
    const double lambda = lonlat.x() * kDegToRad;
    const double phi = lonlat.y() * kDegToRad;
    const double rho = params_.radius * std::sqrt(c_ - 2.0 * n_ * std::sin(phi)) / n_;
    const double theta = n_ * (lambda - params_.central_meridian * kDegToRad);
    return {rho * std::sin(theta), rho0_ - rho * std::cos(theta)};
}

geometry::Point Albers::inverse(const geometry::Point& xy) const {
    const double dy = rho0_ - xy.y();
    double rho = std::hypot(xy.x(), dy);
    double theta = 0.0;
    if (n_ > 0) {
        theta = std::atan2(xy.x(), dy);
    } else {
        rho = -rho;
        theta = std::atan2(-xy.x(), -dy);
    }
    const double scaled = rho * n_ / params_.radius;
    double s = (c_ - scaled * scaled) / (2.0 * n_);
    s = std::clamp(s, -1.0, 1.0);
    const double phi = std::asin(s);
    const double lambda = params_.central_meridian * kDegToRad + theta / n_;
    return {lambda / kDegToRad, phi / kDegToRad};
}

geometry::MultiPolygon forward(const Albers& albers, const geometry::MultiPolygon& g) {
    return transform(g, [&](const geometry::Point& p) { return albers.forward(p); });
}

geometry::MultiPolygon inverse(const Albers& albers, const geometry::MultiPolygon& g) {
    return transform(g, [&](const geometry::Point& p) { return albers.inverse(p); });
}

geometry::Ring densify(const geometry::Ring& ring, double max_step_degrees) {
    if (ring.size() < 2 || max_step_degrees <= 0) return ring;
    geometry::Ring out;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const auto& a = ring[i];
        const auto& b = ring[i + 1];
        const double span = std::max(std::abs(b.x() - a.x()), std::abs(b.y() - a.y()));
        const int steps = std::max(1, static_cast<int>(std::ceil(span / max_step_degrees)));
        for (int k = 0; k < steps; ++k) {
            const double t = static_cast<double>(k) / steps;
            out.push_back({a.x() + t * (b.x() - a.x()), a.y() + t * (b.y() - a.y())});
        }
    }
    out.push_back(ring.back());
    return out;
}

}  // namespace lithoquery::projection
