#pragma once

#include "lithoquery/geometry.hpp"

namespace lithoquery::projection {

// Spherical Albers equal-area conic. Defaults reproduce the CONUS
// parameterization (ESRI:102008) on the authalic sphere.
struct AlbersParams {
    double standard_parallel_1 = 29.5;  // degrees
    double standard_parallel_2 = 45.5;
    double latitude_of_origin = 40.0;
    double central_meridian = -96.0;
    double radius = 6371007.181;  // meters

    bool operator==(const AlbersParams&) const = default;
};

class Albers {
public:
    explicit Albers(const AlbersParams& params = {});

    /// (longitude, latitude) in degrees to (x, y) in meters.
    geometry::Point forward(const geometry::Point& lonlat) const;
    geometry::Point inverse(const geometry::Point& xy) const;

    const AlbersParams& params() const { return params_; }

private:
    AlbersParams params_;
    double n_;
    double c_;
    double rho0_;
};

geometry::MultiPolygon forward(const Albers& albers, const geometry::MultiPolygon& g);
geometry::MultiPolygon inverse(const Albers& albers, const geometry::MultiPolygon& g);

/// Inserts vertices so that no edge spans more than `max_step_degrees`; used
/// before projecting graticule-aligned rings whose edges should follow
/// parallels and meridians.
geometry::Ring densify(const geometry::Ring& ring, double max_step_degrees);

}  // namespace lithoquery::projection
