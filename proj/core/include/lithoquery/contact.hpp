#pragma once

#include "lithoquery/geometry.hpp"

#include <span>
#include <string>
#include <vector>

namespace lithoquery::contact {

struct ContactParams {
    double r1 = 500.0;  // meters, applied to every input layer
    double r2 = 500.0;  // meters, applied to the intersection
    int arc_segments = geometry::kDefaultArcSegments;

    void validate() const;
};

enum class DerivedKind { buffered, intersected, contact };

const char* to_string(DerivedKind kind) noexcept;

struct DerivedLayer {
    std::string layer_id;
    std::vector<std::string> input_layer_ids;
    ContactParams params;
    geometry::LayerGeometry geometry;
    DerivedKind kind = DerivedKind::contact;
};

/// Intermediate geometries of a contact derivation, in pipeline order.
struct ContactStages {
    std::vector<geometry::LayerGeometry> buffered;
    geometry::LayerGeometry intersected;
};

/// Throws Error(state) unless the geometry is in a projected CRS.
geometry::LayerGeometry buffer_layer(const geometry::LayerGeometry& layer, double r, int arc_segments);

/// Throws Error(state) when the CRSs differ.
geometry::LayerGeometry intersect_layers(const geometry::LayerGeometry& a, const geometry::LayerGeometry& b);

/// Buffers each layer by r1, intersects them left to right, and buffers the
/// result by r2. `input_layer_ids` is recorded on the result when given.
DerivedLayer find_contact(std::span<const geometry::LayerGeometry> layers, const ContactParams& params,
                          std::vector<std::string> input_layer_ids = {}, ContactStages* stages = nullptr);

}  // namespace lithoquery::contact
