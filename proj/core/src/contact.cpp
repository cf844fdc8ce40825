#include "lithoquery/contact.hpp"

#include "lithoquery/error.hpp"
#include "lithoquery/hash.hpp"
#include "lithoquery/parallel.hpp"

#include <cmath>
#include <sstream>

namespace lithoquery::contact {

void ContactParams::validate() const {
    if (!(r1 >= 0.0) || !std::isfinite(r1)) throw Error(ErrorCode::input, "r1 must be a non-negative distance");
    if (!(r2 >= 0.0) || !std::isfinite(r2)) throw Error(ErrorCode::input, "r2 must be a non-negative distance");
    if (arc_segments < 4) throw Error(ErrorCode::input, "arc_segments must be at least 4");
}

const char* to_string(DerivedKind kind) noexcept {
    switch (kind) {
        case DerivedKind::buffered: return "buffered";
        case DerivedKind::intersected: return "intersected";
        case DerivedKind::contact: return "contact";
    }
    return "unknown";
}

geometry::LayerGeometry buffer_layer(const geometry::LayerGeometry& layer, double r, int arc_segments) {
    if (layer.crs != geometry::Crs::albers_projected)
        throw Error(ErrorCode::state, "buffering needs projected coordinates; project first");
    return {geometry::buffer(layer.shape, r, arc_segments), layer.crs};
}

geometry::LayerGeometry intersect_layers(const geometry::LayerGeometry& a, const geometry::LayerGeometry& b) {
    if (a.crs != b.crs)
        throw Error(ErrorCode::state, std::string("cannot intersect ") + geometry::to_string(a.crs) + " with " +
                                          geometry::to_string(b.crs));
    return {geometry::intersect(a.shape, b.shape), a.crs};
}

DerivedLayer find_contact(std::span<const geometry::LayerGeometry> layers, const ContactParams& params,
                          std::vector<std::string> input_layer_ids, ContactStages* stages) {
    if (layers.size() < 2) throw Error(ErrorCode::input, "contact derivation needs at least two layers");
    params.validate();

    std::vector<geometry::LayerGeometry> buffered(layers.size());
    parallel_for(layers.size(),
                 [&](std::size_t i) { buffered[i] = buffer_layer(layers[i], params.r1, params.arc_segments); });

    geometry::LayerGeometry acc = buffered.front();
    for (std::size_t i = 1; i < buffered.size(); ++i) acc = intersect_layers(acc, buffered[i]);

    DerivedLayer out;
    out.params = params;
    out.kind = DerivedKind::contact;
    out.geometry = buffer_layer(acc, params.r2, params.arc_segments);
    out.input_layer_ids = std::move(input_layer_ids);

    std::ostringstream material;
    material.precision(17);
    for (const auto& id : out.input_layer_ids) material << id << '\x1f';
    material << params.r1 << '\x1f' << params.r2 << '\x1f' << params.arc_segments;
    out.layer_id = stable_id("ct-", material.str());

    if (stages) {
        stages->buffered = std::move(buffered);
        stages->intersected = std::move(acc);
    }
    return out;
}

}  // namespace lithoquery::contact
