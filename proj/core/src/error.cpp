#include "lithoquery/error.hpp"

namespace lithoquery {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::input: return "input_error";
        case ErrorCode::config: return "config_error";
        case ErrorCode::parse: return "parse_error";
        case ErrorCode::ingest: return "ingest_error";
        case ErrorCode::state: return "state_error";
        case ErrorCode::geometry: return "geometry_error";
        case ErrorCode::provider: return "provider_error";
        case ErrorCode::cache: return "cache_error";
        case ErrorCode::not_found: return "not_found";
        case ErrorCode::shape: return "shape_error";
        case ErrorCode::undefined_similarity: return "undefined_similarity";
        case ErrorCode::validation: return "validation_error";
        case ErrorCode::io: return "io_error";
    }
    return "unknown_error";
}

}  // namespace lithoquery
