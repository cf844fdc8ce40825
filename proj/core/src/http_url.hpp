#pragma once

#include "lithoquery/error.hpp"

#include <string>

namespace lithoquery::detail {

struct HttpTarget {
    std::string origin;     // scheme://host[:port]
    std::string base_path;  // without trailing slash
};

inline HttpTarget split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorCode::config, "endpoint '" + url + "' lacks a scheme");
    const auto path_start = url.find('/', scheme_end + 3);
    HttpTarget t;
    t.origin = url.substr(0, path_start);
    if (path_start != std::string::npos) t.base_path = url.substr(path_start);
    while (!t.base_path.empty() && t.base_path.back() == '/') t.base_path.pop_back();
    return t;
}

}  // namespace lithoquery::detail
