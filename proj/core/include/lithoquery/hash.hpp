#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace lithoquery {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a64(std::string_view data) noexcept {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// Short stable identifier: `prefix` followed by 16 hex digits of SHA-256.
std::string stable_id(std::string_view prefix, std::string_view material);

}  // namespace lithoquery
