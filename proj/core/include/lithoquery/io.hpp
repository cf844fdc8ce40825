#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace lithoquery::io {

std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// see either the old or the new content.
void write_atomic(const std::filesystem::path& path, std::string_view content);

/// RFC 3339 UTC timestamp. Honors SOURCE_DATE_EPOCH for reproducible output.
std::string utc_timestamp();

}  // namespace lithoquery::io
