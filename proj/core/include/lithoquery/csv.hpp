#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lithoquery::csv {

struct Row {
    std::size_t line = 0;  // 1-based line where the record starts
    std::vector<std::string> fields;
};

struct Table {
    std::vector<std::string> header;
    std::vector<Row> rows;

    std::optional<std::size_t> column(std::string_view name) const;
};

/// RFC-4180 reader: quoted fields, doubled quotes, embedded newlines, CRLF.
/// Throws Error(parse) with the offending line on malformed input.
Table parse(std::string_view text);
Table read_file(const std::filesystem::path& path);

/// Quotes a field only when it needs quoting.
std::string escape(std::string_view field);
std::string format_row(const std::vector<std::string>& fields);

}  // namespace lithoquery::csv
