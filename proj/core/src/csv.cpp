#include "lithoquery/csv.hpp"

#include "lithoquery/error.hpp"
#include "lithoquery/io.hpp"

namespace lithoquery::csv {

std::optional<std::size_t> Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    return std::nullopt;
}

Table parse(std::string_view text) {
    // Skip a UTF-8 byte order mark.
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

    std::vector<Row> records;
    Row current;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    bool row_has_content = false;
    std::size_t line = 1;
    std::size_t quote_line = 0;
    current.line = 1;

    auto end_field = [&] {
        current.fields.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
    };
    auto end_row = [&] {
        end_field();
        if (row_has_content || current.fields.size() > 1 || !current.fields.front().empty())
            records.push_back(std::move(current));
        current = Row{};
        row_has_content = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty() || field_was_quoted)
                    throw Error(ErrorCode::parse,
                                "CSV line " + std::to_string(line) + ": unexpected quote inside unquoted field");
                in_quotes = true;
                field_was_quoted = true;
                row_has_content = true;
                quote_line = line;
                break;
            case ',':
                end_field();
                row_has_content = true;
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') break;
                [[fallthrough]];
            case '\n':
                end_row();
                ++line;
                current.line = line;
                break;
            default:
                if (field_was_quoted)
                    throw Error(ErrorCode::parse,
                                "CSV line " + std::to_string(line) + ": characters after closing quote");
                field.push_back(c);
                row_has_content = true;
        }
    }
    if (in_quotes)
        throw Error(ErrorCode::parse,
                    "CSV line " + std::to_string(quote_line) + ": unterminated quoted field");
    if (row_has_content || !field.empty()) end_row();

    Table table;
    if (records.empty()) throw Error(ErrorCode::parse, "CSV line 1: missing header row");
    table.header = std::move(records.front().fields);
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].fields.size() != table.header.size())
            throw Error(ErrorCode::parse, "CSV line " + std::to_string(records[r].line) + ": expected " +
                                              std::to_string(table.header.size()) + " fields, found " +
                                              std::to_string(records[r].fields.size()));
        table.rows.push_back(std::move(records[r]));
    }
    return table;
}

Table read_file(const std::filesystem::path& path) { return parse(io::read_text(path)); }

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string format_row(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += escape(fields[i]);
    }
    return out;
}

}  // namespace lithoquery::csv
