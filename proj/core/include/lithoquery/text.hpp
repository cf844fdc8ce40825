#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lithoquery::geodata {

using Attribute = std::pair<std::string, std::string>;  // (heading, value)

/// Joins the non-empty values of `signature_columns`, in that order, with ". ".
/// Headings are not part of the output.
std::string build_description(const std::vector<Attribute>& attributes,
                              const std::vector<std::string>& signature_columns);

/// Folds Latin letters with diacritics to ASCII, drops every other non-ASCII
/// code point, turns newlines and tabs into spaces, collapses space runs and
/// trims both ends.
std::string clean_description(std::string_view text);

}  // namespace lithoquery::geodata
