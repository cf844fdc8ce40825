#include "lithoquery/text.hpp"

#include <array>
#include <cstdint>

namespace lithoquery::geodata {

namespace {

// ASCII folds for U+00C0..U+017F; empty entries are dropped.
constexpr std::array<const char*, 0xC0> kLatinFold = {
    "A", "A", "A", "A", "A", "A", "AE", "C", "E", "E", "E", "E", "I", "I", "I", "I",  // U+00C0
    "D", "N", "O", "O", "O", "O", "O", "", "O", "U", "U", "U", "U", "Y", "TH", "ss",  // U+00D0
    "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",  // U+00E0
    "d", "n", "o", "o", "o", "o", "o", "", "o", "u", "u", "u", "u", "y", "th", "y",  // U+00F0
    "A", "a", "A", "a", "A", "a", "C", "c", "C", "c", "C", "c", "C", "c", "D", "d",  // U+0100
    "D", "d", "E", "e", "E", "e", "E", "e", "E", "e", "E", "e", "G", "g", "G", "g",  // U+0110
    "G", "g", "G", "g", "H", "h", "H", "h", "I", "i", "I", "i", "I", "i", "I", "i",  // U+0120
    "I", "i", "IJ", "ij", "J", "j", "K", "k", "k", "L", "l", "L", "l", "L", "l", "L",  // U+0130
    "l", "L", "l", "N", "n", "N", "n", "N", "n", "n", "N", "n", "O", "o", "O", "o",  // U+0140
    "O", "o", "OE", "oe", "R", "r", "R", "r", "R", "r", "S", "s", "S", "s", "S", "s",  // U+0150
    "S", "s", "T", "t", "T", "t", "T", "t", "U", "u", "U", "u", "U", "u", "U", "u",  // U+0160
    "U", "u", "U", "u", "W", "w", "Y", "y", "Y", "Z", "z", "Z", "z", "Z", "z", "s",  // U+0170
};

bool is_blank(std::string_view s) {
    return s.find_first_not_of(" \t\r\n\v\f") == std::string_view::npos;
}

// Decodes one UTF-8 sequence starting at `i`. Returns the code point, or -1
// for a malformed sequence, and advances `i` past the consumed bytes.
std::int32_t decode_utf8(std::string_view s, std::size_t& i) {
    const auto lead = static_cast<unsigned char>(s[i]);
    int extra = 0;
    std::int32_t cp = 0;
    if ((lead & 0xE0) == 0xC0) { extra = 1; cp = lead & 0x1F; }
    else if ((lead & 0xF0) == 0xE0) { extra = 2; cp = lead & 0x0F; }
    else if ((lead & 0xF8) == 0xF0) { extra = 3; cp = lead & 0x07; }
    else { ++i; return -1; }
    if (i + extra >= s.size()) { i = s.size(); return -1; }
    for (int k = 1; k <= extra; ++k) {
        const auto cont = static_cast<unsigned char>(s[i + k]);
        if ((cont & 0xC0) != 0x80) { i += k; return -1; }
        cp = (cp << 6) | (cont & 0x3F);
    }
    i += extra + 1;
    return cp;
}

}  // namespace

std::string build_description(const std::vector<Attribute>& attributes,
                              const std::vector<std::string>& signature_columns) {
    std::string out;
    for (const auto& column : signature_columns) {
        for (const auto& [heading, value] : attributes) {
            if (heading != column) continue;
            if (!is_blank(value)) {
                if (!out.empty()) out += ". ";
                out += value;
            }
            break;
        }
    }
    return out;
}

std::string clean_description(std::string_view text) {
    std::string folded;
    folded.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
        const auto byte = static_cast<unsigned char>(text[i]);
        if (byte < 0x80) {
            if (byte == '\n' || byte == '\t' || byte == '\r' || byte == '\v' || byte == '\f')
                folded.push_back(' ');
            else if (byte >= 0x20 && byte != 0x7F)
                folded.push_back(static_cast<char>(byte));
            ++i;
            continue;
        }
        const std::int32_t cp = decode_utf8(text, i);
        if (cp >= 0xC0 && cp < 0x180) folded += kLatinFold[static_cast<std::size_t>(cp - 0xC0)];
    }

    std::string out;
    out.reserve(folded.size());
    for (char c : folded) {
        if (c == ' ' && (out.empty() || out.back() == ' ')) continue;
        out.push_back(c);
    }
    if (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

}  // namespace lithoquery::geodata
