#pragma once
// Unicode and timestamp helpers. Offsets exposed by the engine are Unicode
// scalar-value offsets, never byte offsets.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "clpde/types.hpp"

namespace clpde::text {

// Throws ValidationError on malformed UTF-8.
std::u32string decode_utf8(std::string_view utf8);
std::string encode_utf8(std::u32string_view scalars);
std::size_t scalar_length(std::string_view utf8);

// Substring by scalar offsets [start, end).
std::string scalar_substr(std::string_view utf8, std::size_t start, std::size_t end);

std::string trim(std::string_view s);
std::string nfc(std::string_view utf8);

// Identity form of a surface text: NFC, trimmed, case preserved.
std::string normalize_surface(std::string_view utf8);

std::string ascii_lower(std::string_view s);

// Separator: whitespace, ASCII punctuation, danda.
bool is_separator(char32_t c);

// Lowercased tokens split on separators.
std::vector<std::string> tokenize(std::string_view utf8);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_timestamp(Timestamp t);
Timestamp parse_timestamp(std::string_view s);

}  // namespace clpde::text
