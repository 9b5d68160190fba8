#pragma once

#include <string>
#include <string_view>

namespace guiguard::text {

// NFC, trim, and collapse internal whitespace runs to a single space.
// Invalid UTF-8 sequences are replaced with U+FFFD.
std::string normalize(std::string_view input);

// Decodes UTF-8 into code points (after no further normalization).
std::u32string to_code_points(std::string_view utf8);
std::string from_code_points(std::u32string_view code_points);

// Unicode simple case folding, code point by code point.
std::u32string case_fold(std::u32string_view code_points);

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

}  // namespace guiguard::text
