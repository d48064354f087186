#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared by the parsers, the lexical scorer and the stub
// backend. ASCII-only case folding; non-ASCII bytes pass through untouched.
namespace recap::text {

std::string_view trim(std::string_view s);

// Collapses every run of whitespace into one space and trims both ends.
std::string collapse_whitespace(std::string_view s);

std::vector<std::string_view> split_whitespace(std::string_view s);

std::size_t count_words(std::string_view s);

std::string to_lower(std::string_view s);

bool is_valid_utf8(std::string_view s);

bool is_stop_word(std::string_view lowered);

// Lowercased terms with leading/trailing punctuation stripped. Stop words
// are kept; callers filter with is_stop_word when they need content terms.
std::vector<std::string> terms(std::string_view s);

// terms() minus stop words and tokens without any letter or digit.
std::vector<std::string> content_terms(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);

}  // namespace recap::text
