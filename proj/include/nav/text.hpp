#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace nav {

using Date = std::chrono::sys_days;

namespace utf8 {

/// Decodes UTF-8 into Unicode scalar values. Invalid bytes decode to U+FFFD.
std::u32string decode(std::string_view s);
std::string encode(std::u32string_view s);
std::size_t length(std::string_view s);

/// Substring by scalar-value offsets [start, end).
std::string substr(std::string_view s, std::size_t start, std::size_t end);

}  // namespace utf8

bool is_space(char32_t c);
bool is_alnum(char32_t c);
bool is_upper(char32_t c);
bool is_digit(char32_t c);
char32_t to_lower(char32_t c);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::string collapse_whitespace(std::string_view s);

/// Token with scalar-value offsets into the source text.
struct Token {
  std::string text;  // lowercased
  std::size_t start = 0;
  std::size_t end = 0;
};

/// Splits on non-alphanumerics and lowercases. Offsets are in scalar values.
std::vector<Token> tokenize(std::string_view text);
std::vector<std::string> tokenize_words(std::string_view text);

/// Levenshtein distance over scalar values.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

/// 1 - levenshtein / max(len). Two empty strings are identical (1.0).
double edit_similarity(std::string_view a, std::string_view b);

std::uint64_t fnv1a64(std::string_view bytes);

/// Parses "YYYY-MM-DD" (a trailing "THH:MM:SS..." is accepted and ignored).
bool parse_date(std::string_view s, Date& out);
std::string format_date(Date d);
std::string format_month(Date d);  // YYYY-MM
std::string format_timestamp(std::chrono::system_clock::time_point t);  // YYYY-MM-DDTHH:MM:SSZ
Date today_utc();

std::vector<std::string> split(std::string_view s, char sep);

}  // namespace nav
