#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sage::text {

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

/// Splits on ASCII whitespace, dropping empty tokens.
std::vector<std::string_view> split_whitespace(std::string_view s);

inline std::size_t word_count(std::string_view s) { return split_whitespace(s).size(); }

/// Joins with `sep`.
/// Splits on every `sep`; empty pieces are kept.
std::vector<std::string_view> split(std::string_view s, char sep);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool contains_icase(std::string_view haystack, std::string_view needle);

}  // namespace sage::text
