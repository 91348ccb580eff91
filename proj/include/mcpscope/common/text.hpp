#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mcpscope::text {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_lines(std::string_view s);
bool contains_ci(std::string_view haystack, std::string_view needle);
bool starts_with_ci(std::string_view s, std::string_view prefix);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string replace_all(std::string s, std::string_view from, std::string_view to);

/// Lowercase alphanumeric word tokens.
std::vector<std::string> words(std::string_view s);

/// Splits an identifier on '_', '-', '.', '/', spaces and camelCase humps, lowercased.
/// "getDatabase_records" -> {"get", "database", "records"}.
std::vector<std::string> identifier_parts(std::string_view name);

/// True if `s` contains a URL (scheme://... or www....).
bool contains_url(std::string_view s);
/// Removes bare URLs; markdown links and images should be collapsed first.
std::string strip_urls(std::string_view s);

/// Lowercases and collapses every run of non-alphanumeric characters into one space,
/// padded with a space on both ends: "Send_ETH now!" -> " send eth now ".
std::string word_normal_form(std::string_view s);

/// Whole-word, case-insensitive phrase search; '_' and '-' count as word breaks, so
/// "private_key" matches "private key" and "PRIVATE-KEY".
bool contains_word(std::string_view haystack, std::string_view phrase);
/// Same test against a haystack already in word_normal_form.
bool contains_word_normalized(std::string_view normalized_haystack, std::string_view phrase);

}  // namespace mcpscope::text
