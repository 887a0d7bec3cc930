#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace vgbench::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

/// Collapses every whitespace run to a single space and trims the ends.
std::string collapse_whitespace(std::string_view s);

/// Lower-cases, deletes apostrophes, turns all other punctuation into spaces
/// and collapses whitespace. Parentheticals are kept.
std::string normalize_text(std::string_view s);

/// Condition-name normalization: like normalize_text, but parenthetical
/// segments such as "(COPD)" are removed first.
std::string normalize_name(std::string_view s);

/// Whitespace tokens of normalize_text(s).
std::vector<std::string> tokens(std::string_view s);

/// True if `phrase` (already normalized) occurs in `haystack` (already
/// normalized) on token boundaries.
bool contains_phrase(std::string_view haystack, std::string_view phrase);

/// Empty pieces are dropped.
std::vector<std::string> split(std::string_view s, char sep);

/// Sentence-ish clauses: split on . ! ? ; and on the connectives
/// "but", "however", "although", "though".
std::vector<std::string> clauses(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);

}  // namespace vgbench::text
