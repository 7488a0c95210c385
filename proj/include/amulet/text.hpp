#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace amulet::text {

std::string_view trim(std::string_view s);

// Lowercases ASCII letters and collapses every run of whitespace into one space.
std::string collapse_lower(std::string_view s);

// Number of maximal non-whitespace runs.
std::size_t word_count(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

bool starts_with_icase(std::string_view s, std::string_view prefix);

// Levenshtein distance over bytes.
std::size_t edit_distance(std::string_view a, std::string_view b);

// min(edit_distance(a, b), limit + 1), computed within a diagonal band.
std::size_t bounded_edit_distance(std::string_view a, std::string_view b, std::size_t limit);

// Formats a value with exactly one decimal place.
std::string one_decimal(double v);

std::string fixed(double v, int decimals);

}  // namespace amulet::text
