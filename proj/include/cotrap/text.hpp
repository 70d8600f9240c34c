#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cotrap {

// Line model used across the toolkit: text is split on '\n', and a trailing
// newline terminates the last line instead of opening an empty one.
// join_lines(split_lines(t)) == t for any '\n'-delimited text.
struct Lines {
    std::vector<std::string> lines;
    bool trailing_newline = false;
};

Lines split_lines(std::string_view text);
std::string join_lines(const Lines& lines);
std::size_t count_lines(std::string_view text);

bool is_valid_utf8(std::string_view text);

/// Leading run of spaces/tabs.
std::string_view leading_whitespace(std::string_view line);
/// True when the line has no non-whitespace character.
bool is_blank(std::string_view line);
std::string_view trim(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);

/// Levenshtein distance over bytes.
std::size_t edit_distance(std::string_view a, std::string_view b);
/// 1 - distance / max(|a|, |b|); two empty strings are fully similar.
double edit_similarity(std::string_view a, std::string_view b);

// Percentages are carried as integer hundredths so that table math stays
// exact: ratio_pct_hundredths(5418, 6403) == 8462 ("84.62").
// Rounding is half-up (half away from zero for negatives).
std::int64_t ratio_pct_hundredths(std::int64_t numerator, std::int64_t denominator);
std::string format_hundredths(std::int64_t hundredths);
double hundredths_to_double(std::int64_t hundredths);

/// Mean of a sum over n entries, in hundredths (half-up).
std::int64_t mean_hundredths(std::int64_t sum, std::int64_t n);

} // namespace cotrap
