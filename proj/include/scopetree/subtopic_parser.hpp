#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace scopetree {

enum class ParseStatus { Ok, CountMismatch, ParseFailure };

std::string_view to_string(ParseStatus s);

struct ParseOutcome {
    ParseStatus status = ParseStatus::ParseFailure;
    /// Labels in order of appearance; filled for Ok and CountMismatch.
    std::vector<std::string> labels;
    /// Input text, kept on ParseFailure so callers can show it.
    std::string raw;

    bool ok() const noexcept { return status == ParseStatus::Ok; }
};

/// Extracts list items from a completion.
///
/// A line is an item when, after optional indentation, it starts with a
/// bullet (`-`, `*`, `•`) or an integer followed by `.` or `)`, then
/// whitespace. For each item the marker is dropped, anything after the first
/// `:` or a spaced en or em dash is cut (models like to append a definition),
/// surrounding `**` / `*` / `_` emphasis and one trailing period are
/// stripped, and the result is trimmed. Items that end up empty are skipped.
///
/// Never throws; a count other than `expected_k` yields CountMismatch with the
/// parsed labels, and no items at all yields ParseFailure.
ParseOutcome parse_subtopics(std::string_view raw, int expected_k) noexcept;

}  // namespace scopetree
