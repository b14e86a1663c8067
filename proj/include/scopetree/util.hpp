#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <vector>

namespace scopetree {

std::string trim(std::string_view text);

/// Comparison key for topic labels: trimmed, internal whitespace runs
/// collapsed to one space, ASCII letters lowercased. Non-ASCII bytes pass
/// through untouched.
std::string normalize_label(std::string_view label);

std::vector<std::string> split(std::string_view text, char sep);

std::string sha256_hex(std::string_view data);

using Clock = std::chrono::system_clock;

/// ISO-8601 UTC with millisecond precision, e.g. "2026-10-19T08:30:00.125Z".
std::string format_utc(Clock::time_point tp);
std::string utc_now();

/// Random lowercase hex string of `bytes * 2` characters.
std::string random_hex(std::size_t bytes);

std::string read_file(const std::string& path);
/// Writes via a temporary sibling and rename so readers never see a torn file.
void write_file_atomic(const std::string& path, std::string_view content);

}  // namespace scopetree
