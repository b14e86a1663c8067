#include "scopetree/subtopic_parser.hpp"

#include "scopetree/util.hpp"

#include <array>
#include <cctype>
#include <optional>

namespace scopetree {

std::string_view to_string(ParseStatus s) {
    switch (s) {
        case ParseStatus::Ok: return "ok";
        case ParseStatus::CountMismatch: return "count_mismatch";
        case ParseStatus::ParseFailure: return "parse_failure";
    }
    return "parse_failure";
}

namespace {

constexpr std::string_view kBullet = "\xE2\x80\xA2";  // U+2022

bool is_blank(char c) { return c == ' ' || c == '\t'; }

/// Returns the text after the list marker and its whitespace, or nullopt
/// when the line is not a list item.
std::optional<std::string_view> item_body(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && is_blank(line[i])) ++i;
    auto rest = line.substr(i);

    std::size_t marker = 0;
    if (!rest.empty() && (rest[0] == '-' || rest[0] == '*')) {
        marker = 1;
    } else if (rest.substr(0, kBullet.size()) == kBullet) {
        marker = kBullet.size();
    } else {
        std::size_t digits = 0;
        while (digits < rest.size() && std::isdigit(static_cast<unsigned char>(rest[digits]))) {
            ++digits;
        }
        if (digits == 0 || digits >= rest.size()) return std::nullopt;
        if (rest[digits] != '.' && rest[digits] != ')') return std::nullopt;
        marker = digits + 1;
    }
    if (marker >= rest.size() || !is_blank(rest[marker])) return std::nullopt;
    return rest.substr(marker + 1);
}

std::string_view cut_definition(std::string_view item) {
    static constexpr std::array<std::string_view, 3> kSeparators = {
        ":", " \xE2\x80\x93 ", " \xE2\x80\x94 "};  // colon, spaced en dash, spaced em dash
    std::size_t cut = std::string_view::npos;
    for (auto sep : kSeparators) cut = std::min(cut, item.find(sep));
    return cut == std::string_view::npos ? item : item.substr(0, cut);
}

bool is_emphasis(char c) { return c == '*' || c == '_'; }

std::string clean_label(std::string_view body) {
    std::string label = trim(cut_definition(body));
    bool period_stripped = false;
    while (true) {
        auto before = label.size();
        std::size_t lead = 0;
        while (lead < label.size() && is_emphasis(label[lead])) ++lead;
        label.erase(0, lead);
        while (!label.empty() && is_emphasis(label.back())) label.pop_back();
        if (!period_stripped && !label.empty() && label.back() == '.') {
            label.pop_back();
            period_stripped = true;
        }
        label = trim(label);
        if (label.size() == before) break;
    }
    return label;
}

}  // namespace

ParseOutcome parse_subtopics(std::string_view raw, int expected_k) noexcept {
    ParseOutcome out;
    std::size_t start = 0;
    while (start <= raw.size()) {
        auto end = raw.find('\n', start);
        if (end == std::string_view::npos) end = raw.size();
        auto line = raw.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (auto body = item_body(line)) {
            auto label = clean_label(*body);
            if (!label.empty()) out.labels.push_back(std::move(label));
        }
        start = end + 1;
    }

    if (out.labels.empty()) {
        out.status = ParseStatus::ParseFailure;
        out.raw = std::string(raw);
    } else if (static_cast<int>(out.labels.size()) != expected_k) {
        out.status = ParseStatus::CountMismatch;
    } else {
        out.status = ParseStatus::Ok;
    }
    return out;
}

}  // namespace scopetree
