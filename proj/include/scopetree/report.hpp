#pragma once

#include "scopetree/eval.hpp"
#include "scopetree/tree_io.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace scopetree {

enum class ReportFormat { Markdown, Csv };

std::optional<ReportFormat> parse_report_format(std::string_view text);

/// Integer percent, rounding halves up: 0.775 -> 78.
int display_percent(double fraction);

struct ReportDocument {
    std::string filename;
    std::string content;
};

/// Markdown: a single report.md holding the accuracy, error-category and
/// error-by-level tables (plus agreement when given). CSV: accuracy.csv,
/// error_by_category.csv, error_by_level.csv (and agreement.csv), each with
/// the rounded percent and the raw fraction.
std::vector<ReportDocument> emit_report(std::span<const StrategyReport> reports,
                                        const AgreementReport* agreement, ReportFormat format);

Json report_to_json(std::span<const StrategyReport> reports, const AgreementReport* agreement);

}  // namespace scopetree
