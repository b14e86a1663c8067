#include "scopetree/report.hpp"

#include <cmath>
#include <cstdio>
#include <set>

namespace scopetree {

std::optional<ReportFormat> parse_report_format(std::string_view text) {
    if (text == "markdown" || text == "md") return ReportFormat::Markdown;
    if (text == "csv") return ReportFormat::Csv;
    return std::nullopt;
}

int display_percent(double fraction) {
    // Fractions come from integer counts; the epsilon keeps exact halves such
    // as 0.145 * 100 = 14.499999999999998 on the upper side.
    return static_cast<int>(std::floor(fraction * 100.0 + 0.5 + 1e-9));
}

namespace {

std::string pct(double f) { return std::to_string(display_percent(f)) + "%"; }

std::string raw(double f) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", f);
    return buf;
}

std::string kappa_text(double k) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", k);
    return buf;
}

std::set<int> report_levels(std::span<const StrategyReport> reports) {
    std::set<int> levels;
    for (const auto& r : reports) {
        for (const auto& [level, _] : r.error_by_level) levels.insert(level);
    }
    if (levels.empty()) {
        for (int l = 2; l <= kDefaultMaxDepth; ++l) levels.insert(l);
    }
    return levels;
}

double value_or_zero(const auto& map, const auto& key) {
    auto it = map.find(key);
    return it == map.end() ? 0.0 : it->second;
}

std::string markdown(std::span<const StrategyReport> reports, const AgreementReport* agreement) {
    std::string out = "# Subtopic evaluation report\n\n";

    out += "## Properly scoped subtopics\n\n";
    out += "| Strategy | Properly Scoped | Subtopics | Annotators |\n";
    out += "| --- | --- | --- | --- |\n";
    for (const auto& r : reports) {
        out += "| " + std::string(strategy_display_name(r.strategy)) + " | " + pct(r.accuracy) +
               " | " + std::to_string(r.n_subtopics) + " | " + std::to_string(r.n_annotators) + " |\n";
    }

    out += "\n## Error categories\n\n";
    out += "| Strategy |";
    for (auto c : kErrorCategories) out += " " + std::string(label_display_name(c)) + " |";
    out += "\n| --- |";
    for (std::size_t i = 0; i < kErrorCategories.size(); ++i) out += " --- |";
    out += "\n";
    for (const auto& r : reports) {
        out += "| " + std::string(strategy_display_name(r.strategy)) + " |";
        for (auto c : kErrorCategories) out += " " + pct(value_or_zero(r.error_by_category, c)) + " |";
        out += "\n";
    }

    auto levels = report_levels(reports);
    out += "\n## Errors by level\n\n";
    out += "| Strategy |";
    for (int l : levels) out += " Level " + std::to_string(l) + " |";
    out += "\n| --- |";
    for (std::size_t i = 0; i < levels.size(); ++i) out += " --- |";
    out += "\n";
    for (const auto& r : reports) {
        out += "| " + std::string(strategy_display_name(r.strategy)) + " |";
        for (int l : levels) out += " " + pct(value_or_zero(r.error_by_level, l)) + " |";
        out += "\n";
    }

    if (agreement) {
        out += "\n## Inter-rater agreement\n\n";
        out += "| Strategy | Annotator A | Annotator B | Items | Cohen's kappa |\n";
        out += "| --- | --- | --- | --- | --- |\n";
        for (const auto& a : agreement->assignments) {
            out += "| " + std::string(strategy_display_name(a.strategy)) + " | " + a.annotator_a +
                   " | " + a.annotator_b + " | " + std::to_string(a.n_items) + " | " +
                   kappa_text(a.kappa) + " |\n";
        }
        out += "\nAverage kappa: " + kappa_text(agreement->average_kappa) + "\n";
    }
    return out;
}

std::vector<ReportDocument> csv(std::span<const StrategyReport> reports,
                                const AgreementReport* agreement) {
    std::vector<ReportDocument> docs;

    std::string acc = "strategy,percent,fraction,n_subtopics,n_annotators\n";
    for (const auto& r : reports) {
        acc += std::string(strategy_key(r.strategy)) + "," + std::to_string(display_percent(r.accuracy)) +
               "," + raw(r.accuracy) + "," + std::to_string(r.n_subtopics) + "," +
               std::to_string(r.n_annotators) + "\n";
    }
    docs.push_back({"accuracy.csv", std::move(acc)});

    std::string cat = "strategy,category,percent,fraction\n";
    for (const auto& r : reports) {
        for (auto c : kErrorCategories) {
            double f = value_or_zero(r.error_by_category, c);
            cat += std::string(strategy_key(r.strategy)) + "," + std::string(to_string(c)) + "," +
                   std::to_string(display_percent(f)) + "," + raw(f) + "\n";
        }
    }
    docs.push_back({"error_by_category.csv", std::move(cat)});

    std::string lvl = "strategy,level,percent,fraction\n";
    auto levels = report_levels(reports);
    for (const auto& r : reports) {
        for (int l : levels) {
            double f = value_or_zero(r.error_by_level, l);
            lvl += std::string(strategy_key(r.strategy)) + "," + std::to_string(l) + "," +
                   std::to_string(display_percent(f)) + "," + raw(f) + "\n";
        }
    }
    docs.push_back({"error_by_level.csv", std::move(lvl)});

    if (agreement) {
        std::string agr = "strategy,annotator_a,annotator_b,n_items,kappa\n";
        for (const auto& a : agreement->assignments) {
            agr += std::string(strategy_key(a.strategy)) + "," + a.annotator_a + "," + a.annotator_b +
                   "," + std::to_string(a.n_items) + "," + raw(a.kappa) + "\n";
        }
        agr += "all,,,," + raw(agreement->average_kappa) + "\n";
        docs.push_back({"agreement.csv", std::move(agr)});
    }
    return docs;
}

}  // namespace

std::vector<ReportDocument> emit_report(std::span<const StrategyReport> reports,
                                        const AgreementReport* agreement, ReportFormat format) {
    if (format == ReportFormat::Markdown) return {{"report.md", markdown(reports, agreement)}};
    return csv(reports, agreement);
}

Json report_to_json(std::span<const StrategyReport> reports, const AgreementReport* agreement) {
    Json out = Json::object();
    Json list = Json::array();
    for (const auto& r : reports) {
        Json j = Json::object();
        j["strategy"] = strategy_key(r.strategy);
        j["display_name"] = strategy_display_name(r.strategy);
        j["accuracy"] = r.accuracy;
        j["accuracy_percent"] = display_percent(r.accuracy);
        Json cats = Json::object();
        for (auto c : kErrorCategories) cats[std::string(to_string(c))] = value_or_zero(r.error_by_category, c);
        j["error_by_category"] = std::move(cats);
        Json levels = Json::object();
        for (const auto& [l, f] : r.error_by_level) levels[std::to_string(l)] = f;
        j["error_by_level"] = std::move(levels);
        j["n_subtopics"] = r.n_subtopics;
        j["n_annotators"] = r.n_annotators;
        list.push_back(std::move(j));
    }
    out["strategies"] = std::move(list);
    if (agreement) {
        Json a = Json::object();
        Json assignments = Json::array();
        for (const auto& p : agreement->assignments) {
            assignments.push_back(Json{{"strategy", strategy_key(p.strategy)},
                                       {"annotator_a", p.annotator_a},
                                       {"annotator_b", p.annotator_b},
                                       {"n_items", p.n_items},
                                       {"kappa", p.kappa}});
        }
        a["assignments"] = std::move(assignments);
        a["average_kappa"] = agreement->average_kappa;
        out["agreement"] = std::move(a);
    }
    return out;
}

}  // namespace scopetree
