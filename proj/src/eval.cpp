#include "scopetree/eval.hpp"

#include "scopetree/util.hpp"

#include <algorithm>
#include <set>
#include <tuple>
#include <unordered_map>

namespace scopetree {

std::string_view to_string(AnnotationLabel l) {
    switch (l) {
        case AnnotationLabel::Good: return "Good";
        case AnnotationLabel::Repetitive: return "Repetitive";
        case AnnotationLabel::TooSpecific: return "TooSpecific";
        case AnnotationLabel::TooGeneral: return "TooGeneral";
        case AnnotationLabel::Tangential: return "Tangential";
        case AnnotationLabel::Unrelated: return "Unrelated";
    }
    return "Good";
}

std::string_view label_display_name(AnnotationLabel l) {
    switch (l) {
        case AnnotationLabel::Good: return "Properly Scoped";
        case AnnotationLabel::Repetitive: return "Repetitive";
        case AnnotationLabel::TooSpecific: return "Too Specific";
        case AnnotationLabel::TooGeneral: return "Too General";
        case AnnotationLabel::Tangential: return "Tangential";
        case AnnotationLabel::Unrelated: return "Unrelated";
    }
    return "Properly Scoped";
}

std::optional<AnnotationLabel> parse_label(std::string_view text) {
    for (auto l : kAllLabels) {
        if (to_string(l) == text) return l;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && trim(field).empty()) {
            field.clear();
            quoted = was_quoted = true;
        } else if (c == ',') {
            fields.push_back(was_quoted ? field : trim(field));
            field.clear();
            was_quoted = false;
        } else {
            field.push_back(c);
        }
    }
    if (quoted) {
        throw Error(ErrorKind::Format, "annotations line " + std::to_string(line_no) +
                                           ": unterminated quoted field");
    }
    fields.push_back(was_quoted ? field : trim(field));
    return fields;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos && trim(s) == s) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

using AnnotationKey = std::tuple<std::string, int, std::string>;

AnnotationKey key_of(const AnnotationRecord& a) {
    return {a.record_id, a.subtopic_index, a.annotator_id};
}

}  // namespace

std::vector<AnnotationRecord> parse_annotations_csv(std::string_view text) {
    if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    std::vector<AnnotationRecord> out;
    std::set<AnnotationKey> seen;
    bool header_seen = false;
    std::size_t line_no = 0;
    for (auto& raw_line : split(text, '\n')) {
        ++line_no;
        std::string_view line = raw_line;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) continue;
        if (!header_seen) {
            auto header = split_csv_line(line, line_no);
            if (header != std::vector<std::string>{"record_id", "subtopic_index", "annotator_id", "label"}) {
                throw Error(ErrorKind::Format, "annotations line " + std::to_string(line_no) +
                                                   ": expected header '" +
                                                   std::string(kAnnotationCsvHeader) + "'");
            }
            header_seen = true;
            continue;
        }
        auto fields = split_csv_line(line, line_no);
        auto where = "annotations line " + std::to_string(line_no);
        if (fields.size() != 4) {
            throw Error(ErrorKind::Format, where + ": expected 4 fields, got " +
                                               std::to_string(fields.size()));
        }
        AnnotationRecord a;
        a.record_id = fields[0];
        a.annotator_id = fields[2];
        if (a.record_id.empty() || a.annotator_id.empty()) {
            throw Error(ErrorKind::Format, where + ": record_id and annotator_id must be non-empty");
        }
        try {
            std::size_t used = 0;
            a.subtopic_index = std::stoi(fields[1], &used);
            if (used != fields[1].size() || a.subtopic_index < 0) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw Error(ErrorKind::Format, where + ": bad subtopic_index '" + fields[1] + "'");
        }
        auto label = parse_label(fields[3]);
        if (!label) {
            throw Error(ErrorKind::Format, where + ": unknown label '" + fields[3] +
                                               "' (expected Good, Repetitive, TooSpecific, "
                                               "TooGeneral, Tangential or Unrelated)");
        }
        a.label = *label;
        if (!seen.insert(key_of(a)).second) {
            throw Error(ErrorKind::InvalidArgument,
                        where + ": duplicate annotation for record " + a.record_id + " subtopic " +
                            fields[1] + " by " + a.annotator_id);
        }
        out.push_back(std::move(a));
    }
    return out;
}

std::string emit_annotations_csv(std::span<const AnnotationRecord> annotations) {
    std::string out(kAnnotationCsvHeader);
    out += '\n';
    for (const auto& a : annotations) {
        out += csv_field(a.record_id) + "," + std::to_string(a.subtopic_index) + "," +
               csv_field(a.annotator_id) + "," + std::string(to_string(a.label)) + "\n";
    }
    return out;
}

std::size_t upsert_annotations(std::vector<AnnotationRecord>& into,
                               std::span<const AnnotationRecord> updates) {
    std::map<AnnotationKey, std::size_t> index;
    for (std::size_t i = 0; i < into.size(); ++i) index[key_of(into[i])] = i;
    std::size_t changed = 0;
    for (const auto& u : updates) {
        auto key = key_of(u);
        if (auto it = index.find(key); it != index.end()) {
            if (into[it->second].label != u.label) {
                into[it->second].label = u.label;
                ++changed;
            }
        } else {
            index[key] = into.size();
            into.push_back(u);
            ++changed;
        }
    }
    return changed;
}

void check_annotation_targets(std::span<const GenerationRecord> records,
                              std::span<const AnnotationRecord> annotations) {
    std::unordered_map<std::string, const GenerationRecord*> by_id;
    for (const auto& r : records) by_id[r.record_id] = &r;
    for (const auto& a : annotations) {
        auto it = by_id.find(a.record_id);
        if (it == by_id.end()) {
            throw Error(ErrorKind::InvalidArgument, "annotation refers to unknown record '" +
                                                        a.record_id + "'");
        }
        const auto& rec = *it->second;
        if (rec.status != RecordStatus::Ok) {
            throw Error(ErrorKind::InvalidArgument, "record '" + a.record_id + "' has status " +
                                                        std::string(to_string(rec.status)) +
                                                        " and cannot be annotated");
        }
        if (a.subtopic_index < 0 || a.subtopic_index >= static_cast<int>(rec.subtopics.size())) {
            throw Error(ErrorKind::InvalidArgument,
                        "record '" + a.record_id + "' has no subtopic " +
                            std::to_string(a.subtopic_index));
        }
    }
}

IncompleteAnnotationError::IncompleteAnnotationError(std::vector<MissingAnnotation> missing)
    : Error(ErrorKind::IncompleteAnnotation, [&] {
          std::string msg = std::to_string(missing.size()) + " annotation(s) missing";
          std::size_t shown = 0;
          for (const auto& m : missing) {
              if (shown++ == 10) {
                  msg += "; ...";
                  break;
              }
              msg += (shown == 1 ? ": " : "; ") + m.record_id + "#" +
                     std::to_string(m.subtopic_index) + " by " + m.annotator_id;
          }
          return msg;
      }()),
      missing_(std::move(missing)) {}

// ---------------------------------------------------------------------------
// Agreement

double cohen_kappa(std::span<const AnnotationLabel> a, std::span<const AnnotationLabel> b) {
    if (a.empty() || a.size() != b.size()) {
        throw Error(ErrorKind::InvalidArgument,
                    "cohen_kappa needs two non-empty label vectors of equal length");
    }
    std::array<std::size_t, kAllLabels.size()> count_a{};
    std::array<std::size_t, kAllLabels.size()> count_b{};
    std::size_t agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++count_a[static_cast<std::size_t>(a[i])];
        ++count_b[static_cast<std::size_t>(b[i])];
        if (a[i] == b[i]) ++agree;
    }
    const auto n = a.size();
    std::size_t chance_num = 0;
    for (std::size_t c = 0; c < kAllLabels.size(); ++c) chance_num += count_a[c] * count_b[c];
    if (chance_num == n * n) return 1.0;  // both raters constant on the same label

    double nn = static_cast<double>(n);
    double p_o = static_cast<double>(agree) / nn;
    double p_e = static_cast<double>(chance_num) / (nn * nn);
    return (p_o - p_e) / (1.0 - p_e);
}

// ---------------------------------------------------------------------------
// Accuracy and error distributions

namespace {

struct Tally {
    std::size_t n_items = 0;
    /// annotator -> label -> count
    std::map<std::string, std::map<AnnotationLabel, std::size_t>> labels;
    /// annotator -> output level -> error count
    std::map<std::string, std::map<int, std::size_t>> error_levels;
};

Tally tally(std::span<const GenerationRecord> records,
            std::span<const AnnotationRecord> annotations, PromptStrategy strategy) {
    check_annotation_targets(records, annotations);

    std::set<std::string> strategy_records;
    for (const auto& rec : records) {
        if (rec.strategy == strategy) strategy_records.insert(rec.record_id);
    }
    std::set<std::string> annotators;
    for (const auto& a : annotations) {
        if (strategy_records.count(a.record_id)) annotators.insert(a.annotator_id);
    }
    if (annotators.empty()) {
        throw Error(ErrorKind::InvalidArgument,
                    "no annotations for strategy " + std::string(strategy_key(strategy)));
    }

    std::map<AnnotationKey, AnnotationLabel> lookup;
    for (const auto& a : annotations) lookup[key_of(a)] = a.label;

    Tally t;
    std::vector<MissingAnnotation> missing;
    for (const auto& rec : records) {
        if (rec.strategy != strategy || rec.status != RecordStatus::Ok) continue;
        int level = rec.output_level();
        for (int i = 0; i < static_cast<int>(rec.subtopics.size()); ++i) {
            ++t.n_items;
            for (const auto& who : annotators) {
                auto it = lookup.find({rec.record_id, i, who});
                if (it == lookup.end()) {
                    missing.push_back({rec.record_id, i, who});
                    continue;
                }
                ++t.labels[who][it->second];
                if (it->second != AnnotationLabel::Good) ++t.error_levels[who][level];
            }
        }
    }
    if (!missing.empty()) throw IncompleteAnnotationError(std::move(missing));
    if (t.n_items == 0) {
        throw Error(ErrorKind::InvalidArgument, "no judged subtopics for strategy " +
                                                    std::string(strategy_key(strategy)));
    }
    for (const auto& who : annotators) t.labels[who];
    return t;
}

/// Mean over annotators of count / n_items.
template <typename Map, typename Key>
double mean_fraction(const std::map<std::string, Map>& per_annotator, const Key& key,
                     std::size_t n_items) {
    double sum = 0.0;
    for (const auto& [who, counts] : per_annotator) {
        auto it = counts.find(key);
        std::size_t c = it == counts.end() ? 0 : it->second;
        sum += static_cast<double>(c) / static_cast<double>(n_items);
    }
    return sum / static_cast<double>(per_annotator.size());
}

}  // namespace

double accuracy(std::span<const GenerationRecord> records,
                std::span<const AnnotationRecord> annotations, PromptStrategy strategy) {
    auto t = tally(records, annotations, strategy);
    return mean_fraction(t.labels, AnnotationLabel::Good, t.n_items);
}

std::map<AnnotationLabel, double> error_distribution(std::span<const GenerationRecord> records,
                                                     std::span<const AnnotationRecord> annotations,
                                                     PromptStrategy strategy) {
    auto t = tally(records, annotations, strategy);
    std::map<AnnotationLabel, double> out;
    for (auto c : kErrorCategories) out[c] = mean_fraction(t.labels, c, t.n_items);
    return out;
}

std::map<int, double> errors_by_level(std::span<const GenerationRecord> records,
                                      std::span<const AnnotationRecord> annotations,
                                      PromptStrategy strategy, int max_depth) {
    auto t = tally(records, annotations, strategy);
    for (const auto& [who, _] : t.labels) t.error_levels[who];
    std::map<int, double> out;
    for (int level = 2; level <= max_depth; ++level) {
        out[level] = mean_fraction(t.error_levels, level, t.n_items);
    }
    return out;
}

StrategyReport strategy_report(std::span<const GenerationRecord> records,
                               std::span<const AnnotationRecord> annotations,
                               PromptStrategy strategy, int max_depth) {
    StrategyReport r;
    r.strategy = strategy;
    r.accuracy = accuracy(records, annotations, strategy);
    r.error_by_category = error_distribution(records, annotations, strategy);
    r.error_by_level = errors_by_level(records, annotations, strategy, max_depth);
    auto t = tally(records, annotations, strategy);
    r.n_subtopics = t.n_items;
    r.n_annotators = t.labels.size();
    return r;
}

// ---------------------------------------------------------------------------

std::vector<PromptStrategy> annotated_strategies(std::span<const GenerationRecord> records,
                                                 std::span<const AnnotationRecord> annotations) {
    std::unordered_map<std::string, PromptStrategy> strategy_of;
    for (const auto& r : records) strategy_of[r.record_id] = r.strategy;
    std::set<PromptStrategy> seen;
    for (const auto& a : annotations) {
        if (auto it = strategy_of.find(a.record_id); it != strategy_of.end()) seen.insert(it->second);
    }
    std::vector<PromptStrategy> out;
    for (auto s : kAllStrategies) {
        if (seen.count(s)) out.push_back(s);
    }
    return out;
}

AgreementReport agreement_report(
    const std::map<PromptStrategy, std::vector<AnnotationRecord>>& by_strategy) {
    if (by_strategy.empty()) throw Error(ErrorKind::InvalidArgument, "agreement needs annotations");
    AgreementReport report;
    double total = 0.0;
    for (const auto& [strategy, annotations] : by_strategy) {
        std::map<std::string, std::map<std::pair<std::string, int>, AnnotationLabel>> per_annotator;
        for (const auto& a : annotations) {
            per_annotator[a.annotator_id][{a.record_id, a.subtopic_index}] = a.label;
        }
        if (per_annotator.size() < 2) {
            throw Error(ErrorKind::InvalidArgument,
                        "agreement needs at least two annotators for strategy " +
                            std::string(strategy_key(strategy)));
        }
        double strategy_sum = 0.0;
        std::size_t pairs = 0;
        for (auto a = per_annotator.begin(); a != per_annotator.end(); ++a) {
            for (auto b = std::next(a); b != per_annotator.end(); ++b) {
                std::vector<MissingAnnotation> missing;
                std::vector<AnnotationLabel> la;
                std::vector<AnnotationLabel> lb;
                for (const auto& [item, label] : a->second) {
                    auto it = b->second.find(item);
                    if (it == b->second.end()) {
                        missing.push_back({item.first, item.second, b->first});
                        continue;
                    }
                    la.push_back(label);
                    lb.push_back(it->second);
                }
                for (const auto& [item, label] : b->second) {
                    if (!a->second.count(item)) missing.push_back({item.first, item.second, a->first});
                }
                if (!missing.empty()) throw IncompleteAnnotationError(std::move(missing));
                double k = cohen_kappa(la, lb);
                report.assignments.push_back({strategy, a->first, b->first, k, la.size()});
                strategy_sum += k;
                total += k;
                ++pairs;
            }
        }
        report.per_strategy[strategy] = strategy_sum / static_cast<double>(pairs);
    }
    if (!report.assignments.empty()) {
        report.average_kappa = total / static_cast<double>(report.assignments.size());
    }
    return report;
}

AgreementReport agreement_report(std::span<const GenerationRecord> records,
                                 std::span<const AnnotationRecord> annotations) {
    check_annotation_targets(records, annotations);
    std::unordered_map<std::string, PromptStrategy> strategy_of;
    for (const auto& r : records) strategy_of[r.record_id] = r.strategy;
    std::map<PromptStrategy, std::vector<AnnotationRecord>> grouped;
    for (const auto& a : annotations) grouped[strategy_of.at(a.record_id)].push_back(a);
    return agreement_report(grouped);
}

}  // namespace scopetree
