#pragma once

#include "scopetree/error.hpp"
#include "scopetree/prompt.hpp"
#include "scopetree/run.hpp"

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scopetree {

/// Rubric outcome for one generated subtopic. Good means properly scoped;
/// the other five are the error categories.
enum class AnnotationLabel { Good, Repetitive, TooSpecific, TooGeneral, Tangential, Unrelated };

inline constexpr std::array<AnnotationLabel, 6> kAllLabels = {
    AnnotationLabel::Good,       AnnotationLabel::Repetitive, AnnotationLabel::TooSpecific,
    AnnotationLabel::TooGeneral, AnnotationLabel::Tangential, AnnotationLabel::Unrelated,
};

/// Error categories in report column order.
inline constexpr std::array<AnnotationLabel, 5> kErrorCategories = {
    AnnotationLabel::TooGeneral, AnnotationLabel::TooSpecific, AnnotationLabel::Unrelated,
    AnnotationLabel::Tangential, AnnotationLabel::Repetitive,
};

/// Canonical CSV spelling: "Good", "TooGeneral", ...
std::string_view to_string(AnnotationLabel l);
/// Column heading: "Properly Scoped", "Too General", ...
std::string_view label_display_name(AnnotationLabel l);
/// Accepts the canonical spellings only.
std::optional<AnnotationLabel> parse_label(std::string_view text);

struct AnnotationRecord {
    std::string record_id;
    int subtopic_index = 0;
    std::string annotator_id;
    AnnotationLabel label = AnnotationLabel::Good;

    bool operator==(const AnnotationRecord&) const = default;
};

inline constexpr std::string_view kAnnotationCsvHeader = "record_id,subtopic_index,annotator_id,label";

/// Parses `record_id,subtopic_index,annotator_id,label` CSV. Fields may be
/// double-quoted. Throws Format naming the line for structural problems and
/// for labels outside the six canonical values, and InvalidArgument for a
/// repeated (record, subtopic, annotator) key.
std::vector<AnnotationRecord> parse_annotations_csv(std::string_view text);
std::string emit_annotations_csv(std::span<const AnnotationRecord> annotations);

/// Inserts or replaces by (record, subtopic, annotator); returns how many
/// entries were inserted or changed.
std::size_t upsert_annotations(std::vector<AnnotationRecord>& into,
                               std::span<const AnnotationRecord> updates);

/// Throws InvalidArgument for annotations that do not address a parsed
/// subtopic of an ok record.
void check_annotation_targets(std::span<const GenerationRecord> records,
                              std::span<const AnnotationRecord> annotations);

struct MissingAnnotation {
    std::string record_id;
    int subtopic_index = 0;
    std::string annotator_id;

    bool operator==(const MissingAnnotation&) const = default;
};

class IncompleteAnnotationError : public Error {
public:
    explicit IncompleteAnnotationError(std::vector<MissingAnnotation> missing);

    const std::vector<MissingAnnotation>& missing() const noexcept { return missing_; }

private:
    std::vector<MissingAnnotation> missing_;
};

/// Two-rater chance-corrected agreement, (p_o - p_e) / (1 - p_e) with p_e
/// from each rater's marginal label frequencies. Both raters constant and
/// equal gives 1. Throws InvalidArgument on empty or unequal inputs.
double cohen_kappa(std::span<const AnnotationLabel> a, std::span<const AnnotationLabel> b);

/// Metrics below look at the parsed subtopics of ok records for `strategy`
/// and need a label from every annotator who judged any record of that
/// strategy (IncompleteAnnotationError otherwise). Each annotator's
/// fractions are taken over all judged subtopics, then averaged unweighted
/// across annotators.
double accuracy(std::span<const GenerationRecord> records,
                std::span<const AnnotationRecord> annotations, PromptStrategy strategy);

/// Category -> fraction of all judged subtopics. Sums with accuracy to 1.
std::map<AnnotationLabel, double> error_distribution(std::span<const GenerationRecord> records,
                                                     std::span<const AnnotationRecord> annotations,
                                                     PromptStrategy strategy);

/// Output level (2..max_depth) -> fraction of all judged subtopics that are
/// errors at that level.
std::map<int, double> errors_by_level(std::span<const GenerationRecord> records,
                                      std::span<const AnnotationRecord> annotations,
                                      PromptStrategy strategy, int max_depth = kDefaultMaxDepth);

struct StrategyReport {
    PromptStrategy strategy = PromptStrategy::CurrentTopic;
    double accuracy = 0.0;
    std::map<AnnotationLabel, double> error_by_category;
    std::map<int, double> error_by_level;
    std::size_t n_subtopics = 0;
    std::size_t n_annotators = 0;
};

/// Strategies, in canonical order, with at least one annotation.
std::vector<PromptStrategy> annotated_strategies(std::span<const GenerationRecord> records,
                                                 std::span<const AnnotationRecord> annotations);

StrategyReport strategy_report(std::span<const GenerationRecord> records,
                               std::span<const AnnotationRecord> annotations,
                               PromptStrategy strategy, int max_depth = kDefaultMaxDepth);

struct PairAgreement {
    PromptStrategy strategy = PromptStrategy::CurrentTopic;
    std::string annotator_a;
    std::string annotator_b;
    double kappa = 0.0;
    std::size_t n_items = 0;
};

struct AgreementReport {
    /// One entry per (strategy, annotator pair).
    std::vector<PairAgreement> assignments;
    /// Mean over the pairs of each strategy.
    std::map<PromptStrategy, double> per_strategy;
    /// Unweighted mean over all assignments.
    double average_kappa = 0.0;
};

/// Pairs up annotators within each strategy by (record, subtopic). Throws
/// InvalidArgument when a strategy has fewer than two annotators and
/// IncompleteAnnotationError when a pair did not label the same items.
AgreementReport agreement_report(
    const std::map<PromptStrategy, std::vector<AnnotationRecord>>& by_strategy);

/// Groups annotations by their record's strategy, then as above.
AgreementReport agreement_report(std::span<const GenerationRecord> records,
                                 std::span<const AnnotationRecord> annotations);

}  // namespace scopetree
