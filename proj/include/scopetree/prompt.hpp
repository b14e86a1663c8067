#pragma once

#include "scopetree/hierarchy.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace scopetree {

/// How much ancestor context goes into a subtopic prompt.
enum class PromptStrategy {
    CurrentTopic,         ///< only the topic being expanded
    RootPlusCurrent,      ///< the level-1 domain plus the topic
    FullPathPlusCurrent,  ///< every ancestor plus the topic
};

inline constexpr std::array<PromptStrategy, 3> kAllStrategies = {
    PromptStrategy::CurrentTopic,
    PromptStrategy::RootPlusCurrent,
    PromptStrategy::FullPathPlusCurrent,
};

inline constexpr int kDefaultSubtopicCount = 5;

/// Short machine key: "current", "root", "full".
std::string_view strategy_key(PromptStrategy s);
/// Table heading: "Current Topic", "Root + Current Topic", "Full Path + Current Topic".
std::string_view strategy_display_name(PromptStrategy s);
/// Accepts the short key or the enum spelling ("CurrentTopic", ...).
std::optional<PromptStrategy> parse_strategy(std::string_view text);
/// Position in kAllStrategies; used for deterministic log ordering.
std::size_t strategy_index(PromptStrategy s);

/// Appended after the prompt sentence when PromptRequest::numbered_list_suffix is set.
inline constexpr std::string_view kNumberedListSuffix = "Respond with a numbered list only.";

struct PromptRequest {
    PromptStrategy strategy = PromptStrategy::CurrentTopic;
    TopicPath path;
    int k = kDefaultSubtopicCount;
    bool numbered_list_suffix = false;
};

/// "A", "A and B", "A, B, and C".
std::string join_context(std::span<const std::string> labels);

/// Renders one of the three templates. When the path is just the root, the
/// context-bearing strategies fall back to the CurrentTopic wording.
std::string render_prompt(const PromptRequest& req);

}  // namespace scopetree
