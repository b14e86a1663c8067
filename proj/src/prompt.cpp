#include "scopetree/prompt.hpp"

#include "scopetree/error.hpp"

namespace scopetree {

std::string_view strategy_key(PromptStrategy s) {
    switch (s) {
        case PromptStrategy::CurrentTopic: return "current";
        case PromptStrategy::RootPlusCurrent: return "root";
        case PromptStrategy::FullPathPlusCurrent: return "full";
    }
    return "current";
}

std::string_view strategy_display_name(PromptStrategy s) {
    switch (s) {
        case PromptStrategy::CurrentTopic: return "Current Topic";
        case PromptStrategy::RootPlusCurrent: return "Root + Current Topic";
        case PromptStrategy::FullPathPlusCurrent: return "Full Path + Current Topic";
    }
    return "Current Topic";
}

std::optional<PromptStrategy> parse_strategy(std::string_view text) {
    if (text == "current" || text == "CurrentTopic") return PromptStrategy::CurrentTopic;
    if (text == "root" || text == "RootPlusCurrent") return PromptStrategy::RootPlusCurrent;
    if (text == "full" || text == "FullPathPlusCurrent") return PromptStrategy::FullPathPlusCurrent;
    return std::nullopt;
}

std::size_t strategy_index(PromptStrategy s) { return static_cast<std::size_t>(s); }

std::string join_context(std::span<const std::string> labels) {
    switch (labels.size()) {
        case 0: throw Error(ErrorKind::InvalidArgument, "join_context needs at least one label");
        case 1: return labels[0];
        case 2: return labels[0] + " and " + labels[1];
        default: break;
    }
    std::string out;
    for (std::size_t i = 0; i + 1 < labels.size(); ++i) {
        out += labels[i];
        out += ", ";
    }
    out += "and ";
    out += labels.back();
    return out;
}

std::string render_prompt(const PromptRequest& req) {
    if (req.path.empty()) throw Error(ErrorKind::InvalidPath, "cannot render a prompt for an empty path");
    if (req.k < 1) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");

    const auto count = std::to_string(req.k);
    const auto& current = req.path.current();
    std::string prompt;

    auto strategy = req.strategy;
    if (req.path.size() == 1) strategy = PromptStrategy::CurrentTopic;

    switch (strategy) {
        case PromptStrategy::CurrentTopic:
            prompt = "List " + count + " subtopics of " + current + ".";
            break;
        case PromptStrategy::RootPlusCurrent:
            prompt = "In " + req.path.root() + ", list " + count + " subtopics of " + current + ".";
            break;
        case PromptStrategy::FullPathPlusCurrent: {
            auto context = req.path.ancestors();
            prompt = "In " + join_context(context) + ", list " + count + " subtopics of " + current + ".";
            break;
        }
    }
    if (req.numbered_list_suffix) {
        prompt += ' ';
        prompt += kNumberedListSuffix;
    }
    return prompt;
}

}  // namespace scopetree
