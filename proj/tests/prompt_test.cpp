#include "scopetree/error.hpp"
#include "scopetree/prompt.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace scopetree;

namespace {

std::string render(PromptStrategy s, TopicPath path, int k = 5, bool suffix = false) {
    return render_prompt(PromptRequest{s, std::move(path), k, suffix});
}

const TopicPath kShortestPath{"computer science", "data structures", "graph algorithms",
                              "shortest path algorithms"};

}  // namespace

TEST(RenderPrompt, CurrentTopic) {
    EXPECT_EQ(render(PromptStrategy::CurrentTopic, kShortestPath), "List 5 subtopics of shortest path algorithms.");
}

TEST(RenderPrompt, RootPlusCurrent) {
    EXPECT_EQ(render(PromptStrategy::RootPlusCurrent, kShortestPath),
              "In computer science, list 5 subtopics of shortest path algorithms.");
}

TEST(RenderPrompt, FullPathPlusCurrent) {
    EXPECT_EQ(render(PromptStrategy::FullPathPlusCurrent, kShortestPath),
              "In computer science, data structures, and graph algorithms, list 5 subtopics of shortest path "
              "algorithms.");
}

TEST(RenderPrompt, RootOnlyDegradesToCurrentTopic) {
    for (auto s : kAllStrategies) {
        EXPECT_EQ(render(s, TopicPath{"Computer Science"}), "List 5 subtopics of Computer Science.");
    }
}

TEST(RenderPrompt, LengthTwoRootAndFullAgree) {
    TopicPath p{"Computer Science", "Databases"};
    EXPECT_EQ(render(PromptStrategy::RootPlusCurrent, p), render(PromptStrategy::FullPathPlusCurrent, p));
}

TEST(RenderPrompt, CasingPassesThrough) {
    EXPECT_EQ(render(PromptStrategy::RootPlusCurrent, TopicPath{"Computer Science", "Data Structures"}, 3),
              "In Computer Science, list 3 subtopics of Data Structures.");
}

TEST(RenderPrompt, OptionalSuffix) {
    EXPECT_EQ(render(PromptStrategy::CurrentTopic, TopicPath{"A", "B"}, 5, true),
              "List 5 subtopics of B. Respond with a numbered list only.");
}

TEST(RenderPrompt, Errors) {
    try {
        render(PromptStrategy::CurrentTopic, TopicPath{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidPath);
    }
    try {
        render(PromptStrategy::CurrentTopic, TopicPath{"A"}, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
    }
}

TEST(JoinContext, Forms) {
    std::vector<std::string> one{"computer science"};
    std::vector<std::string> two{"Computer Science", "Artificial Intelligence"};
    std::vector<std::string> three{"computer science", "data structures", "graph algorithms"};
    EXPECT_EQ(join_context(one), "computer science");
    EXPECT_EQ(join_context(two), "Computer Science and Artificial Intelligence");
    EXPECT_EQ(join_context(three), "computer science, data structures, and graph algorithms");
    try {
        join_context(std::vector<std::string>{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
    }
}

TEST(Strategies, KeysRoundTrip) {
    for (auto s : kAllStrategies) {
        EXPECT_EQ(parse_strategy(strategy_key(s)), s);
    }
    EXPECT_EQ(parse_strategy("FullPathPlusCurrent"), PromptStrategy::FullPathPlusCurrent);
    EXPECT_FALSE(parse_strategy("everything").has_value());
    EXPECT_EQ(strategy_display_name(PromptStrategy::RootPlusCurrent), "Root + Current Topic");
}

TEST(RenderPromptProperty, ShapeHoldsForRandomPaths) {
    std::mt19937 rng(7);
    for (int i = 0; i < 300; ++i) {
        std::vector<std::string> labels;
        int n = 1 + static_cast<int>(rng() % 5);
        for (int j = 0; j < n; ++j) labels.push_back("topic " + std::to_string(rng() % 100));
        int k = 1 + static_cast<int>(rng() % 9);
        for (auto s : kAllStrategies) {
            auto text = render(s, TopicPath(labels), k);
            EXPECT_EQ(text, render(s, TopicPath(labels), k));
            EXPECT_EQ(text.back(), '.');
            auto needle = "list " + std::to_string(k) + " subtopics of";
            bool shaped = text.find(needle) != std::string::npos ||
                          text.rfind("List " + std::to_string(k) + " subtopics of", 0) == 0;
            EXPECT_TRUE(shaped) << text;
        }
    }
}
