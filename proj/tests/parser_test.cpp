#include "scopetree/subtopic_parser.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace scopetree;

using Labels = std::vector<std::string>;

TEST(ParseSubtopics, NumberedList) {
    auto r = parse_subtopics(
        "1. Kruskal's Algorithm\n2. Prim's Algorithm\n3. Borůvka's Algorithm\n4. Reverse-Delete Algorithm\n"
        "5. Parallel MST Algorithms",
        5);
    EXPECT_EQ(r.status, ParseStatus::Ok);
    EXPECT_EQ(r.labels, (Labels{"Kruskal's Algorithm", "Prim's Algorithm", "Borůvka's Algorithm",
                                "Reverse-Delete Algorithm", "Parallel MST Algorithms"}));
}

TEST(ParseSubtopics, BoldWithDefinition) {
    auto r = parse_subtopics("- **Dijkstra's algorithm**: classic single-source method", 1);
    EXPECT_EQ(r.status, ParseStatus::Ok);
    EXPECT_EQ(r.labels, (Labels{"Dijkstra's algorithm"}));
}

TEST(ParseSubtopics, RefusalIsParseFailure) {
    auto r = parse_subtopics("Sure! Here are some ideas.", 5);
    EXPECT_EQ(r.status, ParseStatus::ParseFailure);
    EXPECT_TRUE(r.labels.empty());
    EXPECT_EQ(r.raw, "Sure! Here are some ideas.");
}

TEST(ParseSubtopics, CountMismatchKeepsLabels) {
    auto r = parse_subtopics("1. A\n2. B\n3. C\n4. D", 5);
    EXPECT_EQ(r.status, ParseStatus::CountMismatch);
    EXPECT_EQ(r.labels, (Labels{"A", "B", "C", "D"}));
}

TEST(ParseSubtopics, DashSeparators) {
    auto r = parse_subtopics("* Heaps \xE2\x80\x93 priority queues\n\xE2\x80\xA2 Tries \xE2\x80\x94 prefix trees", 2);
    EXPECT_EQ(r.labels, (Labels{"Heaps", "Tries"}));
    // A hyphen inside a name is not a separator.
    EXPECT_EQ(parse_subtopics("1. Reverse-Delete Algorithm", 1).labels, (Labels{"Reverse-Delete Algorithm"}));
}

TEST(ParseSubtopics, MarkersNeedWhitespace) {
    auto r = parse_subtopics("1.Dense\n-dash\n**Heading**\n2) Real item\n", 1);
    EXPECT_EQ(r.labels, (Labels{"Real item"}));
}

TEST(ParseSubtopics, CrlfAndIndentation) {
    auto r = parse_subtopics("  1. Alpha.\r\n\t2. _Beta_\r\n", 2);
    EXPECT_EQ(r.labels, (Labels{"Alpha", "Beta"}));
}

TEST(ParseSubtopics, OnlyOneTrailingPeriodStripped) {
    EXPECT_EQ(parse_subtopics("- Etc..", 1).labels, (Labels{"Etc."}));
}

TEST(ParseSubtopics, EmptyInput) {
    EXPECT_EQ(parse_subtopics("", 5).status, ParseStatus::ParseFailure);
    EXPECT_EQ(parse_subtopics("-   \n1. **", 5).status, ParseStatus::ParseFailure);
}

// Marker style never changes the labels.
TEST(ParseSubtopicsProperty, MarkerStyleIrrelevant) {
    std::mt19937 rng(99);
    const std::vector<std::string> words{"graph", "tree", "hash", "Heap", "B+ tree", "Bloom filter", "trie", "deque"};
    for (int round = 0; round < 200; ++round) {
        int k = 1 + static_cast<int>(rng() % 8);
        Labels expected;
        for (int i = 0; i < k; ++i) expected.push_back(words[rng() % words.size()] + " " + std::to_string(i));
        for (int style = 0; style < 5; ++style) {
            std::string raw = "Here you go:\n";
            for (int i = 0; i < k; ++i) {
                switch (style) {
                    case 0: raw += std::to_string(i + 1) + ". "; break;
                    case 1: raw += std::to_string(i + 1) + ") "; break;
                    case 2: raw += "- "; break;
                    case 3: raw += "* "; break;
                    default: raw += "\xE2\x80\xA2 "; break;
                }
                raw += expected[i] + "\n";
            }
            auto r = parse_subtopics(raw, k);
            EXPECT_EQ(r.status, ParseStatus::Ok);
            EXPECT_EQ(r.labels, expected);
        }
    }
}

TEST(ParseSubtopicsProperty, TotalOverRandomBytes) {
    std::mt19937 rng(5);
    for (int i = 0; i < 2000; ++i) {
        std::string raw(rng() % 200, '\0');
        for (auto& c : raw) c = static_cast<char>(rng() % 256);
        auto r = parse_subtopics(raw, 5);
        if (r.status == ParseStatus::ParseFailure) {
            EXPECT_TRUE(r.labels.empty());
        } else {
            EXPECT_FALSE(r.labels.empty());
            for (const auto& l : r.labels) EXPECT_FALSE(l.empty());
        }
    }
}
