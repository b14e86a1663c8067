#include "scopetree/error.hpp"
#include "scopetree/tree_io.hpp"

#include <gtest/gtest.h>

using namespace scopetree;

namespace {

TopicTree sample() {
    TopicTree t("Computer Science");
    std::vector<std::string> areas{"Data Structures", "Databases"};
    t.add_children(TopicPath{"Computer Science"}, areas);
    std::vector<std::string> algos{"Algorithms"};
    t.add_children(TopicPath{"Computer Science", "Data Structures"}, algos);
    return t;
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorKind::Storage;
}

}  // namespace

TEST(TreeDocument, RoundTripsByteIdentically) {
    auto text = emit_tree_document(sample());
    auto again = emit_tree_document(parse_tree_document(text));
    EXPECT_EQ(text, again);
    EXPECT_EQ(text.back(), '\n');
    EXPECT_EQ(text.find("\"id\""), std::string::npos);
}

TEST(TreeDocument, IdsAreStableWhenIncluded) {
    auto t = sample();
    auto ds = t.node(t.root()).children.front();
    t.remove_subtree(t.node(t.root()).children.back());
    auto reloaded = parse_tree_document(emit_tree_document(t, true));
    EXPECT_EQ(reloaded.path_of(ds), t.path_of(ds));
    EXPECT_EQ(emit_tree_document(reloaded, true), emit_tree_document(t, true));
}

TEST(TreeDocument, LeavesOmitChildren) {
    auto j = tree_to_json(sample());
    EXPECT_TRUE(j["root"].contains("children"));
    EXPECT_FALSE(j["root"]["children"][1].contains("children"));
    EXPECT_EQ(j["max_depth"], 5);
}

TEST(TreeDocument, SyntaxErrorCarriesLine) {
    try {
        parse_tree_document("{\n  \"root\": {\n    \"label\": \"x\",,\n  }\n}");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Format);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(TreeDocument, StructuralErrors) {
    EXPECT_EQ(kind_of([] { parse_tree_document(R"({"max_depth": 5})"); }), ErrorKind::Format);
    EXPECT_EQ(kind_of([] { parse_tree_document(R"({"root": {"name": "x"}})"); }), ErrorKind::Format);
    EXPECT_EQ(kind_of([] { parse_tree_document(R"({"root": {"label": "x", "children": {}}})"); }), ErrorKind::Format);
    EXPECT_EQ(kind_of([] { parse_tree_document(R"({"root": {"label": "x", "colour": 1}})"); }), ErrorKind::Format);
    EXPECT_EQ(kind_of([] { parse_tree_document(R"({"max_depth": 0, "root": {"label": "x"}})"); }),
              ErrorKind::Format);
    EXPECT_EQ(kind_of([] {
                  parse_tree_document(R"({"root": {"id": 1, "label": "x", "children": [{"label": "y"}]}})");
              }),
              ErrorKind::Format);
}

TEST(TreeDocument, InvariantViolationsSurviveLoadForValidate) {
    auto t = parse_tree_document(
        R"({"root": {"label": "CS", "children": [{"label": "DB"}, {"label": "db"}]}})");
    auto v = t.validate();
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, ViolationKind::DuplicateSibling);
}

TEST(DumpLine, ReplacesInvalidUtf8) {
    Json j{{"raw", std::string("ok \xff\xfe bytes")}};
    auto line = dump_line(j);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    EXPECT_NE(line.find("ok "), std::string::npos);
}
