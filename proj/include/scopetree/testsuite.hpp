#pragma once

#include "scopetree/hierarchy.hpp"
#include "scopetree/tree_io.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace scopetree {

/// A hierarchy whose nodes at levels 1..max_depth-1 are prompting targets.
/// Immutable after load.
struct TestSuite {
    std::string name;
    bool reconstruction = false;
    std::string source;
    TopicTree tree{"root"};
    /// Pre-order list of every node at level < max_depth.
    std::vector<TopicPath> prompt_targets;
};

struct SuiteSummary {
    std::string name;
    std::size_t total_nodes = 0;
    std::map<int, std::size_t> nodes_per_level;
    std::map<int, std::size_t> targets_per_level;
    std::size_t prompt_targets = 0;
    int k = 5;
    std::size_t expected_generations_per_strategy = 0;
};

std::vector<TopicPath> derive_prompt_targets(const TopicTree& tree);

/// Suite document = hierarchy document plus "name", "reconstruction" and the
/// optional "source" and "targets_per_level" header fields. A declared
/// "targets_per_level" must match the tree. Throws Format (with line info for
/// syntax errors) or SuiteInvalid listing every violation.
TestSuite load_suite(std::string_view document);
TestSuite load_suite_file(const std::string& path);

Json suite_to_json(const TestSuite& suite);
/// Canonical form; load_suite(emit_suite(s)) re-emits byte-identically.
std::string emit_suite(const TestSuite& suite);

SuiteSummary describe_suite(const TestSuite& suite, int k = 5);

/// Canonical text of the bundled Computer Science suite.
std::string_view bundled_suite_document();
TestSuite bundled_suite();

/// SHA-256 of the canonical emission, used to tie runs to suite contents.
std::string suite_content_hash(const TestSuite& suite);

}  // namespace scopetree
