#include "scopetree/testsuite.hpp"

#include "scopetree/error.hpp"
#include "scopetree/util.hpp"

namespace scopetree {

namespace detail {
extern const std::string_view kBundledSuiteDocument;
}

namespace {

std::map<int, std::size_t> count_targets(const std::vector<TopicPath>& targets) {
    std::map<int, std::size_t> counts;
    for (const auto& t : targets) ++counts[level_of(t)];
    return counts;
}

}  // namespace

std::vector<TopicPath> derive_prompt_targets(const TopicTree& tree) {
    std::vector<TopicPath> targets;
    for (auto id : tree.preorder()) {
        if (tree.level(id) < tree.max_depth()) targets.push_back(tree.path_of(id));
    }
    return targets;
}

TestSuite load_suite(std::string_view document) {
    auto doc = parse_json_text(document, "suite document");
    if (!doc.is_object()) throw Error(ErrorKind::Format, "suite document must be an object");

    TestSuite suite;
    try {
        suite.name = doc.value("name", std::string{});
        suite.reconstruction = doc.value("reconstruction", false);
        suite.source = doc.value("source", std::string{});
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, std::string("suite header field has the wrong type: ") + e.what());
    }
    if (trim(suite.name).empty()) throw Error(ErrorKind::Format, "suite document needs a \"name\"");

    suite.tree = tree_from_json(doc);
    auto violations = suite.tree.validate();
    if (!violations.empty()) {
        std::string msg = "suite '" + suite.name + "' violates hierarchy invariants:";
        for (const auto& v : violations) msg += "\n  " + std::string(to_string(v.kind)) + ": " + v.message;
        throw Error(ErrorKind::SuiteInvalid, msg);
    }
    suite.prompt_targets = derive_prompt_targets(suite.tree);

    if (auto declared = doc.find("targets_per_level"); declared != doc.end()) {
        if (!declared->is_object()) {
            throw Error(ErrorKind::Format, "\"targets_per_level\" must be an object");
        }
        std::map<int, std::size_t> want;
        for (auto it = declared->begin(); it != declared->end(); ++it) {
            int level = 0;
            try {
                level = std::stoi(it.key());
            } catch (const std::exception&) {
                throw Error(ErrorKind::Format, "bad level key '" + it.key() + "' in targets_per_level");
            }
            if (!it.value().is_number_unsigned()) {
                throw Error(ErrorKind::Format, "targets_per_level values must be non-negative integers");
            }
            if (auto n = it.value().get<std::size_t>(); n > 0) want[level] = n;
        }
        if (want != count_targets(suite.prompt_targets)) {
            throw Error(ErrorKind::SuiteInvalid,
                        "suite '" + suite.name + "' declares targets_per_level that do not match its tree");
        }
    }
    return suite;
}

TestSuite load_suite_file(const std::string& path) { return load_suite(read_file(path)); }

Json suite_to_json(const TestSuite& suite) {
    Json doc = Json::object();
    doc["name"] = suite.name;
    doc["reconstruction"] = suite.reconstruction;
    if (!suite.source.empty()) doc["source"] = suite.source;
    Json counts = Json::object();
    for (auto [level, n] : count_targets(suite.prompt_targets)) counts[std::to_string(level)] = n;
    doc["targets_per_level"] = std::move(counts);
    auto tree = tree_to_json(suite.tree);
    doc["max_depth"] = tree["max_depth"];
    doc["root"] = std::move(tree["root"]);
    return doc;
}

std::string emit_suite(const TestSuite& suite) { return dump_canonical(suite_to_json(suite)); }

SuiteSummary describe_suite(const TestSuite& suite, int k) {
    if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
    SuiteSummary s;
    s.name = suite.name;
    s.k = k;
    for (auto id : suite.tree.preorder()) {
        ++s.total_nodes;
        ++s.nodes_per_level[suite.tree.level(id)];
    }
    s.targets_per_level = count_targets(suite.prompt_targets);
    s.prompt_targets = suite.prompt_targets.size();
    s.expected_generations_per_strategy = static_cast<std::size_t>(k) * s.prompt_targets;
    return s;
}

std::string_view bundled_suite_document() { return detail::kBundledSuiteDocument; }

TestSuite bundled_suite() { return load_suite(bundled_suite_document()); }

std::string suite_content_hash(const TestSuite& suite) { return sha256_hex(emit_suite(suite)); }

}  // namespace scopetree
