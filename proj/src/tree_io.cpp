#include "scopetree/tree_io.hpp"

#include "scopetree/error.hpp"

#include <set>

namespace scopetree {

namespace {

std::string line_col(std::string_view text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

Json node_to_json(const TopicTree& tree, NodeId id, bool with_ids) {
    const auto& n = tree.node(id);
    Json j = Json::object();
    if (with_ids) j["id"] = id.value;
    j["label"] = n.label;
    if (!n.children.empty()) {
        Json kids = Json::array();
        for (auto c : n.children) kids.push_back(node_to_json(tree, c, with_ids));
        j["children"] = std::move(kids);
    }
    return j;
}

struct Importer {
    bool with_ids = false;
    std::uint64_t next = 1;
    std::set<std::uint64_t> used;
    std::vector<TopicNode> nodes;

    NodeId visit(const Json& j, std::optional<NodeId> parent, const std::string& where) {
        if (!j.is_object()) throw Error(ErrorKind::Format, where + ": node must be an object");
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it.key() != "label" && it.key() != "children" && it.key() != "id") {
                throw Error(ErrorKind::Format, where + ": unknown node field '" + it.key() + "'");
            }
        }
        auto label = j.find("label");
        if (label == j.end() || !label->is_string()) {
            throw Error(ErrorKind::Format, where + ": node needs a string \"label\"");
        }
        NodeId id;
        if (with_ids) {
            auto jid = j.find("id");
            if (jid == j.end() || !jid->is_number_unsigned() || jid->get<std::uint64_t>() == 0) {
                throw Error(ErrorKind::Format, where + ": node needs a positive integer \"id\"");
            }
            id = NodeId{jid->get<std::uint64_t>()};
            if (!used.insert(id.value).second) {
                throw Error(ErrorKind::Format,
                            where + ": duplicate node id " + std::to_string(id.value));
            }
        } else {
            if (j.contains("id")) {
                throw Error(ErrorKind::Format, where + ": ids must be given on every node or none");
            }
            id = NodeId{next++};
        }
        std::size_t slot = nodes.size();
        nodes.push_back(TopicNode{id, label->get<std::string>(), parent, {}});

        if (auto kids = j.find("children"); kids != j.end()) {
            if (!kids->is_array()) {
                throw Error(ErrorKind::Format, where + ": \"children\" must be an array");
            }
            std::vector<NodeId> child_ids;
            for (std::size_t i = 0; i < kids->size(); ++i) {
                child_ids.push_back(
                    visit((*kids)[i], id, where + ".children[" + std::to_string(i) + "]"));
            }
            nodes[slot].children = std::move(child_ids);
        }
        return id;
    }
};

}  // namespace

Json parse_json_text(std::string_view text, std::string_view what) {
    try {
        return Json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
        throw Error(ErrorKind::Format, std::string(what) + " is not valid JSON at " +
                                           line_col(text, byte) + ": " + e.what());
    }
}

Json tree_to_json(const TopicTree& tree, bool with_ids) {
    Json doc = Json::object();
    doc["max_depth"] = tree.max_depth();
    doc["root"] = node_to_json(tree, tree.root(), with_ids);
    return doc;
}

TopicTree tree_from_json(const Json& doc) {
    if (!doc.is_object()) throw Error(ErrorKind::Format, "hierarchy document must be an object");
    int max_depth = kDefaultMaxDepth;
    if (auto md = doc.find("max_depth"); md != doc.end()) {
        if (!md->is_number_integer() || md->get<int>() < 1) {
            throw Error(ErrorKind::Format, "\"max_depth\" must be a positive integer");
        }
        max_depth = md->get<int>();
    }
    auto root = doc.find("root");
    if (root == doc.end()) throw Error(ErrorKind::Format, "hierarchy document needs \"root\"");

    Importer importer;
    importer.with_ids = root->is_object() && root->contains("id");
    importer.visit(*root, std::nullopt, "root");
    return TopicTree::from_nodes(std::move(importer.nodes), max_depth);
}

std::string dump_canonical(const Json& doc) {
    return doc.dump(2, ' ', false, Json::error_handler_t::replace) + "\n";
}

std::string dump_line(const Json& doc) {
    return doc.dump(-1, ' ', false, Json::error_handler_t::replace);
}

std::string emit_tree_document(const TopicTree& tree, bool with_ids) {
    return dump_canonical(tree_to_json(tree, with_ids));
}

TopicTree parse_tree_document(std::string_view text) {
    return tree_from_json(parse_json_text(text, "hierarchy document"));
}

}  // namespace scopetree
