#include "scopetree/hierarchy.hpp"

#include "scopetree/error.hpp"
#include "scopetree/util.hpp"

#include <deque>
#include <set>
#include <unordered_map>

namespace scopetree {

TopicPath TopicPath::parse(std::string_view slash_separated) {
    std::vector<std::string> labels;
    for (auto& part : split(slash_separated, '/')) {
        labels.push_back(trim(part));
    }
    if (labels.size() == 1 && labels.front().empty()) labels.clear();
    return TopicPath(std::move(labels));
}

const std::string& TopicPath::root() const {
    if (labels_.empty()) throw Error(ErrorKind::InvalidPath, "empty topic path");
    return labels_.front();
}

const std::string& TopicPath::current() const {
    if (labels_.empty()) throw Error(ErrorKind::InvalidPath, "empty topic path");
    return labels_.back();
}

std::vector<std::string> TopicPath::ancestors() const {
    if (labels_.empty()) return {};
    return {labels_.begin(), labels_.end() - 1};
}

TopicPath TopicPath::child(std::string label) const {
    auto labels = labels_;
    labels.push_back(std::move(label));
    return TopicPath(std::move(labels));
}

std::string TopicPath::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (i) out += " / ";
        out += labels_[i];
    }
    return out;
}

int level_of(const TopicPath& path) {
    if (path.empty()) throw Error(ErrorKind::InvalidPath, "empty topic path has no level");
    return static_cast<int>(path.size());
}

const std::vector<LevelDefinition>& default_level_definitions() {
    static const std::vector<LevelDefinition> levels = {
        {1, "Topics related to domain areas of study", "Computer Science"},
        {2, "Subtopics that explore general topics", "Data Structures"},
        {3, "Subtopics that are general concepts", "Algorithms"},
        {4, "Subtopics exploring different use cases of general concepts", "Shortest Path Algorithms"},
        {5, "Subtopics that focus on specific implementations", "Dijkstra's algorithm"},
    };
    return levels;
}

std::vector<std::string> check_level_definitions(std::span<const LevelDefinition> levels,
                                                 int max_depth) {
    std::vector<std::string> problems;
    std::map<int, int> seen;
    for (const auto& def : levels) {
        if (def.level < 1 || def.level > max_depth) {
            problems.push_back("level " + std::to_string(def.level) + " outside [1, " +
                               std::to_string(max_depth) + "]");
        }
        if (++seen[def.level] == 2) {
            problems.push_back("level " + std::to_string(def.level) + " defined more than once");
        }
    }
    for (int level = 1; level <= max_depth; ++level) {
        if (!seen.count(level)) problems.push_back("level " + std::to_string(level) + " missing");
    }
    return problems;
}

std::string_view to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::MissingRoot: return "missing-root";
        case ViolationKind::MultipleRoots: return "multiple-roots";
        case ViolationKind::EmptyLabel: return "empty-label";
        case ViolationKind::DuplicateSibling: return "duplicate-sibling";
        case ViolationKind::DepthOverflow: return "depth-overflow";
        case ViolationKind::Orphan: return "orphan";
        case ViolationKind::BrokenLink: return "broken-link";
        case ViolationKind::CrossBranchRepeat: return "cross-branch-repeat";
    }
    return "unknown";
}

TopicTree::TopicTree(std::string root_label, int max_depth) : max_depth_(max_depth) {
    if (max_depth < 1) throw Error(ErrorKind::InvalidArgument, "max_depth must be at least 1");
    auto label = trim(root_label);
    if (label.empty()) throw Error(ErrorKind::InvalidArgument, "root label is empty");
    root_ = allocate();
    nodes_[root_.value] = TopicNode{root_, std::move(label), std::nullopt, {}};
}

TopicTree TopicTree::from_nodes(std::vector<TopicNode> nodes, int max_depth) {
    if (max_depth < 1) throw Error(ErrorKind::InvalidArgument, "max_depth must be at least 1");
    TopicTree tree;
    tree.max_depth_ = max_depth;
    for (auto& n : nodes) {
        if (!n.id) throw Error(ErrorKind::InvalidArgument, "node id 0 is reserved");
        if (tree.nodes_.count(n.id.value)) {
            throw Error(ErrorKind::InvalidArgument,
                        "duplicate node id " + std::to_string(n.id.value));
        }
        if (!n.parent && !tree.root_) tree.root_ = n.id;
        tree.next_id_ = std::max(tree.next_id_, n.id.value + 1);
        tree.nodes_[n.id.value] = std::move(n);
    }
    return tree;
}

NodeId TopicTree::allocate() { return NodeId{next_id_++}; }

bool TopicTree::contains(NodeId id) const { return nodes_.count(id.value) != 0; }

const TopicNode& TopicTree::node(NodeId id) const {
    auto it = nodes_.find(id.value);
    if (it == nodes_.end()) {
        throw Error(ErrorKind::UnknownTopic, "unknown node id " + std::to_string(id.value));
    }
    return it->second;
}

int TopicTree::depth(NodeId id) const {
    int d = 0;
    const TopicNode* cur = &node(id);
    while (cur->parent) {
        if (++d > static_cast<int>(nodes_.size())) {
            throw Error(ErrorKind::InvalidArgument, "parent links form a cycle");
        }
        cur = &node(*cur->parent);
    }
    return d;
}

std::optional<NodeId> TopicTree::find(const TopicPath& path) const {
    if (path.empty() || !root_ || !contains(root_)) return std::nullopt;
    const TopicNode* cur = &node(root_);
    if (normalize_label(cur->label) != normalize_label(path.labels().front())) return std::nullopt;
    for (std::size_t i = 1; i < path.size(); ++i) {
        auto key = normalize_label(path.labels()[i]);
        const TopicNode* next = nullptr;
        for (auto child : cur->children) {
            if (!contains(child)) continue;
            const auto& c = node(child);
            if (normalize_label(c.label) == key) {
                next = &c;
                break;
            }
        }
        if (!next) return std::nullopt;
        cur = next;
    }
    return cur->id;
}

NodeId TopicTree::resolve(const TopicPath& path) const {
    if (path.empty()) throw Error(ErrorKind::InvalidPath, "empty topic path");
    auto id = find(path);
    if (!id) throw Error(ErrorKind::UnknownTopic, "no topic at path: " + path.to_string());
    return *id;
}

TopicPath TopicTree::path_of(NodeId id) const {
    std::vector<std::string> labels;
    const TopicNode* cur = &node(id);
    labels.push_back(cur->label);
    while (cur->parent) {
        if (labels.size() > nodes_.size()) {
            throw Error(ErrorKind::InvalidArgument, "parent links form a cycle");
        }
        cur = &node(*cur->parent);
        labels.push_back(cur->label);
    }
    return TopicPath(std::vector<std::string>(labels.rbegin(), labels.rend()));
}

AddChildrenResult TopicTree::add_children(const TopicPath& parent,
                                          std::span<const std::string> labels) {
    return add_children(resolve(parent), labels);
}

AddChildrenResult TopicTree::add_children(NodeId parent, std::span<const std::string> labels) {
    if (!contains(parent)) {
        throw Error(ErrorKind::UnknownTopic, "unknown node id " + std::to_string(parent.value));
    }
    int parent_level = level(parent);
    if (parent_level >= max_depth_) {
        throw Error(ErrorKind::DepthExceeded,
                    "topic '" + node(parent).label + "' is at level " +
                        std::to_string(parent_level) + "; children would exceed max depth " +
                        std::to_string(max_depth_));
    }

    std::unordered_map<std::string, NodeId> taken;
    for (auto child : node(parent).children) {
        if (contains(child)) taken.emplace(normalize_label(node(child).label), child);
    }

    AddChildrenResult result;
    for (const auto& raw : labels) {
        auto label = trim(raw);
        if (label.empty()) {
            result.rejected.push_back({raw, LabelRejection::Reason::Empty, std::nullopt});
            continue;
        }
        auto key = normalize_label(label);
        if (auto it = taken.find(key); it != taken.end()) {
            result.rejected.push_back({raw, LabelRejection::Reason::Duplicate, it->second});
            continue;
        }
        NodeId id = allocate();
        nodes_[id.value] = TopicNode{id, label, parent, {}};
        nodes_[parent.value].children.push_back(id);
        taken.emplace(std::move(key), id);
        result.added.push_back(id);
    }
    return result;
}

void TopicTree::remove_subtree(NodeId id) {
    const auto& target = node(id);
    if (!target.parent || id == root_) {
        throw Error(ErrorKind::Conflict, "the root topic cannot be removed");
    }
    std::vector<NodeId> doomed{id};
    for (std::size_t i = 0; i < doomed.size(); ++i) {
        auto it = nodes_.find(doomed[i].value);
        if (it == nodes_.end()) continue;
        for (auto c : it->second.children) doomed.push_back(c);
    }
    auto parent_it = nodes_.find(target.parent->value);
    if (parent_it != nodes_.end()) {
        auto& siblings = parent_it->second.children;
        std::erase(siblings, id);
    }
    for (auto d : doomed) nodes_.erase(d.value);
}

std::vector<NodeId> TopicTree::preorder() const {
    std::vector<NodeId> order;
    if (!root_ || !contains(root_)) return order;
    std::set<std::uint64_t> seen;
    std::vector<NodeId> stack{root_};
    while (!stack.empty()) {
        auto id = stack.back();
        stack.pop_back();
        if (!contains(id) || !seen.insert(id.value).second) continue;
        order.push_back(id);
        const auto& kids = node(id).children;
        for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
    }
    return order;
}

std::vector<Violation> TopicTree::validate() const {
    std::vector<Violation> out;

    std::vector<NodeId> parentless;
    for (const auto& [key, n] : nodes_) {
        if (!n.parent) parentless.push_back(n.id);
        if (n.parent && !contains(*n.parent)) {
            out.push_back({ViolationKind::BrokenLink, {n.id},
                           "node " + std::to_string(key) + " references missing parent " +
                               std::to_string(n.parent->value)});
        }
        for (auto c : n.children) {
            if (!contains(c)) {
                out.push_back({ViolationKind::BrokenLink, {n.id},
                               "node " + std::to_string(key) + " lists missing child " +
                                   std::to_string(c.value)});
            } else if (node(c).parent != n.id) {
                out.push_back({ViolationKind::BrokenLink, {n.id, c},
                               "child " + std::to_string(c.value) +
                                   " does not point back to parent " + std::to_string(key)});
            }
        }
    }
    if (!root_ || !contains(root_)) {
        out.push_back({ViolationKind::MissingRoot, {}, "tree has no root"});
    }
    if (parentless.size() > 1) {
        out.push_back({ViolationKind::MultipleRoots, parentless,
                       std::to_string(parentless.size()) + " nodes have no parent"});
    }

    // Walk from the root; anything not reached is orphaned.
    std::set<std::uint64_t> reached;
    std::deque<std::pair<NodeId, int>> queue;
    if (root_ && contains(root_)) queue.emplace_back(root_, 1);
    while (!queue.empty()) {
        auto [id, level] = queue.front();
        queue.pop_front();
        if (!reached.insert(id.value).second) continue;
        const auto& n = node(id);
        if (trim(n.label).empty()) {
            out.push_back({ViolationKind::EmptyLabel, {id},
                           "node " + std::to_string(id.value) + " has an empty label"});
        }
        if (level > max_depth_) {
            out.push_back({ViolationKind::DepthOverflow, {id},
                           "node " + std::to_string(id.value) + " ('" + n.label + "') is at level " +
                               std::to_string(level) + " beyond max depth " +
                               std::to_string(max_depth_)});
        }
        std::map<std::string, std::vector<NodeId>> by_key;
        for (auto c : n.children) {
            if (!contains(c)) continue;
            by_key[normalize_label(node(c).label)].push_back(c);
            if (node(c).parent == id) queue.emplace_back(c, level + 1);
        }
        for (auto& [key, ids] : by_key) {
            if (ids.size() > 1 && !key.empty()) {
                out.push_back({ViolationKind::DuplicateSibling, ids,
                               "duplicate sibling label '" + key + "' under node " +
                                   std::to_string(id.value)});
            }
        }
    }
    for (const auto& [key, n] : nodes_) {
        if (!reached.count(key) && n.parent) {
            out.push_back({ViolationKind::Orphan, {n.id},
                           "node " + std::to_string(key) + " is not reachable from the root"});
        }
    }
    return out;
}

std::vector<Violation> TopicTree::cross_branch_repeats() const {
    std::map<std::string, std::vector<NodeId>> by_key;
    for (auto id : preorder()) by_key[normalize_label(node(id).label)].push_back(id);
    std::vector<Violation> out;
    for (auto& [key, ids] : by_key) {
        if (ids.size() < 2) continue;
        std::set<std::uint64_t> parents;
        for (auto id : ids) parents.insert(node(id).parent ? node(id).parent->value : 0);
        if (parents.size() > 1) {
            out.push_back({ViolationKind::CrossBranchRepeat, ids,
                           "label '" + key + "' appears under " + std::to_string(parents.size()) +
                               " different parents"});
        }
    }
    return out;
}

}  // namespace scopetree
