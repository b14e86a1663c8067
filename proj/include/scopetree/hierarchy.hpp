#pragma once

#include <compare>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scopetree {

inline constexpr int kDefaultMaxDepth = 5;

struct NodeId {
    std::uint64_t value = 0;

    explicit operator bool() const noexcept { return value != 0; }
    auto operator<=>(const NodeId&) const = default;
};

/// Root-to-target label sequence. The level of a topic is the length of its
/// path, so the root sits at level 1.
class TopicPath {
public:
    TopicPath() = default;
    explicit TopicPath(std::vector<std::string> labels) : labels_(std::move(labels)) {}
    TopicPath(std::initializer_list<std::string> labels) : labels_(labels) {}

    /// Splits "A/B/C" into three labels, trimming each.
    static TopicPath parse(std::string_view slash_separated);

    const std::vector<std::string>& labels() const noexcept { return labels_; }
    bool empty() const noexcept { return labels_.empty(); }
    std::size_t size() const noexcept { return labels_.size(); }

    const std::string& root() const;
    const std::string& current() const;
    /// Every label except the last.
    std::vector<std::string> ancestors() const;
    TopicPath child(std::string label) const;

    std::string to_string() const;

    bool operator==(const TopicPath&) const = default;

private:
    std::vector<std::string> labels_;
};

/// Number of labels in `path`; throws InvalidPath when empty.
int level_of(const TopicPath& path);

struct LevelDefinition {
    int level = 0;
    std::string definition;
    std::string example;
};

/// The five-level specificity ladder, from domain of study down to specific
/// implementation, with Computer Science examples.
const std::vector<LevelDefinition>& default_level_definitions();

/// Problems with a level table: gaps, duplicates, or levels outside
/// [1, max_depth]. Empty when the table covers exactly {1..max_depth}.
std::vector<std::string> check_level_definitions(std::span<const LevelDefinition> levels,
                                                 int max_depth);

struct TopicNode {
    NodeId id;
    std::string label;
    std::optional<NodeId> parent;
    std::vector<NodeId> children;
};

struct LabelRejection {
    enum class Reason { Duplicate, Empty };

    std::string label;
    Reason reason = Reason::Duplicate;
    /// Sibling the label collided with (absent for empty labels).
    std::optional<NodeId> conflicts_with;
};

struct AddChildrenResult {
    std::vector<NodeId> added;
    std::vector<LabelRejection> rejected;
};

enum class ViolationKind {
    MissingRoot,
    MultipleRoots,
    EmptyLabel,
    DuplicateSibling,
    DepthOverflow,
    Orphan,
    BrokenLink,
    CrossBranchRepeat,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
    ViolationKind kind;
    std::vector<NodeId> nodes;
    std::string message;
};

/// Rooted tree of labeled topics. A node's level equals its depth + 1 and
/// never exceeds max_depth. Sibling labels are unique under
/// normalize_label(); stored labels keep their original casing. Child order
/// is insertion order.
///
/// Mutation requires exclusive access; const member functions may be called
/// concurrently.
class TopicTree {
public:
    explicit TopicTree(std::string root_label, int max_depth = kDefaultMaxDepth);

    /// Imports nodes without enforcing invariants. Used by loaders so that
    /// validate() can report problems in hand-edited documents.
    static TopicTree from_nodes(std::vector<TopicNode> nodes, int max_depth);

    int max_depth() const noexcept { return max_depth_; }
    NodeId root() const noexcept { return root_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    bool contains(NodeId id) const;
    const TopicNode& node(NodeId id) const;

    /// Root has depth 0.
    int depth(NodeId id) const;
    int level(NodeId id) const { return depth(id) + 1; }

    /// Labels are matched with normalize_label(), so lookups tolerate case
    /// and whitespace differences.
    std::optional<NodeId> find(const TopicPath& path) const;
    NodeId resolve(const TopicPath& path) const;
    TopicPath path_of(NodeId id) const;

    AddChildrenResult add_children(const TopicPath& parent, std::span<const std::string> labels);
    AddChildrenResult add_children(NodeId parent, std::span<const std::string> labels);

    /// Removes `id` and all its descendants. Removing the root is a Conflict.
    void remove_subtree(NodeId id);

    std::vector<NodeId> preorder() const;

    std::vector<Violation> validate() const;

    /// Labels that recur under different parents. Allowed, so reported as
    /// warnings rather than violations.
    std::vector<Violation> cross_branch_repeats() const;

private:
    TopicTree() = default;

    NodeId allocate();

    int max_depth_ = kDefaultMaxDepth;
    NodeId root_;
    std::uint64_t next_id_ = 1;
    std::map<std::uint64_t, TopicNode> nodes_;
};

}  // namespace scopetree
