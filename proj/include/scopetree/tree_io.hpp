#pragma once

#include "scopetree/hierarchy.hpp"

#include <json.hpp>

#include <string>
#include <string_view>

namespace scopetree {

using Json = nlohmann::ordered_json;

/// Parses JSON text, turning syntax errors into Format errors that carry a
/// 1-based line and column.
Json parse_json_text(std::string_view text, std::string_view what = "document");

/// Hierarchy document:
///
///   { "max_depth": 5,
///     "root": { "label": "...", "children": [ { "label": "..." }, ... ] } }
///
/// Leaves omit "children". With `with_ids` each node also carries its "id",
/// which the service store uses to keep node ids stable across restarts.
Json tree_to_json(const TopicTree& tree, bool with_ids = false);

/// Builds a tree from a document without enforcing invariants (see
/// TopicTree::validate). Throws Format on structural problems such as a
/// missing label or a non-array "children". Unknown top-level keys are
/// ignored so that suite documents load through the same path.
TopicTree tree_from_json(const Json& doc);

/// Canonical text: two-space indentation, trailing newline.
std::string emit_tree_document(const TopicTree& tree, bool with_ids = false);
TopicTree parse_tree_document(std::string_view text);

std::string dump_canonical(const Json& doc);
/// Single-line form for JSON-lines logs. Invalid UTF-8 is replaced, never thrown.
std::string dump_line(const Json& doc);

}  // namespace scopetree
