#pragma once

#include "scopetree/gateway.hpp"
#include "scopetree/hierarchy.hpp"
#include "scopetree/prompt.hpp"
#include "scopetree/testsuite.hpp"
#include "scopetree/tree_io.hpp"

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace scopetree {

enum class RecordStatus { Ok, CountMismatch, ParseFailure, TransportError };

std::string_view to_string(RecordStatus s);
std::optional<RecordStatus> parse_record_status(std::string_view text);

/// One completion call and what came of it.
struct GenerationRecord {
    std::string record_id;
    std::string run_id;
    TopicPath target_path;
    PromptStrategy strategy = PromptStrategy::CurrentTopic;
    int k = kDefaultSubtopicCount;
    std::string prompt;
    bool numbered_list_suffix = false;
    std::string raw_response;
    std::vector<std::string> subtopics;
    ModelParams params;
    RecordStatus status = RecordStatus::Ok;
    /// Gateway or parse diagnostic; empty for ok records.
    std::string error;
    std::string timestamp;

    /// Level of the generated subtopics: one below the target.
    int output_level() const { return level_of(target_path) + 1; }

    bool operator==(const GenerationRecord&) const = default;
};

Json record_to_json(const GenerationRecord& r);
GenerationRecord record_from_json(const Json& j);

/// Strict: a count mismatch adds nothing to the tree. Lenient: whatever was
/// parsed is added.
enum class CountPolicy { Strict, Lenient };

std::string_view to_string(CountPolicy p);

/// Renders, completes and parses one prompt. Gateway failures become the
/// record's status; nothing here throws for a bad completion.
GenerationRecord generate_subtopics(const TopicPath& target, PromptStrategy strategy, int k,
                                    CompletionBackend& backend, const ModelParams& params,
                                    bool numbered_list_suffix = false);

struct ExpandOptions {
    int k = kDefaultSubtopicCount;
    ModelParams params;
    CountPolicy count_policy = CountPolicy::Lenient;
    bool numbered_list_suffix = false;
    std::string run_id = "interactive";
    /// Receives the record whatever its status.
    std::function<void(const GenerationRecord&)> sink;
};

struct ExpandResult {
    GenerationRecord record;
    std::vector<NodeId> new_nodes;
    std::vector<LabelRejection> rejected;
};

/// Interactive expansion of one node. Throws UnknownTopic / DepthExceeded
/// before any completion is requested.
ExpandResult expand_node(TopicTree& tree, const TopicPath& path, PromptStrategy strategy,
                         CompletionBackend& backend, const ExpandOptions& options = {});

struct RunManifest {
    std::string run_id;
    std::string suite_name;
    std::string suite_hash;
    int max_depth = kDefaultMaxDepth;
    std::size_t prompt_targets = 0;
    std::vector<PromptStrategy> strategies;
    int k = kDefaultSubtopicCount;
    ModelParams params;
    std::string mode;
    CountPolicy count_policy = CountPolicy::Strict;
    bool numbered_list_suffix = false;
    int parallelism = 1;
    std::string started;
    std::string finished;
    bool completed = false;
    std::map<RecordStatus, std::size_t> status_counts;

    bool operator==(const RunManifest&) const = default;
};

Json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const Json& j);

struct RunResult {
    RunManifest manifest;
    std::vector<GenerationRecord> records;
};

inline constexpr std::string_view kManifestFile = "manifest.json";
inline constexpr std::string_view kRecordsFile = "records.jsonl";
inline constexpr std::string_view kPartialRecordsFile = "records.partial.jsonl";

/// Runs live in `<root>/<run_id>/`: manifest.json, records.jsonl (one record
/// per line, UTF-8, LF) and, while a run is in flight, records.partial.jsonl
/// in completion order.
class RunStore {
public:
    explicit RunStore(std::string root);

    const std::string& root() const noexcept { return root_; }
    std::string run_dir(const std::string& run_id) const;

    void begin(const RunManifest& manifest);
    void append_partial(const std::string& run_id, const GenerationRecord& record);
    void persist(const RunResult& run);

    RunResult load(const std::string& run_id) const;
    bool exists(const std::string& run_id) const;
    std::vector<RunManifest> list() const;

private:
    std::string root_;
    std::mutex write_mutex_;
};

/// Writes manifest and final record log into `dir`.
void persist_run(const std::string& dir, const RunResult& run);
/// Loads a run directory. NotFound when absent; Load naming the 1-based line
/// for a corrupt record.
RunResult load_run_dir(const std::string& dir);
RunResult load_run(const std::string& store_root, const std::string& run_id);

struct ExperimentOptions {
    std::vector<PromptStrategy> strategies{kAllStrategies.begin(), kAllStrategies.end()};
    int k = kDefaultSubtopicCount;
    ModelParams params;
    CountPolicy count_policy = CountPolicy::Strict;
    bool numbered_list_suffix = false;
    int parallelism = 4;
    /// Generated when empty.
    std::string run_id;
    std::string mode;
};

std::string new_run_id();

/// One record per (strategy, prompt target), never touching the suite tree.
/// Calls run concurrently up to `parallelism`; the returned and persisted
/// records are ordered by (canonical strategy order, target pre-order index).
/// Only storage failures abort the run.
RunResult run_experiment(const TestSuite& suite, CompletionBackend& backend,
                         const ExperimentOptions& options, RunStore* store = nullptr);

}  // namespace scopetree
