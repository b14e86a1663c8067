#include "scopetree/run.hpp"

#include "scopetree/error.hpp"
#include "scopetree/subtopic_parser.hpp"
#include "scopetree/util.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace scopetree {

namespace fs = std::filesystem;

std::string_view to_string(RecordStatus s) {
    switch (s) {
        case RecordStatus::Ok: return "ok";
        case RecordStatus::CountMismatch: return "count_mismatch";
        case RecordStatus::ParseFailure: return "parse_failure";
        case RecordStatus::TransportError: return "transport_error";
    }
    return "transport_error";
}

std::optional<RecordStatus> parse_record_status(std::string_view text) {
    if (text == "ok") return RecordStatus::Ok;
    if (text == "count_mismatch") return RecordStatus::CountMismatch;
    if (text == "parse_failure") return RecordStatus::ParseFailure;
    if (text == "transport_error") return RecordStatus::TransportError;
    return std::nullopt;
}

std::string_view to_string(CountPolicy p) {
    return p == CountPolicy::Strict ? "strict" : "lenient";
}

namespace {

Json params_json(const ModelParams& p) {
    return Json{{"model_name", p.model_name},
                {"temperature", p.temperature},
                {"max_output_tokens", p.max_output_tokens}};
}

ModelParams params_from(const Json& j) {
    ModelParams p;
    p.model_name = j.at("model_name").get<std::string>();
    p.temperature = j.at("temperature").get<double>();
    p.max_output_tokens = j.at("max_output_tokens").get<int>();
    return p;
}

PromptStrategy strategy_from(const Json& j) {
    auto s = parse_strategy(j.get<std::string>());
    if (!s) throw Error(ErrorKind::Format, "unknown strategy '" + j.get<std::string>() + "'");
    return *s;
}

std::vector<PromptStrategy> canonical_strategies(std::vector<PromptStrategy> strategies) {
    std::sort(strategies.begin(), strategies.end(),
              [](auto a, auto b) { return strategy_index(a) < strategy_index(b); });
    strategies.erase(std::unique(strategies.begin(), strategies.end()), strategies.end());
    return strategies;
}

std::string pad3(std::size_t n) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%03zu", n);
    return buf;
}

}  // namespace

Json record_to_json(const GenerationRecord& r) {
    Json j = Json::object();
    j["record_id"] = r.record_id;
    j["run_id"] = r.run_id;
    j["target_path"] = r.target_path.labels();
    j["strategy"] = strategy_key(r.strategy);
    j["k"] = r.k;
    j["prompt"] = r.prompt;
    j["numbered_list_suffix"] = r.numbered_list_suffix;
    j["raw_response"] = r.raw_response;
    j["subtopics"] = r.subtopics;
    j["params"] = params_json(r.params);
    j["status"] = to_string(r.status);
    j["error"] = r.error;
    j["timestamp"] = r.timestamp;
    return j;
}

GenerationRecord record_from_json(const Json& j) {
    try {
        GenerationRecord r;
        r.record_id = j.at("record_id").get<std::string>();
        r.run_id = j.at("run_id").get<std::string>();
        r.target_path = TopicPath(j.at("target_path").get<std::vector<std::string>>());
        r.strategy = strategy_from(j.at("strategy"));
        r.k = j.at("k").get<int>();
        r.prompt = j.at("prompt").get<std::string>();
        r.numbered_list_suffix = j.value("numbered_list_suffix", false);
        r.raw_response = j.at("raw_response").get<std::string>();
        r.subtopics = j.at("subtopics").get<std::vector<std::string>>();
        r.params = params_from(j.at("params"));
        auto status = parse_record_status(j.at("status").get<std::string>());
        if (!status) throw Error(ErrorKind::Format, "unknown record status");
        r.status = *status;
        r.error = j.value("error", std::string{});
        r.timestamp = j.at("timestamp").get<std::string>();
        if (r.target_path.empty()) throw Error(ErrorKind::Format, "record has an empty target_path");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, std::string("malformed generation record: ") + e.what());
    }
}

GenerationRecord generate_subtopics(const TopicPath& target, PromptStrategy strategy, int k,
                                    CompletionBackend& backend, const ModelParams& params,
                                    bool numbered_list_suffix) {
    GenerationRecord rec;
    rec.target_path = target;
    rec.strategy = strategy;
    rec.k = k;
    rec.params = params;
    rec.numbered_list_suffix = numbered_list_suffix;
    rec.prompt = render_prompt(PromptRequest{strategy, target, k, numbered_list_suffix});

    try {
        rec.raw_response = backend.complete(rec.prompt, params);
    } catch (const std::exception& e) {
        rec.status = RecordStatus::TransportError;
        rec.error = e.what();
        rec.timestamp = utc_now();
        return rec;
    }

    auto parsed = parse_subtopics(rec.raw_response, k);
    switch (parsed.status) {
        case ParseStatus::Ok:
            rec.status = RecordStatus::Ok;
            rec.subtopics = std::move(parsed.labels);
            break;
        case ParseStatus::CountMismatch:
            rec.status = RecordStatus::CountMismatch;
            rec.error = "expected " + std::to_string(k) + " subtopics, parsed " +
                        std::to_string(parsed.labels.size());
            rec.subtopics = std::move(parsed.labels);
            break;
        case ParseStatus::ParseFailure:
            rec.status = RecordStatus::ParseFailure;
            rec.error = "no list items found in the response";
            break;
    }
    rec.timestamp = utc_now();
    return rec;
}

ExpandResult expand_node(TopicTree& tree, const TopicPath& path, PromptStrategy strategy,
                         CompletionBackend& backend, const ExpandOptions& options) {
    if (options.k < 1) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
    NodeId target = tree.resolve(path);
    if (tree.level(target) >= tree.max_depth()) {
        throw Error(ErrorKind::DepthExceeded,
                    "'" + path.current() + "' is already at the maximum level " +
                        std::to_string(tree.max_depth()));
    }

    ExpandResult result;
    result.record = generate_subtopics(tree.path_of(target), strategy, options.k, backend,
                                       options.params, options.numbered_list_suffix);
    result.record.run_id = options.run_id;
    result.record.record_id = "x-" + random_hex(8);

    bool add = result.record.status == RecordStatus::Ok ||
               (result.record.status == RecordStatus::CountMismatch &&
                options.count_policy == CountPolicy::Lenient);
    if (add) {
        auto added = tree.add_children(target, result.record.subtopics);
        result.new_nodes = std::move(added.added);
        result.rejected = std::move(added.rejected);
    }
    if (options.sink) options.sink(result.record);
    return result;
}

// ---------------------------------------------------------------------------
// Manifest

Json manifest_to_json(const RunManifest& m) {
    Json j = Json::object();
    j["run_id"] = m.run_id;
    j["suite"] = Json{{"name", m.suite_name}, {"content_hash", m.suite_hash},
                      {"max_depth", m.max_depth}, {"prompt_targets", m.prompt_targets}};
    Json strategies = Json::array();
    for (auto s : m.strategies) strategies.push_back(strategy_key(s));
    j["strategies"] = std::move(strategies);
    j["k"] = m.k;
    j["params"] = params_json(m.params);
    j["mode"] = m.mode;
    j["count_policy"] = to_string(m.count_policy);
    j["numbered_list_suffix"] = m.numbered_list_suffix;
    j["parallelism"] = m.parallelism;
    j["started"] = m.started;
    j["finished"] = m.finished;
    j["completed"] = m.completed;
    Json counts = Json::object();
    for (auto s : {RecordStatus::Ok, RecordStatus::CountMismatch, RecordStatus::ParseFailure,
                   RecordStatus::TransportError}) {
        auto it = m.status_counts.find(s);
        counts[std::string(to_string(s))] = it == m.status_counts.end() ? 0 : it->second;
    }
    j["status_counts"] = std::move(counts);
    return j;
}

RunManifest manifest_from_json(const Json& j) {
    try {
        RunManifest m;
        m.run_id = j.at("run_id").get<std::string>();
        const auto& suite = j.at("suite");
        m.suite_name = suite.at("name").get<std::string>();
        m.suite_hash = suite.at("content_hash").get<std::string>();
        m.max_depth = suite.value("max_depth", kDefaultMaxDepth);
        m.prompt_targets = suite.value("prompt_targets", std::size_t{0});
        for (const auto& s : j.at("strategies")) m.strategies.push_back(strategy_from(s));
        m.k = j.at("k").get<int>();
        m.params = params_from(j.at("params"));
        m.mode = j.value("mode", std::string{});
        m.count_policy = j.value("count_policy", std::string{"strict"}) == "lenient"
                             ? CountPolicy::Lenient
                             : CountPolicy::Strict;
        m.numbered_list_suffix = j.value("numbered_list_suffix", false);
        m.parallelism = j.value("parallelism", 1);
        m.started = j.value("started", std::string{});
        m.finished = j.value("finished", std::string{});
        m.completed = j.value("completed", false);
        for (auto it = j.at("status_counts").begin(); it != j.at("status_counts").end(); ++it) {
            auto s = parse_record_status(it.key());
            if (!s) throw Error(ErrorKind::Format, "unknown status '" + it.key() + "' in manifest");
            if (auto n = it.value().get<std::size_t>(); n > 0) m.status_counts[*s] = n;
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, std::string("malformed run manifest: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Persistence

void persist_run(const std::string& dir, const RunResult& run) {
    std::string log;
    for (const auto& r : run.records) {
        log += dump_line(record_to_json(r));
        log += '\n';
    }
    write_file_atomic((fs::path(dir) / kRecordsFile).string(), log);
    write_file_atomic((fs::path(dir) / kManifestFile).string(),
                      dump_canonical(manifest_to_json(run.manifest)));
}

RunResult load_run_dir(const std::string& dir) {
    auto manifest_path = (fs::path(dir) / kManifestFile).string();
    std::error_code ec;
    if (!fs::exists(manifest_path, ec)) throw Error(ErrorKind::NotFound, "no run at " + dir);

    RunResult run;
    try {
        run.manifest = manifest_from_json(parse_json_text(read_file(manifest_path), manifest_path));
    } catch (const Error& e) {
        throw Error(ErrorKind::Load, e.what());
    }

    auto records_path = (fs::path(dir) / kRecordsFile).string();
    if (!fs::exists(records_path, ec)) return run;
    std::ifstream in(records_path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Load, "cannot open " + records_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            run.records.push_back(record_from_json(parse_json_text(line, "record")));
        } catch (const Error& e) {
            throw Error(ErrorKind::Load, records_path + " line " + std::to_string(line_no) + ": " +
                                             e.what());
        }
    }
    return run;
}

RunResult load_run(const std::string& store_root, const std::string& run_id) {
    return load_run_dir((fs::path(store_root) / run_id).string());
}

RunStore::RunStore(std::string root) : root_(std::move(root)) {}

std::string RunStore::run_dir(const std::string& run_id) const {
    if (run_id.empty() || run_id.find('/') != std::string::npos || run_id.find("..") != std::string::npos) {
        throw Error(ErrorKind::InvalidArgument, "invalid run id '" + run_id + "'");
    }
    return (fs::path(root_) / run_id).string();
}

void RunStore::begin(const RunManifest& manifest) {
    auto dir = run_dir(manifest.run_id);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Storage, "cannot create run directory " + dir);
    write_file_atomic((fs::path(dir) / kManifestFile).string(),
                      dump_canonical(manifest_to_json(manifest)));
    write_file_atomic((fs::path(dir) / kPartialRecordsFile).string(), "");
}

void RunStore::append_partial(const std::string& run_id, const GenerationRecord& record) {
    auto path = (fs::path(run_dir(run_id)) / kPartialRecordsFile).string();
    auto line = dump_line(record_to_json(record)) + "\n";
    std::lock_guard lock(write_mutex_);
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << line;
    out.flush();
    if (!out) throw Error(ErrorKind::Storage, "cannot append to " + path);
}

void RunStore::persist(const RunResult& run) {
    auto dir = run_dir(run.manifest.run_id);
    std::lock_guard lock(write_mutex_);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Storage, "cannot create run directory " + dir);
    persist_run(dir, run);
    fs::remove(fs::path(dir) / kPartialRecordsFile, ec);
}

RunResult RunStore::load(const std::string& run_id) const { return load_run_dir(run_dir(run_id)); }

bool RunStore::exists(const std::string& run_id) const {
    std::error_code ec;
    return fs::exists(fs::path(run_dir(run_id)) / kManifestFile, ec);
}

std::vector<RunManifest> RunStore::list() const {
    std::vector<RunManifest> out;
    std::error_code ec;
    if (!fs::is_directory(root_, ec)) return out;
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(root_, ec)) {
        if (entry.is_directory() && fs::exists(entry.path() / kManifestFile)) {
            ids.push_back(entry.path().filename().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    for (const auto& id : ids) {
        out.push_back(manifest_from_json(
            parse_json_text(read_file((fs::path(root_) / id / kManifestFile).string()))));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Experiment

std::string new_run_id() {
    auto now = Clock::now();
    auto secs = Clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return std::string(buf) + "-" + random_hex(3);
}

RunResult run_experiment(const TestSuite& suite, CompletionBackend& backend,
                         const ExperimentOptions& options, RunStore* store) {
    if (options.parallelism < 1) throw Error(ErrorKind::InvalidArgument, "parallelism must be >= 1");
    if (options.k < 1) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
    options.params.validate();
    auto strategies = canonical_strategies(options.strategies);
    if (strategies.empty()) throw Error(ErrorKind::InvalidArgument, "no strategies selected");

    RunResult run;
    auto& m = run.manifest;
    m.run_id = options.run_id.empty() ? new_run_id() : options.run_id;
    m.suite_name = suite.name;
    m.suite_hash = suite_content_hash(suite);
    m.max_depth = suite.tree.max_depth();
    m.prompt_targets = suite.prompt_targets.size();
    m.strategies = strategies;
    m.k = options.k;
    m.params = options.params;
    m.mode = options.mode;
    m.count_policy = options.count_policy;
    m.numbered_list_suffix = options.numbered_list_suffix;
    m.parallelism = options.parallelism;
    m.started = utc_now();
    if (store) store->begin(m);

    struct Task {
        PromptStrategy strategy;
        std::size_t target_index;
    };
    std::vector<Task> tasks;
    for (auto s : strategies) {
        for (std::size_t t = 0; t < suite.prompt_targets.size(); ++t) tasks.push_back({s, t});
    }
    run.records.resize(tasks.size());

    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::exception_ptr storage_failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        while (!abort.load()) {
            auto i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const auto& task = tasks[i];
            auto rec = generate_subtopics(suite.prompt_targets[task.target_index], task.strategy,
                                          options.k, backend, options.params,
                                          options.numbered_list_suffix);
            rec.run_id = m.run_id;
            rec.record_id = std::string(strategy_key(task.strategy)) + "-" + pad3(task.target_index);
            if (store) {
                try {
                    store->append_partial(m.run_id, rec);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!storage_failure) storage_failure = std::current_exception();
                    abort = true;
                    return;
                }
            }
            run.records[i] = std::move(rec);
        }
    };

    auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(options.parallelism), tasks.size());
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
        worker();
    }
    if (storage_failure) std::rethrow_exception(storage_failure);

    for (const auto& r : run.records) ++m.status_counts[r.status];
    m.finished = utc_now();
    m.completed = true;
    if (store) store->persist(run);
    return run;
}

}  // namespace scopetree
