#include "scopetree/service.hpp"

#include "scopetree/error.hpp"
#include "scopetree/eval.hpp"
#include "scopetree/report.hpp"
#include "scopetree/testsuite.hpp"
#include "scopetree/util.hpp"

#include <httplib.h>

#include <filesystem>
#include <fstream>

namespace scopetree {

namespace fs = std::filesystem;

namespace {

ApiResponse json_response(int status, const Json& body) {
    return ApiResponse{status, dump_line(body), "application/json"};
}

int status_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidPath:
        case ErrorKind::InvalidArgument:
        case ErrorKind::Format:
        case ErrorKind::SuiteInvalid: return 400;
        case ErrorKind::UnknownTopic:
        case ErrorKind::NotFound: return 404;
        case ErrorKind::DepthExceeded:
        case ErrorKind::Conflict:
        case ErrorKind::IncompleteAnnotation: return 409;
        case ErrorKind::Transport:
        case ErrorKind::FixtureMiss:
        case ErrorKind::Configuration: return 502;
        case ErrorKind::Storage:
        case ErrorKind::Load: return 500;
    }
    return 500;
}

ApiResponse error_response(const Error& e) {
    Json body{{"error", to_string(e.kind())}, {"message", e.what()}};
    if (const auto* inc = dynamic_cast<const IncompleteAnnotationError*>(&e)) {
        Json missing = Json::array();
        for (const auto& m : inc->missing()) {
            missing.push_back(Json{{"record_id", m.record_id},
                                   {"subtopic_index", m.subtopic_index},
                                   {"annotator_id", m.annotator_id}});
        }
        body["missing"] = std::move(missing);
    }
    return json_response(status_for(e.kind()), body);
}

ApiResponse not_found(const std::string& what) {
    return json_response(404, Json{{"error", "not-found"}, {"message", what}});
}

bool valid_id(const std::string& id) {
    if (id.empty() || id.size() > 128) return false;
    for (char c : id) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') return false;
    }
    return id != "." && id != "..";
}

Json parse_body(const ApiRequest& req) {
    if (trim(req.body).empty()) return Json::object();
    return parse_json_text(req.body, "request body");
}

/// Stands in for a backend that could not be built, so the failure lands in
/// the generation record like any other gateway error.
class UnavailableBackend final : public CompletionBackend {
public:
    explicit UnavailableBackend(std::string why) : why_(std::move(why)) {}
    std::string complete(const std::string&, const ModelParams&) override {
        throw Error(ErrorKind::Configuration, why_);
    }

private:
    std::string why_;
};

ModelParams params_from_body(const Json& body) {
    ModelParams p;
    if (auto it = body.find("params"); it != body.end() && it->is_object()) {
        p.model_name = it->value("model_name", p.model_name);
        p.temperature = it->value("temperature", p.temperature);
        p.max_output_tokens = it->value("max_output_tokens", p.max_output_tokens);
    }
    p.validate();
    return p;
}

std::vector<AnnotationRecord> annotations_from_json(const Json& body) {
    const Json* list = &body;
    if (body.is_object()) {
        auto it = body.find("annotations");
        if (it == body.end()) throw Error(ErrorKind::Format, "expected an \"annotations\" array");
        list = &*it;
    }
    if (!list->is_array()) throw Error(ErrorKind::Format, "annotations must be an array");
    std::vector<AnnotationRecord> out;
    for (const auto& j : *list) {
        try {
            AnnotationRecord a;
            a.record_id = j.at("record_id").get<std::string>();
            a.subtopic_index = j.at("subtopic_index").get<int>();
            a.annotator_id = j.at("annotator_id").get<std::string>();
            auto text = j.at("label").get<std::string>();
            auto label = parse_label(text);
            if (!label) {
                throw Error(ErrorKind::Format, "unknown label '" + text +
                                                   "' (expected Good, Repetitive, TooSpecific, "
                                                   "TooGeneral, Tangential or Unrelated)");
            }
            a.label = *label;
            if (a.record_id.empty() || a.annotator_id.empty() || a.subtopic_index < 0) {
                throw Error(ErrorKind::Format, "annotation fields must be non-empty and non-negative");
            }
            out.push_back(std::move(a));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Format, std::string("malformed annotation: ") + e.what());
        }
    }
    return out;
}

std::vector<AnnotationRecord> read_annotations(const std::string& path) {
    std::error_code ec;
    if (!fs::exists(path, ec)) return {};
    return parse_annotations_csv(read_file(path));
}

}  // namespace

Json tree_view_json(const TopicTree& tree) {
    Json nodes = Json::array();
    for (auto id : tree.preorder()) {
        const auto& n = tree.node(id);
        Json children = Json::array();
        for (auto c : n.children) children.push_back(c.value);
        Json j = Json::object();
        j["id"] = id.value;
        j["label"] = n.label;
        j["level"] = tree.level(id);
        j["parent"] = n.parent ? Json(n.parent->value) : Json(nullptr);
        j["children"] = std::move(children);
        nodes.push_back(std::move(j));
    }
    Json out = Json::object();
    out["max_depth"] = tree.max_depth();
    out["root_id"] = tree.root().value;
    out["nodes"] = std::move(nodes);
    return out;
}

ScopeService::ScopeService(ServiceConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
    if (config_.store_dir.empty()) throw Error(ErrorKind::Configuration, "service needs a store directory");
    if (config_.gateway.fixtures_dir.empty()) config_.gateway.fixtures_dir = fixtures_dir();
    std::error_code ec;
    fs::create_directories(trees_dir(), ec);
    fs::create_directories(runs_dir(), ec);
    if (ec) throw Error(ErrorKind::Storage, "cannot create store under " + config_.store_dir);
}

std::string ScopeService::trees_dir() const { return (fs::path(config_.store_dir) / "trees").string(); }
std::string ScopeService::runs_dir() const { return (fs::path(config_.store_dir) / "runs").string(); }
std::string ScopeService::fixtures_dir() const {
    if (!config_.gateway.fixtures_dir.empty()) return config_.gateway.fixtures_dir;
    return (fs::path(config_.store_dir) / "fixtures").string();
}

std::shared_ptr<ScopeService::TreeSlot> ScopeService::slot(const std::string& tree_id) {
    if (!valid_id(tree_id)) return nullptr;
    std::lock_guard lock(slots_mutex_);
    if (auto it = slots_.find(tree_id); it != slots_.end()) return it->second;

    auto path = fs::path(trees_dir()) / tree_id / "tree.json";
    std::error_code ec;
    if (!fs::exists(path, ec)) return nullptr;
    auto doc = parse_json_text(read_file(path.string()), path.string());
    auto s = std::make_shared<TreeSlot>();
    s->session = SessionTree{tree_id, tree_from_json(doc), doc.value("created", std::string{}),
                             doc.value("modified", std::string{})};
    slots_[tree_id] = s;
    return s;
}

void ScopeService::persist_tree(const SessionTree& session) {
    Json doc = Json::object();
    doc["tree_id"] = session.tree_id;
    doc["created"] = session.created;
    doc["modified"] = session.modified;
    auto body = tree_to_json(session.tree, true);
    doc["max_depth"] = body["max_depth"];
    doc["root"] = std::move(body["root"]);
    write_file_atomic((fs::path(trees_dir()) / session.tree_id / "tree.json").string(),
                      dump_canonical(doc));
}

std::shared_ptr<CompletionBackend> ScopeService::backend_for(GatewayMode mode) {
    std::lock_guard lock(backends_mutex_);
    if (auto it = backends_.find(mode); it != backends_.end()) return it->second;
    auto cfg = config_.gateway;
    cfg.mode = mode;
    try {
        auto b = make_backend(cfg, transport_);
        backends_[mode] = b;
        return b;
    } catch (const Error& e) {
        return std::make_shared<UnavailableBackend>(e.what());
    }
}

ApiResponse ScopeService::handle(const ApiRequest& req) {
    auto path = req.path.substr(0, req.path.find('?'));
    std::vector<std::string> seg;
    for (auto& s : split(path, '/')) {
        if (!s.empty()) seg.push_back(s);
    }
    const auto& m = req.method;
    try {
        if (!seg.empty() && seg[0] == "trees") {
            if (seg.size() == 1 && m == "POST") return create_tree(req);
            if (seg.size() == 1 && m == "GET") return list_trees();
            if (seg.size() == 2 && m == "GET") return get_tree(seg[1]);
            if (seg.size() == 3 && seg[2] == "expand" && m == "POST") return expand(seg[1], req);
            if (seg.size() == 4 && seg[2] == "nodes" && m == "DELETE") return prune(seg[1], seg[3]);
        } else if (!seg.empty() && seg[0] == "runs") {
            if (seg.size() == 1 && m == "GET") return list_runs();
            if (seg.size() == 2 && m == "GET") return get_run(seg[1]);
            if (seg.size() == 3 && seg[2] == "annotations" && m == "PUT") return put_annotations(seg[1], req);
            if (seg.size() == 3 && seg[2] == "annotations" && m == "GET") return get_annotations(seg[1]);
            if (seg.size() == 3 && seg[2] == "report" && m == "GET") return get_report(seg[1]);
        }
        return not_found("no route for " + m + " " + path);
    } catch (const Error& e) {
        return error_response(e);
    } catch (const std::exception& e) {
        return json_response(500, Json{{"error", "internal"}, {"message", e.what()}});
    }
}

ApiResponse ScopeService::create_tree(const ApiRequest& req) {
    auto body = parse_body(req);
    if (!body.is_object()) throw Error(ErrorKind::Format, "request body must be a JSON object");

    std::optional<TopicTree> tree;
    if (auto label = body.find("label"); label != body.end()) {
        if (!label->is_string()) throw Error(ErrorKind::Format, "\"label\" must be a string");
        tree.emplace(label->get<std::string>(), body.value("max_depth", kDefaultMaxDepth));
    } else if (body.contains("name")) {
        tree.emplace(load_suite(req.body).tree);
    } else {
        tree.emplace(tree_from_json(body));
        auto violations = tree->validate();
        if (!violations.empty()) {
            std::string msg = "tree document violates hierarchy invariants:";
            for (const auto& v : violations) msg += " " + v.message + ";";
            throw Error(ErrorKind::SuiteInvalid, msg);
        }
    }

    SessionTree session{random_hex(8), std::move(*tree), utc_now(), {}};
    session.modified = session.created;
    persist_tree(session);

    auto s = std::make_shared<TreeSlot>();
    Json out = Json::object();
    out["tree_id"] = session.tree_id;
    out["tree"] = tree_view_json(session.tree);
    s->session = std::move(session);
    {
        std::lock_guard lock(slots_mutex_);
        slots_[out["tree_id"].get<std::string>()] = s;
    }
    return json_response(201, out);
}

ApiResponse ScopeService::list_trees() {
    Json ids = Json::array();
    std::vector<std::string> found;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(trees_dir(), ec)) {
        if (entry.is_directory() && fs::exists(entry.path() / "tree.json")) {
            found.push_back(entry.path().filename().string());
        }
    }
    std::sort(found.begin(), found.end());
    for (auto& id : found) ids.push_back(id);
    return json_response(200, Json{{"trees", ids}});
}

ApiResponse ScopeService::get_tree(const std::string& tree_id) {
    auto s = slot(tree_id);
    if (!s) return not_found("unknown tree '" + tree_id + "'");
    std::shared_lock lock(s->mutex);
    Json out = Json::object();
    out["tree_id"] = s->session->tree_id;
    out["created"] = s->session->created;
    out["modified"] = s->session->modified;
    out["tree"] = tree_view_json(s->session->tree);
    return json_response(200, out);
}

ApiResponse ScopeService::expand(const std::string& tree_id, const ApiRequest& req) {
    auto s = slot(tree_id);
    if (!s) return not_found("unknown tree '" + tree_id + "'");
    auto body = parse_body(req);
    if (!body.is_object()) throw Error(ErrorKind::Format, "request body must be a JSON object");

    auto node_it = body.find("node_id");
    if (node_it == body.end()) throw Error(ErrorKind::InvalidArgument, "expand needs \"node_id\"");
    NodeId node_id;
    if (node_it->is_number_unsigned()) {
        node_id = NodeId{node_it->get<std::uint64_t>()};
    } else if (node_it->is_string()) {
        try {
            node_id = NodeId{std::stoull(node_it->get<std::string>())};
        } catch (const std::exception&) {
            throw Error(ErrorKind::InvalidArgument, "bad node_id");
        }
    } else {
        throw Error(ErrorKind::InvalidArgument, "bad node_id");
    }

    auto strategy_text = body.value("strategy", std::string{"full"});
    auto strategy = parse_strategy(strategy_text);
    if (!strategy) throw Error(ErrorKind::InvalidArgument, "unknown strategy '" + strategy_text + "'");

    auto mode = config_.gateway.mode;
    if (auto mt = body.find("mode"); mt != body.end()) {
        auto parsed = parse_gateway_mode(mt->get<std::string>());
        if (!parsed || *parsed == GatewayMode::Record) {
            throw Error(ErrorKind::InvalidArgument, "mode must be live or replay");
        }
        mode = *parsed;
    }

    ExpandOptions opts;
    opts.k = body.value("k", kDefaultSubtopicCount);
    opts.params = params_from_body(body);
    opts.count_policy = body.value("count_policy", std::string{"lenient"}) == "strict"
                            ? CountPolicy::Strict
                            : CountPolicy::Lenient;
    opts.numbered_list_suffix = body.value("numbered_list_suffix", false);
    opts.run_id = "tree-" + tree_id;

    auto backend = backend_for(mode);

    std::unique_lock lock(s->mutex);
    auto& session = *s->session;
    if (!session.tree.contains(node_id)) {
        return not_found("unknown node " + std::to_string(node_id.value));
    }

    // Mutate a copy; the stored tree only changes once the result validates.
    auto working = session.tree;
    auto result = expand_node(working, working.path_of(node_id), *strategy, *backend, opts);

    auto records_path = (fs::path(trees_dir()) / tree_id / "records.jsonl").string();
    {
        std::ofstream log(records_path, std::ios::binary | std::ios::app);
        log << dump_line(record_to_json(result.record)) << '\n';
        if (!log) throw Error(ErrorKind::Storage, "cannot append to " + records_path);
    }

    auto violations = working.validate();
    if (!violations.empty()) {
        throw Error(ErrorKind::Conflict, "expansion would break the tree: " + violations.front().message);
    }
    if (!result.new_nodes.empty()) {
        SessionTree next{session.tree_id, std::move(working), session.created, utc_now()};
        persist_tree(next);
        session = std::move(next);
    }

    Json out = Json::object();
    out["record"] = record_to_json(result.record);
    Json ids = Json::array();
    for (auto id : result.new_nodes) ids.push_back(id.value);
    out["new_node_ids"] = std::move(ids);
    Json rejected = Json::array();
    for (const auto& r : result.rejected) rejected.push_back(r.label);
    out["rejected"] = std::move(rejected);
    out["tree"] = tree_view_json(session.tree);
    int status = result.record.status == RecordStatus::TransportError ? 502 : 200;
    return json_response(status, out);
}

ApiResponse ScopeService::prune(const std::string& tree_id, const std::string& node_text) {
    auto s = slot(tree_id);
    if (!s) return not_found("unknown tree '" + tree_id + "'");
    NodeId node_id;
    try {
        node_id = NodeId{std::stoull(node_text)};
    } catch (const std::exception&) {
        return not_found("unknown node '" + node_text + "'");
    }
    std::unique_lock lock(s->mutex);
    auto& session = *s->session;
    if (!session.tree.contains(node_id)) return not_found("unknown node " + node_text);

    auto working = session.tree;
    auto before = working.size();
    working.remove_subtree(node_id);
    auto violations = working.validate();
    if (!violations.empty()) {
        throw Error(ErrorKind::Conflict, "prune would break the tree: " + violations.front().message);
    }
    auto removed = before - working.size();
    SessionTree next{session.tree_id, std::move(working), session.created, utc_now()};
    persist_tree(next);
    session = std::move(next);
    return json_response(200, Json{{"removed", removed}, {"tree", tree_view_json(session.tree)}});
}

ApiResponse ScopeService::list_runs() {
    RunStore store(runs_dir());
    Json runs = Json::array();
    for (const auto& m : store.list()) runs.push_back(manifest_to_json(m));
    return json_response(200, Json{{"runs", runs}});
}

ApiResponse ScopeService::get_run(const std::string& run_id) {
    if (!valid_id(run_id)) return not_found("unknown run '" + run_id + "'");
    auto run = load_run(runs_dir(), run_id);
    Json records = Json::array();
    for (const auto& r : run.records) records.push_back(record_to_json(r));
    return json_response(200, Json{{"manifest", manifest_to_json(run.manifest)}, {"records", records}});
}

ApiResponse ScopeService::get_annotations(const std::string& run_id) {
    if (!valid_id(run_id)) return not_found("unknown run '" + run_id + "'");
    auto dir = fs::path(runs_dir()) / run_id;
    std::error_code ec;
    if (!fs::exists(dir / kManifestFile, ec)) return not_found("unknown run '" + run_id + "'");
    std::lock_guard lock(runs_mutex_);
    Json list = Json::array();
    for (const auto& a : read_annotations((dir / "annotations.csv").string())) {
        list.push_back(Json{{"record_id", a.record_id},
                            {"subtopic_index", a.subtopic_index},
                            {"annotator_id", a.annotator_id},
                            {"label", to_string(a.label)}});
    }
    return json_response(200, Json{{"annotations", list}});
}

ApiResponse ScopeService::put_annotations(const std::string& run_id, const ApiRequest& req) {
    if (!valid_id(run_id)) return not_found("unknown run '" + run_id + "'");
    auto run = load_run(runs_dir(), run_id);

    std::vector<AnnotationRecord> updates;
    bool is_csv = req.content_type.find("csv") != std::string::npos ||
                  trim(req.body).starts_with(kAnnotationCsvHeader);
    if (is_csv) {
        updates = parse_annotations_csv(req.body);
    } else {
        updates = annotations_from_json(parse_body(req));
    }
    check_annotation_targets(run.records, updates);

    auto path = (fs::path(runs_dir()) / run_id / "annotations.csv").string();
    std::lock_guard lock(runs_mutex_);
    auto all = read_annotations(path);
    auto changed = upsert_annotations(all, updates);
    write_file_atomic(path, emit_annotations_csv(all));
    return json_response(200, Json{{"upserted", changed}, {"total", all.size()}});
}

ApiResponse ScopeService::get_report(const std::string& run_id) {
    if (!valid_id(run_id)) return not_found("unknown run '" + run_id + "'");
    auto run = load_run(runs_dir(), run_id);
    std::vector<AnnotationRecord> annotations;
    {
        std::lock_guard lock(runs_mutex_);
        annotations = read_annotations((fs::path(runs_dir()) / run_id / "annotations.csv").string());
    }
    std::vector<StrategyReport> reports;
    for (auto s : annotated_strategies(run.records, annotations)) {
        reports.push_back(strategy_report(run.records, annotations, s, run.manifest.max_depth));
    }
    if (reports.empty()) throw Error(ErrorKind::IncompleteAnnotation, "run has no annotations yet");
    std::optional<AgreementReport> agreement;
    try {
        agreement = agreement_report(run.records, annotations);
    } catch (const IncompleteAnnotationError&) {
        throw;
    } catch (const Error&) {
        // fewer than two annotators: agreement is simply not reported
    }
    return json_response(200, report_to_json(reports, agreement ? &*agreement : nullptr));
}

void ScopeService::bind(httplib::Server& server) {
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
        ApiRequest api{req.method, req.path, req.body, req.get_header_value("Content-Type")};
        auto out = handle(api);
        res.status = out.status;
        res.set_content(out.body, out.content_type);
    };
    const char* pattern = R"(/(trees|runs)(/.*)?)";
    server.Get(pattern, route);
    server.Post(pattern, route);
    server.Put(pattern, route);
    server.Delete(pattern, route);
    if (!config_.ui_dir.empty()) server.set_mount_point("/", config_.ui_dir);
}

}  // namespace scopetree
