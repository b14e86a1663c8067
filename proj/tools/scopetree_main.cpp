// scopetree command line: batch runs, interactive expansion, reports, serving.

#include "scopetree/error.hpp"
#include "scopetree/eval.hpp"
#include "scopetree/gateway.hpp"
#include "scopetree/report.hpp"
#include "scopetree/run.hpp"
#include "scopetree/service.hpp"
#include "scopetree/testsuite.hpp"
#include "scopetree/util.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace scopetree;

namespace {

struct GatewayFlags {
    std::string mode = "replay";
    std::string fixtures;
    std::string endpoint{kDefaultEndpoint};
    std::string api_key_env{kDefaultApiKeyEnv};
    std::string model = "gpt-4";
    double temperature = 1.0;
    int max_tokens = 512;

    void add_to(CLI::App* app, const std::vector<std::string>& modes) {
        app->add_option("--mode", mode, "Completion mode")
            ->check(CLI::IsMember(modes))
            ->capture_default_str();
        app->add_option("--fixtures", fixtures, "Fixture directory for record/replay");
        app->add_option("--endpoint", endpoint, "Chat-completions URL")->capture_default_str();
        app->add_option("--api-key-env", api_key_env, "Environment variable holding the API key")
            ->capture_default_str();
        app->add_option("--model", model, "Model name")->capture_default_str();
        app->add_option("--temperature", temperature, "Sampling temperature")->capture_default_str();
        app->add_option("--max-tokens", max_tokens, "Completion token limit")->capture_default_str();
    }

    ModelParams params() const {
        ModelParams p;
        p.model_name = model;
        p.temperature = temperature;
        p.max_output_tokens = max_tokens;
        p.validate();
        return p;
    }

    GatewayConfig config() const {
        GatewayConfig c;
        c.mode = *parse_gateway_mode(mode);
        c.endpoint = endpoint;
        c.api_key_env = api_key_env;
        c.fixtures_dir = fixtures;
        return c;
    }
};

void warn(std::string_view msg) { std::cerr << "warning: " << msg << '\n'; }

std::vector<PromptStrategy> parse_strategy_list(const std::string& text) {
    std::vector<PromptStrategy> out;
    for (const auto& part : split(text, ',')) {
        auto key = trim(part);
        if (key.empty()) continue;
        auto s = parse_strategy(key);
        if (!s) throw Error(ErrorKind::InvalidArgument, "unknown strategy '" + key + "'");
        out.push_back(*s);
    }
    if (out.empty()) throw Error(ErrorKind::InvalidArgument, "no strategies given");
    return out;
}

void print_summary(const SuiteSummary& s) {
    std::cout << "suite: " << s.name << "\n"
              << "nodes: " << s.total_nodes << "\n";
    for (const auto& [level, n] : s.nodes_per_level) {
        auto t = s.targets_per_level.count(level) ? s.targets_per_level.at(level) : 0;
        std::cout << "  level " << level << ": " << n << " nodes, " << t << " prompt targets\n";
    }
    std::cout << "prompt targets: " << s.prompt_targets << "\n"
              << "subtopics per strategy at k=" << s.k << ": " << s.expected_generations_per_strategy
              << "\n";
}

int cmd_run(const std::string& suite_file, bool bundled, const std::string& strategies, int k,
            const std::string& out, int parallelism, bool lenient, bool suffix, GatewayFlags gw) {
    auto suite = bundled || suite_file.empty() ? bundled_suite() : load_suite_file(suite_file);
    ExperimentOptions opts;
    opts.strategies = parse_strategy_list(strategies);
    opts.k = k;
    opts.params = gw.params();
    opts.count_policy = lenient ? CountPolicy::Lenient : CountPolicy::Strict;
    opts.numbered_list_suffix = suffix;
    opts.parallelism = parallelism;
    opts.run_id = new_run_id();
    opts.mode = gw.mode;

    RunStore store(out);
    auto config = gw.config();
    if (config.mode == GatewayMode::Record && config.fixtures_dir.empty()) {
        config.fixtures_dir = (fs::path(store.run_dir(opts.run_id)) / "fixtures").string();
    }
    auto backend = make_backend(config, nullptr, warn);
    auto run = run_experiment(suite, *backend, opts, &store);

    std::cout << "run " << run.manifest.run_id << " -> " << store.run_dir(run.manifest.run_id) << "\n";
    std::cout << "records: " << run.records.size() << "\n";
    for (const auto& [status, n] : run.manifest.status_counts) {
        std::cout << "  " << to_string(status) << ": " << n << "\n";
    }
    return 0;
}

int cmd_init(const std::string& label, int max_depth, const std::string& out, bool force) {
    if (!force && fs::exists(out)) {
        throw Error(ErrorKind::Conflict, out + " exists (use --force to overwrite)");
    }
    TopicTree tree(label, max_depth);
    write_file_atomic(out, emit_tree_document(tree));
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_expand(const std::string& tree_file, const std::string& path_text, const std::string& strategy_text,
               int k, bool strict, bool suffix, GatewayFlags gw) {
    auto tree = parse_tree_document(read_file(tree_file));
    auto violations = tree.validate();
    if (!violations.empty()) {
        throw Error(ErrorKind::SuiteInvalid, tree_file + ": " + violations.front().message);
    }
    auto strategy = parse_strategy(strategy_text);
    if (!strategy) throw Error(ErrorKind::InvalidArgument, "unknown strategy '" + strategy_text + "'");

    auto config = gw.config();
    if (config.fixtures_dir.empty() && config.mode != GatewayMode::Live) {
        config.fixtures_dir = tree_file + ".fixtures";
    }
    auto backend = make_backend(config, nullptr, warn);

    ExpandOptions opts;
    opts.k = k;
    opts.params = gw.params();
    opts.count_policy = strict ? CountPolicy::Strict : CountPolicy::Lenient;
    opts.numbered_list_suffix = suffix;
    auto log_path = tree_file + ".records.jsonl";
    opts.sink = [&](const GenerationRecord& r) {
        std::ofstream log(log_path, std::ios::binary | std::ios::app);
        log << dump_line(record_to_json(r)) << '\n';
        if (!log) throw Error(ErrorKind::Storage, "cannot append to " + log_path);
    };

    auto result = expand_node(tree, TopicPath::parse(path_text), *strategy, *backend, opts);
    const auto& rec = result.record;
    std::cout << "prompt: " << rec.prompt << "\n"
              << "status: " << to_string(rec.status) << "\n";
    if (!rec.error.empty()) std::cout << "error: " << rec.error << "\n";
    for (auto id : result.new_nodes) std::cout << "  + " << tree.node(id).label << "\n";
    for (const auto& r : result.rejected) {
        std::cout << "  - " << r.label << " (" << (r.reason == LabelRejection::Reason::Empty ? "empty" : "duplicate")
                  << ")\n";
    }
    if (!result.new_nodes.empty()) write_file_atomic(tree_file, emit_tree_document(tree));
    return rec.status == RecordStatus::TransportError ? 1 : 0;
}

int cmd_report(const std::string& run_dir, const std::string& annotations_file, const std::string& format_text,
               const std::string& out) {
    auto run = load_run_dir(run_dir);
    auto annotations = parse_annotations_csv(read_file(annotations_file));
    check_annotation_targets(run.records, annotations);
    auto format = parse_report_format(format_text);
    if (!format) throw Error(ErrorKind::InvalidArgument, "unknown format '" + format_text + "'");

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
    } catch (const Error& e) {
        warn(std::string("agreement not reported: ") + e.what());
    }

    auto docs = emit_report(reports, agreement ? &*agreement : nullptr, *format);
    if (out.empty()) {
        for (const auto& d : docs) {
            if (docs.size() > 1) std::cout << "== " << d.filename << "\n";
            std::cout << d.content;
        }
        return 0;
    }
    fs::create_directories(out);
    for (const auto& d : docs) {
        auto path = (fs::path(out) / d.filename).string();
        write_file_atomic(path, d.content);
        std::cout << "wrote " << path << "\n";
    }
    return 0;
}

int cmd_suite(const std::string& suite_file, bool emit, int k) {
    auto suite = suite_file.empty() ? bundled_suite() : load_suite_file(suite_file);
    if (emit) {
        std::cout << emit_suite(suite);
        return 0;
    }
    print_summary(describe_suite(suite, k));
    for (const auto& w : suite.tree.cross_branch_repeats()) warn(w.message);
    return 0;
}

httplib::Server* g_server = nullptr;

void stop_server(int) {
    if (g_server) g_server->stop();
}

int cmd_serve(const std::string& store, const std::string& bind, const std::string& ui, GatewayFlags gw) {
    auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorKind::InvalidArgument, "--bind expects HOST:PORT");
    auto host = bind.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(bind.substr(colon + 1));
    } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidArgument, "bad port in '" + bind + "'");
    }

    ServiceConfig config;
    config.store_dir = store;
    config.gateway = gw.config();
    config.ui_dir = ui;
    ScopeService service(config);

    httplib::Server server;
    service.bind(server);
    g_server = &server;
    std::signal(SIGINT, stop_server);
    std::signal(SIGTERM, stop_server);
    std::cerr << "serving " << store << " on http://" << host << ":" << port << "\n";
    if (!server.listen(host, port)) throw Error(ErrorKind::Configuration, "cannot listen on " + bind);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Build topic hierarchies with LLM subtopic generation and evaluate scoping."};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run a prompting experiment over a test suite");
    std::string suite_file;
    bool bundled = false;
    std::string strategies = "current,root,full";
    int k = kDefaultSubtopicCount;
    std::string out_dir = "runs";
    int parallelism = 4;
    bool lenient = false;
    bool suffix = false;
    GatewayFlags run_gw;
    auto* suite_opt = run->add_option("--suite", suite_file, "Suite document")->check(CLI::ExistingFile);
    run->add_flag("--bundled", bundled, "Use the bundled Computer Science suite")->excludes(suite_opt);
    run->add_option("--strategies", strategies, "Comma-separated: current,root,full")->capture_default_str();
    run->add_option("--k", k, "Subtopics per prompt")->check(CLI::PositiveNumber)->capture_default_str();
    run->add_option("--out", out_dir, "Run store directory")->capture_default_str();
    run->add_option("--parallelism", parallelism, "Concurrent completion calls")
        ->check(CLI::Range(1, 64))
        ->capture_default_str();
    run->add_flag("--lenient", lenient, "Keep partial parses (default: strict)");
    run->add_flag("--numbered-suffix", suffix, "Append the numbered-list instruction to prompts");
    run_gw.add_to(run, {"live", "record", "replay"});

    // init
    auto* init = app.add_subcommand("init", "Create a tree document with a single root topic");
    std::string init_label;
    std::string init_out;
    int init_depth = kDefaultMaxDepth;
    bool init_force = false;
    init->add_option("--label", init_label, "Root topic")->required();
    init->add_option("--out", init_out, "Tree document to write")->required();
    init->add_option("--max-depth", init_depth, "Deepest level")->check(CLI::Range(1, 32))->capture_default_str();
    init->add_flag("--force", init_force, "Overwrite an existing file");

    // expand
    auto* expand = app.add_subcommand("expand", "Generate children for one node of a tree document");
    std::string tree_file;
    std::string path_text;
    std::string strategy = "full";
    int expand_k = kDefaultSubtopicCount;
    bool strict = false;
    bool expand_suffix = false;
    GatewayFlags expand_gw;
    expand->add_option("--tree", tree_file, "Tree document (rewritten in place)")
        ->required()
        ->check(CLI::ExistingFile);
    expand->add_option("--path", path_text, "Node path, e.g. \"Computer Science/Data Structures\"")->required();
    expand->add_option("--strategy", strategy, "current, root or full")->capture_default_str();
    expand->add_option("--k", expand_k, "Subtopics to request")->check(CLI::PositiveNumber)->capture_default_str();
    expand->add_flag("--strict", strict, "Add nothing unless exactly k subtopics parse");
    expand->add_flag("--numbered-suffix", expand_suffix, "Append the numbered-list instruction");
    expand_gw.add_to(expand, {"live", "record", "replay"});

    // report
    auto* report = app.add_subcommand("report", "Compute metrics from a run and its annotations");
    std::string report_run;
    std::string annotations;
    std::string format = "markdown";
    std::string report_out;
    report->add_option("--run", report_run, "Run directory")->required()->check(CLI::ExistingDirectory);
    report->add_option("--annotations", annotations, "Annotation CSV")->required()->check(CLI::ExistingFile);
    report->add_option("--format", format, "markdown or csv")->capture_default_str();
    report->add_option("--out", report_out, "Output directory (stdout when omitted)");

    // suite
    auto* suite = app.add_subcommand("suite", "Describe or emit a test suite");
    std::string describe_file;
    bool emit = false;
    int suite_k = kDefaultSubtopicCount;
    suite->add_option("--suite", describe_file, "Suite document (bundled when omitted)")->check(CLI::ExistingFile);
    suite->add_flag("--emit", emit, "Print the canonical document");
    suite->add_option("--k", suite_k, "Subtopics per prompt")->check(CLI::PositiveNumber);

    // serve
    auto* serve = app.add_subcommand("serve", "Serve the JSON API (and optionally the UI bundle)");
    std::string store_dir = "store";
    std::string bind = "127.0.0.1:8080";
    std::string ui_dir;
    GatewayFlags serve_gw;
    serve->add_option("--store", store_dir, "Store directory")->capture_default_str();
    serve->add_option("--bind", bind, "HOST:PORT")->capture_default_str();
    serve->add_option("--ui", ui_dir, "Static UI directory")->check(CLI::ExistingDirectory);
    serve_gw.add_to(serve, {"live", "replay"});

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            return cmd_run(suite_file, bundled, strategies, k, out_dir, parallelism, lenient, suffix, run_gw);
        }
        if (*init) return cmd_init(init_label, init_depth, init_out, init_force);
        if (*expand) return cmd_expand(tree_file, path_text, strategy, expand_k, strict, expand_suffix, expand_gw);
        if (*report) return cmd_report(report_run, annotations, format, report_out);
        if (*suite) return cmd_suite(describe_file, emit, suite_k);
        if (*serve) return cmd_serve(store_dir, bind, ui_dir, serve_gw);
    } catch (const IncompleteAnnotationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::size_t shown = 0;
        for (const auto& m : e.missing()) {
            if (++shown > 20) {
                std::cerr << "  ... " << e.missing().size() - 20 << " more\n";
                break;
            }
            std::cerr << "  missing " << m.record_id << "#" << m.subtopic_index << " from " << m.annotator_id
                      << "\n";
        }
        return 1;
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
