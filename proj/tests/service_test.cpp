#include "scopetree/eval.hpp"
#include "scopetree/service.hpp"

#include "support.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <thread>

using namespace scopetree;
using testing_support::ScriptedBackend;
using testing_support::synthetic_completion;
using testing_support::TempDir;

namespace {

const char* kRootAnswer =
    "1. Algorithms\n2. Data Structures\n3. Artificial Intelligence\n4. Databases\n5. Operating Systems\n";

class ServiceTest : public ::testing::Test {
protected:
    void SetUp() override {
        FixtureStore fx(fixtures());
        std::string prompt = "List 5 subtopics of Computer Science.";
        fx.record({prompt, ModelParams{}, kRootAnswer, request_fingerprint(prompt, ModelParams{}), utc_now()});
        service_ = std::make_unique<ScopeService>(config());
    }

    ServiceConfig config() const {
        ServiceConfig c;
        c.store_dir = store_.str();
        c.gateway.mode = GatewayMode::Replay;
        c.gateway.api_key_env = "SCOPETREE_TEST_UNSET_VARIABLE";
        return c;
    }
    std::string fixtures() const { return store_.str("fixtures"); }

    ApiResponse call(const std::string& method, const std::string& path, const std::string& body = {},
                     const std::string& type = "application/json") {
        return service_->handle({method, path, body, type});
    }
    static Json json(const ApiResponse& r) { return parse_json_text(r.body); }

    std::string create(const std::string& body) {
        auto r = call("POST", "/trees", body);
        EXPECT_EQ(r.status, 201) << r.body;
        return json(r)["tree_id"].get<std::string>();
    }

    /// Writes a small two-strategy run into the service store.
    void make_run(const std::string& run_id) {
        auto suite = load_suite(R"({"name": "mini", "root": {"label": "A", "children": [{"label": "B"}]}})");
        ScriptedBackend b([](const std::string& p, const ModelParams&) { return synthetic_completion(p, 2); });
        RunStore store(service_->runs_dir());
        ExperimentOptions opts;
        opts.strategies = {PromptStrategy::CurrentTopic, PromptStrategy::FullPathPlusCurrent};
        opts.k = 2;
        opts.run_id = run_id;
        run_experiment(suite, b, opts, &store);
    }

    TempDir store_;
    std::unique_ptr<ScopeService> service_;
};

std::uint64_t root_id(const Json& view) { return view["tree"]["root_id"].get<std::uint64_t>(); }

}  // namespace

TEST_F(ServiceTest, CreateExpandAndReload) {
    auto id = create(R"({"label": "Computer Science"})");
    auto view = json(call("GET", "/trees/" + id));
    ASSERT_EQ(view["tree"]["nodes"].size(), 1u);

    auto r = call("POST", "/trees/" + id + "/expand",
                  dump_line(Json{{"node_id", root_id(view)}, {"strategy", "full"}, {"k", 5}}));
    ASSERT_EQ(r.status, 200) << r.body;
    auto out = json(r);
    EXPECT_EQ(out["record"]["status"], "ok");
    EXPECT_EQ(out["record"]["prompt"], "List 5 subtopics of Computer Science.");
    ASSERT_EQ(out["new_node_ids"].size(), 5u);

    view = json(call("GET", "/trees/" + id));
    const auto& nodes = view["tree"]["nodes"];
    ASSERT_EQ(nodes.size(), 6u);
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        EXPECT_EQ(nodes[i]["level"], 2);
        EXPECT_EQ(nodes[i]["id"], out["new_node_ids"][i - 1]);
    }
    EXPECT_EQ(nodes[1]["label"], "Algorithms");

    // prune one area, then a fresh service over the same store sees the same state
    auto pruned = call("DELETE", "/trees/" + id + "/nodes/" + std::to_string(nodes[1]["id"].get<std::uint64_t>()));
    ASSERT_EQ(pruned.status, 200) << pruned.body;
    auto before = call("GET", "/trees/" + id).body;
    ScopeService reloaded(config());
    auto after = reloaded.handle({"GET", "/trees/" + id, "", ""});
    EXPECT_EQ(after.status, 200);
    EXPECT_EQ(after.body, before);
    EXPECT_EQ(parse_json_text(after.body)["tree"]["nodes"].size(), 5u);

    auto listed = json(call("GET", "/trees"));
    ASSERT_EQ(listed["trees"].size(), 1u);
    EXPECT_EQ(listed["trees"][0], id);

    auto log = read_file(service_->trees_dir() + "/" + id + "/records.jsonl");
    EXPECT_EQ(split(log, '\n').size(), 2u);  // one record plus trailing newline
}

TEST_F(ServiceTest, LevelFiveExpandIsConflict) {
    auto id = create(R"({"label": "L1"})");
    auto view = json(call("GET", "/trees/" + id));
    std::uint64_t node = root_id(view);
    // grow a chain by replaying synthetic fixtures for each level
    FixtureStore fx(fixtures());
    for (int level = 1; level < 5; ++level) {
        auto path_view = json(call("GET", "/trees/" + id));
        std::string label;
        for (const auto& n : path_view["tree"]["nodes"]) {
            if (n["id"] == node) label = n["label"];
        }
        auto prompt = "List 1 subtopics of " + label + ".";
        fx.record({prompt, ModelParams{}, "- L" + std::to_string(level + 1),
                   request_fingerprint(prompt, ModelParams{}), utc_now()});
        auto r = call("POST", "/trees/" + id + "/expand",
                      dump_line(Json{{"node_id", node}, {"strategy", "current"}, {"k", 1}}));
        ASSERT_EQ(r.status, 200) << r.body;
        node = json(r)["new_node_ids"][0].get<std::uint64_t>();
    }
    auto r = call("POST", "/trees/" + id + "/expand", dump_line(Json{{"node_id", node}}));
    EXPECT_EQ(r.status, 409) << r.body;
    EXPECT_EQ(json(r)["error"], "depth-exceeded");
}

TEST_F(ServiceTest, GatewayFailureIs502WithPersistedRecord) {
    auto id = create(R"({"root": {"label": "Biology"}})");
    auto view = json(call("GET", "/trees/" + id));
    auto r = call("POST", "/trees/" + id + "/expand", dump_line(Json{{"node_id", root_id(view)}}));
    EXPECT_EQ(r.status, 502);
    EXPECT_EQ(json(r)["record"]["status"], "transport_error");
    auto log = read_file(service_->trees_dir() + "/" + id + "/records.jsonl");
    EXPECT_NE(log.find("transport_error"), std::string::npos);
    EXPECT_EQ(json(call("GET", "/trees/" + id))["tree"]["nodes"].size(), 1u);

    // live mode without a credential fails the same way
    auto live = call("POST", "/trees/" + id + "/expand",
                     dump_line(Json{{"node_id", root_id(view)}, {"mode", "live"}}));
    EXPECT_EQ(live.status, 502);
}

TEST_F(ServiceTest, PruneRulesAndNotFound) {
    auto id = create(R"({"label": "Computer Science"})");
    auto view = json(call("GET", "/trees/" + id));
    EXPECT_EQ(call("DELETE", "/trees/" + id + "/nodes/" + std::to_string(root_id(view))).status, 409);
    EXPECT_EQ(call("DELETE", "/trees/" + id + "/nodes/999").status, 404);
    EXPECT_EQ(call("GET", "/trees/nope").status, 404);
    EXPECT_EQ(call("GET", "/trees/..").status, 404);
    EXPECT_EQ(call("POST", "/trees/" + id + "/expand", R"({"node_id": 999})").status, 404);
    EXPECT_EQ(call("POST", "/trees/" + id + "/expand", R"({"node_id": 1, "strategy": "odd"})").status, 400);
    EXPECT_EQ(call("PATCH", "/trees/" + id).status, 404);
}

TEST_F(ServiceTest, InvalidDocumentsAre400) {
    EXPECT_EQ(call("POST", "/trees", "{not json").status, 400);
    EXPECT_EQ(call("POST", "/trees", R"({"root": {"label": "A", "children": [{"label": "x"}, {"label": "X"}]}})")
                  .status,
              400);
    EXPECT_EQ(call("POST", "/trees", R"({"name": "s", "root": {"nolabel": 1}})").status, 400);
    EXPECT_EQ(call("POST", "/trees", R"([1, 2])").status, 400);
}

TEST_F(ServiceTest, SuiteDocumentCreatesTree) {
    auto r = call("POST", "/trees", std::string(bundled_suite_document()));
    ASSERT_EQ(r.status, 201);
    EXPECT_EQ(json(r)["tree"]["nodes"].size(), 31u);
}

TEST_F(ServiceTest, RunsAnnotationsAndReport) {
    make_run("r1");
    auto runs = json(call("GET", "/runs"));
    ASSERT_EQ(runs["runs"].size(), 1u);
    EXPECT_EQ(runs["runs"][0]["run_id"], "r1");
    auto run = json(call("GET", "/runs/r1"));
    ASSERT_EQ(run["records"].size(), 4u);
    EXPECT_EQ(call("GET", "/runs/r2").status, 404);

    auto bad = call("PUT", "/runs/r1/annotations",
                    R"({"annotations": [{"record_id": "current-000", "subtopic_index": 0, "annotator_id": "a",
                         "label": "TooBroad"}]})");
    EXPECT_EQ(bad.status, 400);
    EXPECT_NE(bad.body.find("TooBroad"), std::string::npos);
    EXPECT_EQ(call("PUT", "/runs/r1/annotations",
                   R"([{"record_id": "nope", "subtopic_index": 0, "annotator_id": "a", "label": "Good"}])")
                  .status,
              400);

    // everything but one row for annotator "a"
    std::string csv = "record_id,subtopic_index,annotator_id,label\n";
    for (const auto& rec : run["records"]) {
        for (int i = 0; i < 2; ++i) {
            if (rec["record_id"] == "full-001" && i == 1) continue;
            csv += rec["record_id"].get<std::string>() + "," + std::to_string(i) + ",a,Good\n";
        }
    }
    auto put = call("PUT", "/runs/r1/annotations", csv, "text/csv");
    ASSERT_EQ(put.status, 200) << put.body;
    EXPECT_EQ(json(put)["upserted"], 7);

    auto incomplete = call("GET", "/runs/r1/report");
    ASSERT_EQ(incomplete.status, 409) << incomplete.body;
    auto missing = json(incomplete)["missing"];
    ASSERT_EQ(missing.size(), 1u);
    EXPECT_EQ(missing[0]["record_id"], "full-001");
    EXPECT_EQ(missing[0]["subtopic_index"], 1);

    auto fix = call("PUT", "/runs/r1/annotations",
                    R"([{"record_id": "full-001", "subtopic_index": 1, "annotator_id": "a", "label": "TooGeneral"}])");
    ASSERT_EQ(fix.status, 200);
    EXPECT_EQ(json(fix)["total"], 8);
    EXPECT_EQ(json(call("GET", "/runs/r1/annotations"))["annotations"].size(), 8u);

    auto report = call("GET", "/runs/r1/report");
    ASSERT_EQ(report.status, 200) << report.body;
    auto rep = json(report);
    ASSERT_EQ(rep["strategies"].size(), 2u);
    EXPECT_EQ(rep["strategies"][0]["accuracy"], 1.0);
    EXPECT_DOUBLE_EQ(rep["strategies"][1]["accuracy"].get<double>(), 0.75);
    EXPECT_FALSE(rep.contains("agreement"));

    // GETs are idempotent
    EXPECT_EQ(call("GET", "/runs/r1/report").body, report.body);
}

TEST_F(ServiceTest, ServesOverHttp) {
    httplib::Server server;
    service_->bind(server);
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    auto created = client.Post("/trees", R"({"label": "Computer Science"})", "application/json");
    ASSERT_TRUE(created);
    EXPECT_EQ(created->status, 201);
    auto id = parse_json_text(created->body)["tree_id"].get<std::string>();
    auto got = client.Get("/trees/" + id);
    ASSERT_TRUE(got);
    EXPECT_EQ(got->status, 200);
    EXPECT_EQ(client.Get("/trees/unknown")->status, 404);

    server.stop();
    t.join();
}
