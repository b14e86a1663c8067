#include "scopetree/error.hpp"
#include "scopetree/gateway.hpp"
#include "scopetree/tree_io.hpp"

#include "support.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

using namespace scopetree;
using testing_support::TempDir;

namespace {

/// Local chat-completions stub answering with a scripted status sequence.
class StubServer {
public:
    explicit StubServer(std::vector<int> statuses) : statuses_(std::move(statuses)) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            auto n = hits_++;
            last_body_ = req.body;
            last_auth_ = req.get_header_value("Authorization");
            int status = n < statuses_.size() ? statuses_[n] : 200;
            res.status = status;
            if (status == 200) {
                Json body{{"choices", Json::array({Json{{"message", Json{{"role", "assistant"},
                                                                          {"content", "1. Alpha\n2. Beta"}}}}})}};
                res.set_content(dump_line(body), "application/json");
            } else {
                res.set_content(R"({"error":"slow down"})", "application/json");
            }
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
    std::size_t hits() const { return hits_; }
    std::string last_body() const { return last_body_; }
    std::string last_auth() const { return last_auth_; }

private:
    httplib::Server server_;
    std::vector<int> statuses_;
    std::atomic<std::size_t> hits_{0};
    std::string last_body_;
    std::string last_auth_;
    int port_ = 0;
    std::thread thread_;
};

class CannedTransport final : public HttpTransport {
public:
    explicit CannedTransport(HttpResponse r) : response_(std::move(r)) {}
    HttpResponse post(const std::string&, const std::map<std::string, std::string>&, const std::string&) override {
        ++calls;
        return response_;
    }
    int calls = 0;

private:
    HttpResponse response_;
};

ModelParams params_at(double temperature) {
    ModelParams p;
    p.temperature = temperature;
    return p;
}

}  // namespace

TEST(LiveBackend, RetriesRateLimitThenSucceeds) {
    StubServer stub({429, 429, 200});
    std::vector<std::chrono::milliseconds> sleeps;
    LiveBackend backend(stub.url(), "test-key", std::make_shared<HttplibTransport>(std::chrono::seconds(5)),
                        RetryPolicy{}, [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
    auto text = backend.complete("List 5 subtopics of Databases.", ModelParams{});
    EXPECT_EQ(text, "1. Alpha\n2. Beta");
    EXPECT_EQ(stub.hits(), 3u);
    ASSERT_EQ(sleeps.size(), 2u);
    // base 1s with up to 25% jitter, then doubled
    EXPECT_GE(sleeps[0].count(), 1000);
    EXPECT_LE(sleeps[0].count(), 1250);
    EXPECT_GE(sleeps[1].count(), 2000);
    EXPECT_LE(sleeps[1].count(), 2500);

    auto sent = parse_json_text(stub.last_body());
    EXPECT_EQ(sent["model"], "gpt-4");
    EXPECT_EQ(sent["temperature"], 1.0);
    EXPECT_EQ(sent["max_tokens"], 512);
    ASSERT_EQ(sent["messages"].size(), 1u);
    EXPECT_EQ(sent["messages"][0]["role"], "user");
    EXPECT_EQ(sent["messages"][0]["content"], "List 5 subtopics of Databases.");
    EXPECT_EQ(stub.last_auth(), "Bearer test-key");
}

TEST(LiveBackend, ExhaustedRetriesReportDetail) {
    StubServer stub({503, 503, 503, 200});
    LiveBackend backend(stub.url(), "k", std::make_shared<HttplibTransport>(std::chrono::seconds(5)), RetryPolicy{},
                        [](std::chrono::milliseconds) {});
    try {
        backend.complete("p", ModelParams{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Transport);
        EXPECT_NE(std::string(e.what()).find("3 attempts"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("503"), std::string::npos);
    }
    EXPECT_EQ(stub.hits(), 3u);
}

TEST(LiveBackend, ClientErrorsAreNotRetried) {
    StubServer stub({401});
    LiveBackend backend(stub.url(), "k", std::make_shared<HttplibTransport>(std::chrono::seconds(5)), RetryPolicy{},
                        [](std::chrono::milliseconds) {});
    EXPECT_THROW(backend.complete("p", ModelParams{}), Error);
    EXPECT_EQ(stub.hits(), 1u);
}

TEST(LiveBackend, ConnectionRefusedIsTransportError) {
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    int sleeps = 0;
    LiveBackend backend("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions", "k",
                        std::make_shared<HttplibTransport>(std::chrono::seconds(1)), RetryPolicy{},
                        [&](std::chrono::milliseconds) { ++sleeps; });
    try {
        backend.complete("p", ModelParams{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Transport);
    }
    EXPECT_EQ(sleeps, 2);
}

TEST(LiveBackend, MalformedBodyIsTransportError) {
    auto transport = std::make_shared<CannedTransport>(HttpResponse{200, R"({"choices": []})"});
    LiveBackend backend("http://x/v1", "k", transport, RetryPolicy{}, [](std::chrono::milliseconds) {});
    try {
        backend.complete("p", ModelParams{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Transport);
    }
    EXPECT_EQ(transport->calls, 1);
}

TEST(Fingerprint, DeterministicAndSensitive) {
    ModelParams p;
    EXPECT_EQ(request_fingerprint("List 5 subtopics of X.", p), request_fingerprint("List 5 subtopics of X.", p));
    EXPECT_NE(request_fingerprint("List 5 subtopics of X.", p), request_fingerprint("List 5 subtopics of Y.", p));
    EXPECT_NE(request_fingerprint("a", params_at(0.2)), request_fingerprint("a", params_at(0.7)));
    ModelParams other_model;
    other_model.model_name = "other";
    EXPECT_NE(request_fingerprint("a", p), request_fingerprint("a", other_model));
    ModelParams more_tokens;
    more_tokens.max_output_tokens = 1024;
    EXPECT_EQ(request_fingerprint("a", p), request_fingerprint("a", more_tokens));
    EXPECT_EQ(request_fingerprint("a", p).size(), 64u);
}

TEST(Fixtures, RecordThenReplay) {
    TempDir dir;
    auto store = std::make_shared<FixtureStore>(dir.str("fx"));
    auto inner = std::make_shared<testing_support::ScriptedBackend>(
        [](const std::string& prompt, const ModelParams&) { return "- " + prompt; });
    RecordingBackend recorder(inner, store);
    EXPECT_EQ(recorder.complete("hello", params_at(0.2)), "- hello");

    ReplayBackend replay(std::make_shared<FixtureStore>(dir.str("fx")));
    EXPECT_EQ(replay.complete("hello", params_at(0.2)), "- hello");
    EXPECT_EQ(replay.complete("hello", params_at(0.2)), "- hello");
    EXPECT_EQ(inner->calls, 1);

    try {
        replay.complete("hello", params_at(0.7));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::FixtureMiss);
        EXPECT_NE(std::string(e.what()).find("hello"), std::string::npos);
    }
}

TEST(Fixtures, FileLayoutIsHumanReadable) {
    TempDir dir;
    FixtureStore store(dir.str());
    CompletionExchange ex{"p", ModelParams{}, "1. A", request_fingerprint("p", ModelParams{}), "2026-01-01T00:00:00.000Z"};
    store.record(ex);
    auto path = store.path_for(ex.request_fingerprint);
    EXPECT_EQ(std::filesystem::path(path).stem().string(), ex.request_fingerprint);
    auto doc = parse_json_text(read_file(path));
    EXPECT_EQ(doc["prompt"], "p");
    EXPECT_EQ(doc["raw_response"], "1. A");
    EXPECT_EQ(doc["params"]["model_name"], "gpt-4");
    EXPECT_TRUE(doc.contains("timestamp"));
}

TEST(Fixtures, OverwriteWarns) {
    TempDir dir;
    std::vector<std::string> warnings;
    FixtureStore store(dir.str(), [&](std::string_view w) { warnings.emplace_back(w); });
    CompletionExchange ex{"p", ModelParams{}, "one", request_fingerprint("p", ModelParams{}), utc_now()};
    EXPECT_FALSE(store.record(ex));
    EXPECT_TRUE(store.record(ex));
    EXPECT_TRUE(warnings.empty());
    ex.raw_response = "two";
    EXPECT_TRUE(store.record(ex));
    EXPECT_EQ(warnings.size(), 1u);
    EXPECT_EQ(store.find(ex.request_fingerprint)->raw_response, "two");
}

TEST(Fixtures, UnwritableStoreIsStorageError) {
    TempDir dir;
    write_file_atomic(dir.str("blocker"), "x");
    FixtureStore store(dir.str("blocker/fx"));
    try {
        store.record(CompletionExchange{"p", ModelParams{}, "r", request_fingerprint("p", ModelParams{}), utc_now()});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Storage);
    }
}

TEST(MakeBackend, ConfigurationErrors) {
    GatewayConfig live;
    live.mode = GatewayMode::Live;
    live.api_key_env = "SCOPETREE_TEST_UNSET_VARIABLE";
    try {
        make_backend(live);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Configuration);
    }
    GatewayConfig replay;
    replay.mode = GatewayMode::Replay;
    EXPECT_THROW(make_backend(replay), Error);
    live.api_key = "explicit";
    EXPECT_NE(make_backend(live), nullptr);
}

TEST(ModelParamsValidate, RejectsBadValues) {
    ModelParams p;
    p.model_name.clear();
    EXPECT_THROW(p.validate(), Error);
    p = ModelParams{};
    p.temperature = -0.1;
    EXPECT_THROW(p.validate(), Error);
    p = ModelParams{};
    p.max_output_tokens = 0;
    EXPECT_THROW(p.validate(), Error);
}
