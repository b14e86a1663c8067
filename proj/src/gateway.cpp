#include "scopetree/gateway.hpp"

#include "scopetree/error.hpp"
#include "scopetree/tree_io.hpp"
#include "scopetree/util.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>
#include <thread>

namespace scopetree {

namespace fs = std::filesystem;

void ModelParams::validate() const {
    if (model_name.empty()) throw Error(ErrorKind::InvalidArgument, "model_name is empty");
    if (!(temperature >= 0.0)) throw Error(ErrorKind::InvalidArgument, "temperature must be >= 0");
    if (max_output_tokens < 1) throw Error(ErrorKind::InvalidArgument, "max_output_tokens must be >= 1");
}

std::string request_fingerprint(std::string_view prompt, const ModelParams& params) {
    Json key = Json::array({std::string(prompt), params.model_name, params.temperature});
    return sha256_hex(dump_line(key));
}

// ---------------------------------------------------------------------------
// Fixture store

namespace {

Json params_to_json(const ModelParams& p) {
    return Json{{"model_name", p.model_name},
                {"temperature", p.temperature},
                {"max_output_tokens", p.max_output_tokens}};
}

ModelParams params_from_json(const Json& j) {
    ModelParams p;
    p.model_name = j.at("model_name").get<std::string>();
    p.temperature = j.at("temperature").get<double>();
    p.max_output_tokens = j.at("max_output_tokens").get<int>();
    return p;
}

}  // namespace

FixtureStore::FixtureStore(std::string dir, WarningSink warn)
    : dir_(std::move(dir)), warn_(std::move(warn)) {
    if (!warn_) {
        warn_ = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
    }
}

std::string FixtureStore::path_for(const std::string& fingerprint) const {
    return (fs::path(dir_) / (fingerprint + ".json")).string();
}

bool FixtureStore::record(const CompletionExchange& exchange) {
    auto fingerprint = exchange.request_fingerprint.empty()
                           ? request_fingerprint(exchange.prompt, exchange.params)
                           : exchange.request_fingerprint;
    Json doc{{"prompt", exchange.prompt},
             {"params", params_to_json(exchange.params)},
             {"raw_response", exchange.raw_response},
             {"timestamp", exchange.timestamp}};

    std::lock_guard lock(mutex_);
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorKind::Storage, "cannot create fixture directory " + dir_);
    auto path = path_for(fingerprint);
    bool existed = fs::exists(path, ec);
    bool changed = true;
    if (existed) {
        try {
            changed = parse_json_text(read_file(path)).value("raw_response", "") != exchange.raw_response;
        } catch (const std::exception&) {
        }
    }
    write_file_atomic(path, dump_canonical(doc));
    // Identical prompts across strategies re-record the same response; only a changed one is worth noting.
    if (existed && changed) warn_("re-recorded fixture " + fingerprint + " overwrites the previous response");
    return existed;
}

std::optional<CompletionExchange> FixtureStore::find(const std::string& fingerprint) const {
    std::lock_guard lock(mutex_);
    auto path = path_for(fingerprint);
    std::error_code ec;
    if (!fs::exists(path, ec)) return std::nullopt;
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error&) {
        return std::nullopt;
    }
    auto doc = parse_json_text(text, "fixture " + path);
    try {
        CompletionExchange ex;
        ex.prompt = doc.at("prompt").get<std::string>();
        ex.params = params_from_json(doc.at("params"));
        ex.raw_response = doc.at("raw_response").get<std::string>();
        ex.timestamp = doc.value("timestamp", std::string{});
        ex.request_fingerprint = fingerprint;
        return ex;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, "fixture " + path + " is malformed: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorKind::Configuration, "endpoint URL needs a scheme: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string extract_content(const std::string& body) {
    try {
        return Json::parse(body).at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Transport, std::string("completion response is malformed: ") + e.what());
    }
}

}  // namespace

HttpResponse HttplibTransport::post(const std::string& url,
                                    const std::map<std::string, std::string>& headers,
                                    const std::string& body) {
    auto [origin, path] = split_url(url);
    httplib::Client client(origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);
    auto res = client.Post(path, hdrs, body, "application/json");
    if (!res) {
        throw Error(ErrorKind::Transport,
                    "POST " + url + " failed: " + httplib::to_string(res.error()));
    }
    return HttpResponse{res->status, res->body};
}

LiveBackend::LiveBackend(std::string endpoint, std::string api_key,
                         std::shared_ptr<HttpTransport> transport, RetryPolicy retry,
                         Sleeper sleeper)
    : endpoint_(std::move(endpoint)),
      api_key_(std::move(api_key)),
      transport_(std::move(transport)),
      retry_(retry),
      sleeper_(std::move(sleeper)) {
    if (api_key_.empty()) throw Error(ErrorKind::Configuration, "live mode needs an API credential");
    if (!transport_) throw Error(ErrorKind::Configuration, "live mode needs an HTTP transport");
    if (retry_.max_attempts < 1) retry_.max_attempts = 1;
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string LiveBackend::complete(const std::string& prompt, const ModelParams& params) {
    params.validate();
    Json request{{"model", params.model_name},
                 {"messages", Json::array({Json{{"role", "user"}, {"content", prompt}}})},
                 {"temperature", params.temperature},
                 {"max_tokens", params.max_output_tokens}};
    const auto body = dump_line(request);
    const std::map<std::string, std::string> headers{
        {"Authorization", "Bearer " + api_key_},
    };

    static thread_local std::mt19937 rng{std::random_device{}()};
    std::uniform_real_distribution<double> stretch(1.0, 1.0 + std::max(0.0, retry_.jitter));

    std::string last_error;
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
        std::optional<HttpResponse> res;
        try {
            res = transport_->post(endpoint_, headers, body);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Transport) throw;
            last_error = e.what();
        }
        if (res && res->status >= 200 && res->status < 300) return extract_content(res->body);
        if (res) {
            last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
            if (res->status != 429 && res->status < 500) {
                throw Error(ErrorKind::Transport, "completion request rejected: " + last_error);
            }
        }
        if (attempt < retry_.max_attempts) {
            double scale = std::pow(retry_.factor, attempt - 1) * stretch(rng);
            sleeper_(std::chrono::milliseconds(
                static_cast<long long>(static_cast<double>(retry_.base_delay.count()) * scale)));
        }
    }
    throw Error(ErrorKind::Transport, "completion failed after " +
                                          std::to_string(retry_.max_attempts) +
                                          " attempts; last error: " + last_error);
}

std::string ReplayBackend::complete(const std::string& prompt, const ModelParams& params) {
    auto fingerprint = request_fingerprint(prompt, params);
    auto hit = store_->find(fingerprint);
    if (!hit) {
        throw Error(ErrorKind::FixtureMiss,
                    "no fixture " + fingerprint + " for prompt: " + prompt);
    }
    return hit->raw_response;
}

std::string RecordingBackend::complete(const std::string& prompt, const ModelParams& params) {
    auto raw = inner_->complete(prompt, params);
    CompletionExchange ex{prompt, params, raw, request_fingerprint(prompt, params), utc_now()};
    store_->record(ex);
    return raw;
}

std::string_view to_string(GatewayMode m) {
    switch (m) {
        case GatewayMode::Live: return "live";
        case GatewayMode::Record: return "record";
        case GatewayMode::Replay: return "replay";
    }
    return "replay";
}

std::optional<GatewayMode> parse_gateway_mode(std::string_view text) {
    if (text == "live") return GatewayMode::Live;
    if (text == "record") return GatewayMode::Record;
    if (text == "replay") return GatewayMode::Replay;
    return std::nullopt;
}

std::shared_ptr<CompletionBackend> make_backend(const GatewayConfig& config,
                                                std::shared_ptr<HttpTransport> transport,
                                                FixtureStore::WarningSink warn) {
    auto need_fixtures = [&] {
        if (config.fixtures_dir.empty()) {
            throw Error(ErrorKind::Configuration,
                        std::string(to_string(config.mode)) + " mode needs a fixtures directory");
        }
        return std::make_shared<FixtureStore>(config.fixtures_dir, warn);
    };
    auto make_live = [&] {
        std::string key;
        if (config.api_key) {
            key = *config.api_key;
        } else if (const char* env = std::getenv(config.api_key_env.c_str())) {
            key = env;
        }
        if (key.empty()) {
            throw Error(ErrorKind::Configuration,
                        "no API credential: set " + config.api_key_env);
        }
        if (!transport) transport = std::make_shared<HttplibTransport>();
        return std::make_shared<LiveBackend>(config.endpoint, key, transport, config.retry);
    };

    switch (config.mode) {
        case GatewayMode::Replay: return std::make_shared<ReplayBackend>(need_fixtures());
        case GatewayMode::Live: return make_live();
        case GatewayMode::Record: {
            auto store = need_fixtures();
            return std::make_shared<RecordingBackend>(make_live(), store);
        }
    }
    throw Error(ErrorKind::Configuration, "unknown gateway mode");
}

}  // namespace scopetree
