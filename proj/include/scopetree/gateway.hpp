#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace scopetree {

struct ModelParams {
    std::string model_name = "gpt-4";
    double temperature = 1.0;
    int max_output_tokens = 512;

    /// Throws InvalidArgument on an empty model name, negative temperature or
    /// non-positive token budget.
    void validate() const;

    bool operator==(const ModelParams&) const = default;
};

/// Stable SHA-256 (hex) over prompt, model name and temperature. Token budget
/// is deliberately not part of the key.
std::string request_fingerprint(std::string_view prompt, const ModelParams& params);

struct CompletionExchange {
    std::string prompt;
    ModelParams params;
    std::string raw_response;
    std::string request_fingerprint;
    std::string timestamp;
};

/// One JSON file per fingerprint: `<dir>/<fingerprint>.json`.
class FixtureStore {
public:
    using WarningSink = std::function<void(std::string_view)>;

    explicit FixtureStore(std::string dir, WarningSink warn = {});

    const std::string& dir() const noexcept { return dir_; }

    /// Persists the exchange; returns true when an existing fixture was
    /// overwritten (a warning is emitted in that case). Throws Storage on I/O
    /// failure.
    bool record(const CompletionExchange& exchange);

    std::optional<CompletionExchange> find(const std::string& fingerprint) const;

    std::string path_for(const std::string& fingerprint) const;

private:
    std::string dir_;
    WarningSink warn_;
    mutable std::mutex mutex_;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Minimal POST-only transport so the live client can be exercised against
/// stubs. Implementations throw Error(Transport) when no response arrives.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const std::string& url,
                              const std::map<std::string, std::string>& headers,
                              const std::string& body) = 0;
};

/// cpp-httplib backed transport (http and https).
class HttplibTransport final : public HttpTransport {
public:
    explicit HttplibTransport(std::chrono::seconds timeout = std::chrono::seconds(120))
        : timeout_(timeout) {}

    HttpResponse post(const std::string& url,
                      const std::map<std::string, std::string>& headers,
                      const std::string& body) override;

private:
    std::chrono::seconds timeout_;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;
    /// Each delay is stretched by a uniform factor in [1, 1 + jitter].
    double jitter = 0.25;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Anything that turns a prompt into completion text.
class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual std::string complete(const std::string& prompt, const ModelParams& params) = 0;
};

/// Chat-completions POST: one user message, model, temperature, max_tokens.
/// Retries transport failures, 429 and 5xx with exponential backoff.
class LiveBackend final : public CompletionBackend {
public:
    LiveBackend(std::string endpoint, std::string api_key, std::shared_ptr<HttpTransport> transport,
                RetryPolicy retry = {}, Sleeper sleeper = {});

    std::string complete(const std::string& prompt, const ModelParams& params) override;

private:
    std::string endpoint_;
    std::string api_key_;
    std::shared_ptr<HttpTransport> transport_;
    RetryPolicy retry_;
    Sleeper sleeper_;
};

/// Serves stored fixtures only and never touches the network.
class ReplayBackend final : public CompletionBackend {
public:
    explicit ReplayBackend(std::shared_ptr<FixtureStore> store) : store_(std::move(store)) {}

    std::string complete(const std::string& prompt, const ModelParams& params) override;

private:
    std::shared_ptr<FixtureStore> store_;
};

/// Forwards to an inner backend and persists every exchange.
class RecordingBackend final : public CompletionBackend {
public:
    RecordingBackend(std::shared_ptr<CompletionBackend> inner, std::shared_ptr<FixtureStore> store)
        : inner_(std::move(inner)), store_(std::move(store)) {}

    std::string complete(const std::string& prompt, const ModelParams& params) override;

private:
    std::shared_ptr<CompletionBackend> inner_;
    std::shared_ptr<FixtureStore> store_;
};

enum class GatewayMode { Live, Record, Replay };

std::string_view to_string(GatewayMode m);
std::optional<GatewayMode> parse_gateway_mode(std::string_view text);

inline constexpr std::string_view kDefaultEndpoint = "https://api.openai.com/v1/chat/completions";
inline constexpr std::string_view kDefaultApiKeyEnv = "SCOPETREE_API_KEY";

struct GatewayConfig {
    GatewayMode mode = GatewayMode::Replay;
    std::string endpoint{kDefaultEndpoint};
    std::string api_key_env{kDefaultApiKeyEnv};
    /// Overrides the environment lookup when set.
    std::optional<std::string> api_key;
    std::string fixtures_dir;
    RetryPolicy retry;
};

/// Builds the backend for `config.mode`. Live and record modes need a
/// credential (Configuration error otherwise); record and replay need a
/// fixtures directory. `transport` defaults to HttplibTransport and is not
/// consulted in replay mode.
std::shared_ptr<CompletionBackend> make_backend(const GatewayConfig& config,
                                                std::shared_ptr<HttpTransport> transport = nullptr,
                                                FixtureStore::WarningSink warn = {});

}  // namespace scopetree
