#pragma once

#include "scopetree/gateway.hpp"
#include "scopetree/hierarchy.hpp"
#include "scopetree/run.hpp"
#include "scopetree/tree_io.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>

namespace httplib {
class Server;
}

namespace scopetree {

struct ServiceConfig {
    /// Root of the on-disk store: trees/, runs/, fixtures/.
    std::string store_dir;
    /// Default completion mode for expansions (live or replay). When
    /// fixtures_dir is empty, `<store>/fixtures` is used.
    GatewayConfig gateway;
    /// Directory with the built UI bundle, served under "/". Optional.
    std::string ui_dir;
};

struct ApiRequest {
    std::string method;
    std::string path;
    std::string body;
    std::string content_type;
};

struct ApiResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// JSON-over-HTTP facade for trees, expansions, runs, annotations and
/// reports. Persists in the same formats as the CLI so both can share a
/// store. Writes to one tree are serialized; reads run concurrently.
class ScopeService {
public:
    explicit ScopeService(ServiceConfig config, std::shared_ptr<HttpTransport> transport = nullptr);

    /// Transport-independent entry point; bind() routes through here.
    ApiResponse handle(const ApiRequest& request);

    void bind(httplib::Server& server);

    std::string trees_dir() const;
    std::string runs_dir() const;
    std::string fixtures_dir() const;

private:
    struct SessionTree {
        std::string tree_id;
        TopicTree tree{"root"};
        std::string created;
        std::string modified;
    };
    struct TreeSlot {
        std::shared_mutex mutex;
        std::optional<SessionTree> session;
    };

    std::shared_ptr<TreeSlot> slot(const std::string& tree_id);
    void persist_tree(const SessionTree& session);
    std::shared_ptr<CompletionBackend> backend_for(GatewayMode mode);

    ApiResponse create_tree(const ApiRequest& req);
    ApiResponse list_trees();
    ApiResponse get_tree(const std::string& tree_id);
    ApiResponse expand(const std::string& tree_id, const ApiRequest& req);
    ApiResponse prune(const std::string& tree_id, const std::string& node_id);
    ApiResponse list_runs();
    ApiResponse get_run(const std::string& run_id);
    ApiResponse get_annotations(const std::string& run_id);
    ApiResponse put_annotations(const std::string& run_id, const ApiRequest& req);
    ApiResponse get_report(const std::string& run_id);

    ServiceConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    std::mutex slots_mutex_;
    std::map<std::string, std::shared_ptr<TreeSlot>> slots_;
    std::mutex runs_mutex_;
    std::mutex backends_mutex_;
    std::map<GatewayMode, std::shared_ptr<CompletionBackend>> backends_;
};

/// Tree as served by GET /trees/{id}: ids, labels, levels and links.
Json tree_view_json(const TopicTree& tree);

}  // namespace scopetree
