#pragma once

#include "scopetree/eval.hpp"
#include "scopetree/gateway.hpp"
#include "scopetree/run.hpp"
#include "scopetree/util.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace testing_support {

using namespace scopetree;

class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "scopetree-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& sub = {}) const { return sub.empty() ? path_.string() : (path_ / sub).string(); }

private:
    std::filesystem::path path_;
};

/// Five distinct numbered items derived from the prompt text.
inline std::string synthetic_completion(const std::string& prompt, int k = 5) {
    auto tag = sha256_hex(prompt).substr(0, 8);
    std::string out = "Here are some subtopics:\n";
    for (int i = 1; i <= k; ++i) {
        out += std::to_string(i) + ". Topic " + tag + "-" + std::to_string(i) + "\n";
    }
    return out;
}

class ScriptedBackend final : public CompletionBackend {
public:
    using Script = std::function<std::string(const std::string&, const ModelParams&)>;
    explicit ScriptedBackend(Script script) : script_(std::move(script)) {}

    std::string complete(const std::string& prompt, const ModelParams& params) override {
        ++calls;
        return script_(prompt, params);
    }

    std::atomic<int> calls{0};

private:
    Script script_;
};

/// Ok record with `labels` as its parsed subtopics, generated from a target
/// at `target_level` (outputs land one level below).
inline GenerationRecord ok_record(const std::string& id, PromptStrategy strategy, int target_level,
                                  std::vector<std::string> labels) {
    GenerationRecord r;
    r.record_id = id;
    r.run_id = "test";
    std::vector<std::string> path;
    for (int i = 0; i < target_level; ++i) path.push_back("L" + std::to_string(i + 1));
    r.target_path = TopicPath(path);
    r.strategy = strategy;
    r.k = static_cast<int>(labels.size());
    r.subtopics = std::move(labels);
    r.status = RecordStatus::Ok;
    return r;
}

inline std::vector<std::string> numbered_labels(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back("s" + std::to_string(i));
    return out;
}

}  // namespace testing_support
