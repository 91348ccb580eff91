#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mcpscope/crawl.hpp"
#include "mcpscope/usage.hpp"

namespace mcpscope::pipeline {

enum class Stage { crawl, extract, classify, detect_ai, usage, fit, report };

const std::vector<Stage>& all_stages();  // dependency order
std::string to_string(Stage s);          // "detect-ai" for detect_ai
Stage parse_stage(std::string_view name);
/// Comma list or "all"; result in dependency order without duplicates. Throws ConfigError.
std::vector<Stage> parse_stages(std::string_view list);
/// Stages whose artifacts `s` reads.
const std::vector<Stage>& dependencies(Stage s);
/// Files a stage writes into the run directory (the report stage writes under report/).
const std::vector<std::string>& artifacts(Stage s);

struct ProviderConfig {
    std::string kind = "none";  // none | anthropic | openai
    std::string url;
    std::string model;
    std::string api_key_env = "ANTHROPIC_API_KEY";
    int max_tokens = 4096;
};

struct EmbeddingConfig {
    std::string kind = "hashed";  // hashed | http
    std::size_t dimension = 1024;
    std::string url;
    std::string model;
    std::string api_key_env = "EMBEDDING_API_KEY";
};

struct TaxonomyConfig {
    fs::path onet_tasks;  // empty: classify without task domains
    fs::path onet_work_context;
    fs::path onet_crosswalk;
    int k = 400;
    int n_init = 10;
};

struct FitConfig {
    std::size_t n_boot = 1000;
    fs::path ratings_file;  // optional CSV: item, rater, label
};

struct PipelineConfig {
    fs::path config_file;
    fs::path output_dir = "runs";
    std::uint64_t seed = 42;
    std::string github_api = "https://api.github.com";
    std::string github_token_env = "GITHUB_TOKEN";
    int max_retries = 5;
    std::chrono::milliseconds initial_backoff{500};
    std::optional<fs::path> fixture_dir;  // offline: answer every request from <dir>/http
    std::optional<fs::path> from_run;     // prior run supplying artifacts of stages not requested

    crawl::CrawlConfig crawl;
    ProviderConfig provider;
    EmbeddingConfig embedding;
    TaxonomyConfig taxonomy;
    usage::UsageConfig usage;
    FitConfig fit;

    /// INI file. Relative paths resolve against the file's directory. Unknown keys and
    /// inline secrets are ConfigErrors.
    static PipelineConfig load(const fs::path& ini);
    static PipelineConfig parse(const std::string& ini_text, const fs::path& base_dir);
    void validate() const;
    /// Secrets appear only as their environment variable name and whether it is set.
    [[nodiscard]] Json redacted() const;
    /// Digest of the settings that affect artifacts (no paths to the run store, no secrets).
    [[nodiscard]] std::string digest() const;
};

/// runs/<timestamp>-<short-digest>/ owned through run.lock while open.
class RunStore {
public:
    /// Creates a fresh run directory and takes its lock. Throws ConfigError when the
    /// directory cannot be created or is locked.
    static RunStore create(const fs::path& root, const std::string& config_digest,
                           std::chrono::system_clock::time_point now = std::chrono::system_clock::now());
    RunStore(RunStore&&) noexcept;
    RunStore& operator=(RunStore&&) = delete;
    ~RunStore();

    [[nodiscard]] const fs::path& dir() const { return dir_; }
    [[nodiscard]] std::string id() const { return dir_.filename().string(); }
    [[nodiscard]] fs::path path(const std::string& artifact) const { return dir_ / artifact; }
    /// Writes manifest.json (complete=true), then releases the lock.
    void finish(Json manifest);
    /// Marks the manifest failed and releases the lock.
    void abandon(Json manifest, const std::string& reason);

private:
    explicit RunStore(fs::path dir);
    void release();
    fs::path dir_;
    bool locked_ = false;
};

/// Whether a completed run (manifest complete) holds every artifact of a stage.
bool run_has_stage(const fs::path& run_dir, Stage s);

/// Newest completed run under root, if any.
std::optional<fs::path> latest_run(const fs::path& root);

struct StageRecord {
    Stage stage;
    double seconds = 0;
    std::map<std::string, std::string> inputs;   // artifact -> "sha256:<hex>" (prior-run inputs prefixed by run id)
    std::map<std::string, std::string> outputs;  // artifact -> "sha256:<hex>"
    Json counters = Json::object();
};

struct RunResult {
    fs::path run_dir;
    std::vector<StageRecord> stages;
    Json manifest;
};

/// Checks dependencies for the requested stages against this run and cfg.from_run.
/// Throws MissingStageError naming the first stage whose output is unavailable.
void check_dependencies(const PipelineConfig& cfg, const std::vector<Stage>& stages);

/// Validates, checks dependencies, preflights providers, then runs stages in order.
RunResult run(const PipelineConfig& cfg, const std::vector<Stage>& stages);

}  // namespace mcpscope::pipeline
