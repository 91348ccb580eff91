// mcp-scope: crawl, classify and measure MCP servers; fit and report the trends.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "mcpscope/common/errors.hpp"
#include "mcpscope/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using namespace mcpscope;

enum Exit { ok = 0, internal = 1, config = 2, missing_stage = 3, provider = 4 };

struct Options {
    std::string config;
    std::string stages = "all";
    std::string fixture_dir;
    std::string from_run;
    std::string output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_boot;
    bool verbose = false;
    bool quiet = false;
};

pipeline::PipelineConfig load_config(const Options& o) {
    fs::path ini = o.config;
    if (ini.empty() && !o.fixture_dir.empty() && fs::exists(fs::path(o.fixture_dir) / "mcp-scope.ini")) {
        ini = fs::path(o.fixture_dir) / "mcp-scope.ini";
    }
    auto cfg = ini.empty() ? pipeline::PipelineConfig::parse("", fs::current_path()) : pipeline::PipelineConfig::load(ini);
    if (!o.fixture_dir.empty()) cfg.fixture_dir = fs::absolute(o.fixture_dir);
    if (!o.output_dir.empty()) {
        const bool default_cache = cfg.usage.cache_dir == cfg.output_dir / "cache" / "downloads";
        cfg.output_dir = fs::absolute(o.output_dir);
        if (default_cache) cfg.usage.cache_dir = cfg.output_dir / "cache" / "downloads";
    }
    if (o.seed) cfg.seed = *o.seed;
    if (o.n_boot) cfg.fit.n_boot = *o.n_boot;
    return cfg;
}

int execute(const Options& o, const std::vector<pipeline::Stage>& stages, bool needs_prior) {
    auto cfg = load_config(o);
    if (!o.from_run.empty()) {
        cfg.from_run = fs::absolute(o.from_run);
    } else if (needs_prior) {
        cfg.from_run = pipeline::latest_run(cfg.output_dir);
        if (!cfg.from_run) {
            throw MissingStageError(pipeline::to_string(pipeline::dependencies(stages.front()).back()),
                                    "no completed run under " + cfg.output_dir.string() + "; pass --from-run");
        }
    }
    auto res = pipeline::run(cfg, stages);
    for (const auto& s : res.stages) {
        spdlog::info("{}: {:.2f}s {}", pipeline::to_string(s.stage), s.seconds, s.counters.dump());
    }
    std::cout << res.run_dir.string() << "\n";
    return ok;
}

void common_flags(CLI::App* app, Options& o) {
    app->add_option("--config", o.config, "INI configuration file");
    app->add_option("--fixture-dir", o.fixture_dir, "answer every remote request from <dir>/http");
    app->add_option("--output-dir", o.output_dir, "run store root (overrides [run] output_dir)");
    app->add_option("--from-run", o.from_run, "completed run supplying artifacts of stages not requested");
    app->add_option("--seed", o.seed, "seed for clustering and bootstrap");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Crawl, classify and measure MCP servers"};
    app.require_subcommand(1);
    Options o;
    app.add_flag("-v,--verbose", o.verbose, "debug logging");
    app.add_flag("-q,--quiet", o.quiet, "warnings and errors only");

    auto* run = app.add_subcommand("run", "run pipeline stages into a new run directory");
    common_flags(run, o);
    run->add_option("--stages", o.stages, "comma list of crawl,extract,classify,detect-ai,usage,fit,report or all");
    run->add_option("--n-boot", o.n_boot, "bootstrap replicates");

    auto* fit = app.add_subcommand("fit", "refit trends from a prior run's usage tables");
    common_flags(fit, o);
    fit->add_option("--n-boot", o.n_boot, "bootstrap replicates");

    auto* report = app.add_subcommand("report", "regenerate tables and charts from a prior run");
    common_flags(report, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? Exit::ok : Exit::config;
    }

    auto logger = spdlog::stderr_color_mt("mcp-scope");
    spdlog::set_default_logger(logger);
    spdlog::set_level(o.verbose ? spdlog::level::debug : o.quiet ? spdlog::level::warn : spdlog::level::info);

    try {
        if (*run) {
            auto stages = pipeline::parse_stages(o.stages);
            return execute(o, stages, false);
        }
        if (*fit) return execute(o, {pipeline::Stage::fit}, true);
        if (*report) return execute(o, {pipeline::Stage::report}, true);
    } catch (const ConfigError& e) {
        spdlog::error("config: {}", e.what());
        return Exit::config;
    } catch (const MissingStageError& e) {
        spdlog::error("missing stage {}: {}", e.stage(), e.what());
        return Exit::missing_stage;
    } catch (const ProviderAuthError& e) {
        spdlog::error("provider: {}", e.what());
        return Exit::provider;
    } catch (const ProviderUnavailable& e) {
        spdlog::error("provider: {}", e.what());
        return Exit::provider;
    } catch (const std::exception& e) {
        spdlog::error("internal: {}", e.what());
        return Exit::internal;
    }
    return Exit::internal;
}
