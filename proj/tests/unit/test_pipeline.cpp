#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <unistd.h>

#include "mcpscope/common/errors.hpp"
#include "mcpscope/pipeline.hpp"

using namespace mcpscope;
using namespace mcpscope::pipeline;

namespace {

const fs::path kCorpus = fs::path(MCPSCOPE_FIXTURE_DIR) / "corpus";

fs::path scratch(const std::string& name) {
    auto d = fs::temp_directory_path() / fmt::format("mcpscope-pipe-{}-{}", ::getpid(), name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> header(const fs::path& csv) {
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    std::vector<std::string> cols;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    return cols;
}

PipelineConfig corpus_config(const fs::path& out) {
    auto cfg = PipelineConfig::load(kCorpus / "mcp-scope.ini");
    cfg.fixture_dir = kCorpus;
    cfg.output_dir = out;
    cfg.usage.cache_dir = out / "cache";
    cfg.fit.n_boot = 50;
    return cfg;
}

struct FullRun {
    fs::path root;
    RunResult all;
};

const FullRun& full_run() {
    static const FullRun r = [] {
        FullRun x;
        x.root = scratch("full");
        x.all = run(corpus_config(x.root), all_stages());
        return x;
    }();
    return r;
}

}  // namespace

TEST_CASE("stage lists") {
    CHECK(parse_stages("all") == all_stages());
    CHECK(parse_stages("report, crawl,extract,crawl") ==
          std::vector<Stage>{Stage::crawl, Stage::extract, Stage::report});
    CHECK(parse_stages("detect-ai") == std::vector<Stage>{Stage::detect_ai});
    CHECK_THROWS_AS(parse_stages("crawl,bogus"), ConfigError);
    CHECK_THROWS_AS(parse_stages(""), ConfigError);
    for (auto s : all_stages()) {
        CHECK(parse_stage(to_string(s)) == s);
        for (auto d : dependencies(s)) {
            auto at = [](Stage x) { return std::find(all_stages().begin(), all_stages().end(), x); };
            CHECK(at(d) < at(s));
        }
    }
}

TEST_CASE("config parsing rejects unknown keys, inline secrets and bad values") {
    const auto base = fs::temp_directory_path();
    CHECK_NOTHROW(PipelineConfig::parse("[run]\nseed = 7\n", base));
    CHECK(PipelineConfig::parse("[run]\nseed = 7\n", base).seed == 7);
    CHECK_THROWS_AS(PipelineConfig::parse("[run]\nsede = 7\n", base), ConfigError);
    CHECK_THROWS_AS(PipelineConfig::parse("[nowhere]\nx = 1\n", base), ConfigError);
    CHECK_THROWS_AS(PipelineConfig::parse("[provider]\napi_key = sk-live-123\n", base), ConfigError);
    CHECK_THROWS_AS(PipelineConfig::parse("[crawl]\ngithub_token = ghp_abc\n", base), ConfigError);
    CHECK_THROWS_AS(PipelineConfig::parse("[run]\nseed = many\n", base), ConfigError);
    CHECK_THROWS_AS(PipelineConfig::parse("[crawl]\nsnapshot_cutoff = 2025-13-40\n", base), ConfigError);
    CHECK_THROWS_AS(PipelineConfig::parse("[crawl]\nsources = github_search,carrier_pigeon\n", base), ConfigError);
    // Naming the variable is fine.
    auto c = PipelineConfig::parse("[provider]\napi_key_env = MY_KEY\n", base);
    CHECK(c.provider.api_key_env == "MY_KEY");

    auto bad = PipelineConfig::parse("[taxonomy]\nk = 0\nonet_tasks = /nonexistent/tasks.txt\n", base);
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    auto nob = PipelineConfig::parse("[fit]\nn_boot = 0\n", base);
    CHECK_THROWS_AS(nob.validate(), ConfigError);
}

TEST_CASE("relative paths resolve against the config file") {
    auto cfg = PipelineConfig::load(kCorpus / "mcp-scope.ini");
    CHECK(cfg.usage.geo_file == fs::weakly_canonical(kCorpus / "geo.csv"));
    CHECK(fs::exists(cfg.taxonomy.onet_tasks));
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("redaction keeps secret values out and the digest ignores them") {
    auto cfg = PipelineConfig::parse("[provider]\napi_key_env = MCPSCOPE_TEST_SECRET\n", fs::temp_directory_path());
    ::unsetenv("MCPSCOPE_TEST_SECRET");
    const auto d0 = cfg.digest();
    auto r0 = cfg.redacted().dump();
    ::setenv("MCPSCOPE_TEST_SECRET", "hunter2-very-secret", 1);
    auto r1 = cfg.redacted().dump();
    CHECK(r1.find("hunter2") == std::string::npos);
    CHECK(r1.find("MCPSCOPE_TEST_SECRET") != std::string::npos);
    CHECK(r0 != r1);  // the "set" flag flips
    CHECK(cfg.digest() == d0);
    ::unsetenv("MCPSCOPE_TEST_SECRET");

    auto other = cfg;
    other.seed = cfg.seed + 1;
    CHECK(other.digest() != d0);
    CHECK(PipelineConfig::parse("[provider]\napi_key_env = MCPSCOPE_TEST_SECRET\n", fs::temp_directory_path())
              .digest() == d0);
}

TEST_CASE("run store names, locks and collisions") {
    auto root = scratch("store");
    const auto now = std::chrono::sys_days{std::chrono::year{2025} / 6 / 1} + std::chrono::hours(3);
    auto a = RunStore::create(root, "0123456789abcdef", now);
    CHECK(a.id() == "20250601T030000Z-01234567");
    CHECK(fs::exists(a.dir() / "run.lock"));
    auto b = RunStore::create(root, "0123456789abcdef", now);
    CHECK(b.id() == "20250601T030000Z-01234567-2");
    CHECK_FALSE(latest_run(root));
    a.finish(Json{{"stages", Json::array()}});
    CHECK_FALSE(fs::exists(a.dir() / "run.lock"));
    CHECK(read_json(a.dir() / "manifest.json").at("complete") == true);
    CHECK(latest_run(root) == a.dir());
    b.abandon(Json{{"stages", Json::array()}}, "test");
    CHECK(read_json(b.dir() / "manifest.json").at("complete") == false);
    CHECK(latest_run(root) == a.dir());
    // Same second, smaller digest, finished later: still the latest.
    auto c = RunStore::create(root, "00000000ffffffff", now);
    c.finish(Json{{"stages", Json::array()}});
    CHECK(latest_run(root) == c.dir());
}

TEST_CASE("missing dependency stage is named") {
    auto cfg = corpus_config(scratch("deps"));
    try {
        check_dependencies(cfg, {Stage::fit});
        FAIL("expected MissingStageError");
    } catch (const MissingStageError& e) {
        CHECK(e.stage() == "extract");
    }
    try {
        run(cfg, {Stage::usage, Stage::report});
        FAIL("expected MissingStageError");
    } catch (const MissingStageError& e) {
        CHECK(e.stage() == "extract");
    }
    CHECK_NOTHROW(check_dependencies(cfg, {Stage::crawl}));
}

TEST_CASE("full offline run") {
    const auto& r = full_run();
    const auto& dir = r.all.run_dir;
    REQUIRE(r.all.stages.size() == all_stages().size());
    for (auto s : all_stages()) CHECK(run_has_stage(dir, s));
    auto m = read_json(dir / "manifest.json");
    CHECK(m.at("complete") == true);
    CHECK(m.at("seed") == 42);
    CHECK(m.at("stages").size() == 7);
    CHECK_FALSE(fs::exists(dir / "run.lock"));
    for (const auto& st : m.at("stages")) {
        CHECK(st.at("status") == "ok");
        for (const auto& [name, hash] : st.at("outputs").items()) {
            CHECK(hash.get<std::string>().rfind("sha256:", 0) == 0);
            CHECK(fs::exists(dir / name));
        }
    }
    CHECK(m.at("stages")[1].at("counters").at("servers") == 11);
}

TEST_CASE("report regeneration is byte-identical") {
    const auto& r = full_run();
    auto cfg = corpus_config(r.root);
    cfg.from_run = r.all.run_dir;
    auto a = run(cfg, {Stage::report});
    auto b = run(cfg, {Stage::report});
    REQUIRE(a.run_dir != b.run_dir);
    // Inputs come from the prior run and are fingerprinted with its id.
    const auto& in = a.stages.at(0).inputs;
    REQUIRE_FALSE(in.empty());
    for (const auto& [_, v] : in) CHECK(v.rfind(r.all.run_dir.filename().string() + ":", 0) == 0);
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(r.all.run_dir / "report")) {
        const auto name = e.path().filename();
        CAPTURE(name.string());
        CHECK(slurp(a.run_dir / "report" / name) == slurp(e.path()));
        CHECK(slurp(b.run_dir / "report" / name) == slurp(e.path()));
        ++n;
    }
    CHECK(n >= 16);
}

TEST_CASE("report column shapes") {
    const auto rep = full_run().all.run_dir / "report";
    CHECK(header(rep / "domains.csv") == std::vector<std::string>{"domain", "servers_n", "servers_pct",
                                                                   "server_downloads_pct", "tools_n", "tools_pct",
                                                                   "tool_downloads_pct"});
    CHECK(header(rep / "direct_impact.csv") ==
          std::vector<std::string>{"month", "total_downloads", "category", "code", "functionality", "share",
                                   "overall_share"});
    auto ai = header(rep / "ai_coauthor.csv");
    REQUIRE(ai.size() == 7 + 12);
    CHECK(std::vector<std::string>(ai.begin(), ai.begin() + 7) ==
          std::vector<std::string>{"month", "new_servers", "ai_servers", "ai_share", "fit", "fit_lower", "fit_upper"});
    CHECK(header(rep / "payments.csv") == std::vector<std::string>{"month", "servers_autonomy_ge2", "autonomy_1",
                                                                    "autonomy_2", "autonomy_3", "autonomy_4"});
    // Direct impact: 11 functionality rows per month.
    std::ifstream in(rep / "direct_impact.csv");
    std::string line;
    std::getline(in, line);
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows % 11 == 0);
}

TEST_CASE("concentration table equals a prefix-sum oracle") {
    const auto dir = full_run().all.run_dir;
    auto t = read_csv(dir / "concentration.csv");
    for (const std::string scope : {"all", "npm", "pypi"}) {
        std::vector<double> d;
        std::vector<double> cum;
        for (const auto& row : t.rows) {
            if (row.at(0) != scope) continue;
            d.push_back(std::stod(row.at(3)));
            cum.push_back(std::stod(row.at(4)));
        }
        REQUIRE_FALSE(d.empty());
        CHECK(std::is_sorted(d.rbegin(), d.rend()));
        double total = 0;
        for (double x : d) total += x;
        double run = 0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            run += d[i];
            CHECK(std::abs(cum[i] - run / total) <= 5e-7);  // six decimals in the file
        }
    }
}
