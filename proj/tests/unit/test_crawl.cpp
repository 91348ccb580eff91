#include <doctest.h>

#include <random>

#include <fmt/format.h>
#include <unistd.h>

#include "mcpscope/common/errors.hpp"
#include "mcpscope/crawl.hpp"

using namespace mcpscope;
using namespace mcpscope::crawl;

namespace {

/// Scratch directory with an index.json for FixtureTransport.
struct Site {
    fs::path dir;
    Json index = Json::object();

    Site() {
        static int n = 0;
        dir = fs::temp_directory_path() / fmt::format("mcpscope-crawl-{}-{}", ::getpid(), n++);
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Site() { fs::remove_all(dir); }
    void json(const std::string& url, Json body, int status = 200) { index[url] = {{"status", status}, {"json", body}}; }
    void text(const std::string& url, std::string body, int status = 200) {
        index[url] = {{"status", status}, {"body", body}};
    }
    void commit() { write_json(dir / "index.json", index); }
};

struct Harness {
    http::FixtureTransport transport;
    http::RateLimiter limiter{0};
    http::Client client;
    GithubApi api;
    explicit Harness(const Site& s)
        : transport(s.dir), client(transport, limiter, http::RetryPolicy{1, std::chrono::milliseconds(0)}),
          api(client, "https://api.github.com") {
        client.set_sleeper([](std::chrono::milliseconds) {});
    }
};

const std::string kApi = "https://api.github.com";

std::string search_url(const CrawlConfig& cfg, int page = 1) {
    return fmt::format("{}/search/repositories?q={}&per_page=100&page={}", kApi,
                       http::url_encode(cfg.effective_query()), page);
}

Json item(const std::string& full, const std::string& desc, int stars, const std::string& created = "2025-03-01T00:00:00Z") {
    return {{"full_name", full}, {"html_url", "https://github.com/" + full}, {"description", desc},
            {"stargazers_count", stars}, {"created_at", created}, {"topics", Json::array()}};
}

ServerCandidate cand(const std::string& url, std::set<Source> src, std::int64_t stars, bool official = false) {
    ServerCandidate c;
    c.repo = RepoRef::from_url(url);
    c.sources = std::move(src);
    c.stars = stars;
    c.is_official = official;
    return c;
}

}  // namespace

TEST_CASE("config validation") {
    CrawlConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.effective_query() == "\"mcp server\" in:name,description,readme,topics");
    cfg.min_stars = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.snapshot_cutoff = parse_date("2026-03-01");
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("github search applies both filters") {
    Site s;
    CrawlConfig cfg;
    s.json(search_url(cfg), {{"total_count", 3},
                             {"items", {item("a/one", "An MCP Server for notes", 2), item("b/two", "Another mcp server", 0),
                                        item("c/three", "A command line tool", 9)}}});
    s.text(kApi + "/repos/c/three/readme", "# three\nJust a tool.");
    s.commit();
    Harness h(s);
    DiscoverStats st;
    auto got = discover(Source::github_search, cfg, h.api, &st);
    REQUIRE(got.size() == 1);
    CHECK(got[0].repo.url == "https://github.com/a/one");
    CHECK(got[0].sources == std::set<Source>{Source::github_search});
    CHECK(got[0].stars == 2);
    CHECK(st.reported_hits == 3);
    CHECK(st.seen == 3);
}

TEST_CASE("github search reads the README when metadata lacks the string") {
    Site s;
    CrawlConfig cfg;
    s.json(search_url(cfg), {{"total_count", 1}, {"items", {item("d/four", "tools for agents", 4)}}});
    s.text(kApi + "/repos/d/four/readme", "# Four\nThis MCP server exposes tools.");
    s.commit();
    Harness h(s);
    CHECK(discover(Source::github_search, cfg, h.api).size() == 1);
}

TEST_CASE("search pagination continues on full pages") {
    Site s;
    CrawlConfig cfg;
    Json page1 = Json::array();
    for (int i = 0; i < 100; ++i) page1.push_back(item(fmt::format("o/mcp-server-{}", i), "mcp server", 1));
    s.json(search_url(cfg, 1), {{"total_count", 101}, {"items", page1}});
    s.json(search_url(cfg, 2), {{"total_count", 101}, {"items", {item("o/last", "mcp server", 1)}}});
    s.commit();
    Harness h(s);
    CHECK(discover(Source::github_search, cfg, h.api).size() == 101);
}

TEST_CASE("official list membership") {
    Site s;
    CrawlConfig cfg;
    s.text(cfg.official_list_url,
           "# Servers\n- **[Alpha](https://github.com/acme/alpha-mcp)** - Alpha tools\n"
           "- [Beta](https://github.com/Beta-Co/beta.git) - Beta tools\n");
    s.commit();
    Harness h(s);
    auto got = discover(Source::official_list, cfg, h.api);
    REQUIRE(got.size() == 2);
    for (const auto& c : got) {
        CHECK(c.sources == std::set<Source>{Source::official_list});
        CHECK(c.is_official);
    }
    CHECK(got[1].repo.url == "https://github.com/beta-co/beta");
}

TEST_CASE("awesome list skips its own repository and non-repository links") {
    Site s;
    CrawlConfig cfg;
    s.text(cfg.awesome_list_urls[0],
           "[![Awesome](https://github.com/punkpeye/awesome-mcp-servers)]\n"
           "- [x](https://github.com/x/x-mcp) see https://github.com/topics/mcp and https://github.com/sponsors/me\n"
           "- https://github.com/y/y-mcp.\n- [again](https://github.com/X/X-MCP/tree/main/src)\n");
    s.commit();
    Harness h(s);
    auto got = discover(Source::awesome_list, cfg, h.api);
    REQUIRE(got.size() == 2);
    CHECK(got[0].repo.url == "https://github.com/x/x-mcp");
    CHECK(got[1].repo.url == "https://github.com/y/y-mcp");
    CHECK_FALSE(got[0].is_official);
}

TEST_CASE("registry pages and malformed entries") {
    Site s;
    CrawlConfig cfg;
    s.json(cfg.registry_api + "/servers?page=1&pageSize=100",
           {{"servers", {{{"qualifiedName", "a"}, {"repository", {{"url", "https://github.com/r/a"}}}},
                         {{"qualifiedName", "b"}, {"homepage", "https://example.com"}},
                         {{"qualifiedName", "c"}, {"sourceUrl", "https://github.com/r/c"}, {"official", true}}}},
            {"pagination", {{"currentPage", 1}, {"totalPages", 2}, {"totalCount", 4}}}});
    s.json(cfg.registry_api + "/servers?page=2&pageSize=100",
           {{"servers", {{{"qualifiedName", "d"}, {"repository", "git@github.com:r/d.git"}}}},
            {"pagination", {{"currentPage", 2}, {"totalPages", 2}, {"totalCount", 4}}}});
    s.commit();
    Harness h(s);
    DiscoverStats st;
    auto got = discover(Source::smithery, cfg, h.api, &st);
    REQUIRE(got.size() == 3);
    CHECK(st.skipped_malformed == 1);
    CHECK(st.reported_hits == 4);
    CHECK(got[1].is_official);
    CHECK(got[2].repo.url == "https://github.com/r/d");
}

TEST_CASE("unreachable source raises a retryable error") {
    Site s;
    CrawlConfig cfg;
    s.text(cfg.official_list_url, "", 503);
    s.commit();
    Harness h(s);
    try {
        (void)discover(Source::official_list, cfg, h.api);
        FAIL("expected RemoteError");
    } catch (const RemoteError& e) {
        CHECK(e.retryable());
        CHECK(e.status() == 503);
    }
}

TEST_CASE("dedup worked examples") {
    auto one = dedup({cand("github.com/o/a", {Source::github_search}, 3), cand("https://github.com/O/A/", {Source::smithery}, 3)});
    REQUIRE(one.size() == 1);
    CHECK(one[0].sources == std::set<Source>{Source::github_search, Source::smithery});
    CHECK(one[0].stars == 3);
    CHECK(dedup({cand("github.com/o/b", {Source::github_search}, 0)}).empty());

    auto five = dedup({cand("github.com/o/a", {Source::github_search}, 1), cand("github.com/o/b", {Source::smithery}, 5),
                       cand("github.com/o/a.git", {Source::awesome_list}, 4),
                       cand("github.com/o/b", {Source::official_list}, 2), cand("github.com/o/c", {Source::github_search}, 0)});
    REQUIRE(five.size() == 2);
    CHECK(five[0].stars == 4);
    CHECK(five[1].stars == 5);
    CHECK(five[1].is_official);
}

TEST_CASE("dedup matches a brute-force grouping oracle") {
    std::mt19937_64 rng(7);
    const std::vector<Source> all{Source::github_search, Source::smithery, Source::official_list, Source::awesome_list};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<ServerCandidate> in;
        std::uniform_int_distribution<int> n_dist(0, 30), repo(0, 9), stars(0, 4), src(0, 3), off(0, 5);
        int n = n_dist(rng);
        for (int i = 0; i < n; ++i) {
            auto s = all[static_cast<std::size_t>(src(rng))];
            auto r = repo(rng);
            auto url = i % 2 ? fmt::format("https://github.com/Own/R{}.git", r) : fmt::format("github.com/own/r{}", r);
            in.push_back(cand(url, {s}, stars(rng), s == Source::official_list || off(rng) == 0));
        }
        auto out = dedup(in);

        // Oracle: for every distinct url, scan the whole input.
        std::vector<std::string> urls;
        for (const auto& c : in) {
            auto u = normalize_repo_url(c.repo.url);
            if (std::find(urls.begin(), urls.end(), u) == urls.end()) urls.push_back(u);
        }
        std::sort(urls.begin(), urls.end());
        std::vector<ServerCandidate> expect;
        for (const auto& u : urls) {
            ServerCandidate e;
            e.repo = RepoRef::from_url(u);
            for (const auto& c : in) {
                if (normalize_repo_url(c.repo.url) != u) continue;
                e.sources.insert(c.sources.begin(), c.sources.end());
                e.stars = std::max(e.stars, c.stars);
                e.is_official = e.is_official || c.is_official;
            }
            if (e.stars > 0) expect.push_back(e);
        }
        REQUIRE(out.size() == expect.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            CHECK(out[i].repo.url == expect[i].repo.url);
            CHECK(out[i].sources == expect[i].sources);
            CHECK(out[i].stars == expect[i].stars);
            CHECK(out[i].is_official == expect[i].is_official);
        }
        auto twice = dedup(out);
        CHECK(to_jsonl(to_rows(twice)) == to_jsonl(to_rows(out)));
        CHECK(out.size() <= in.size());
    }
}

TEST_CASE("snapshot policy") {
    CrawlConfig cfg;
    CHECK(snapshot_date_for(parse_timestamp("2025-03-01T00:00:00Z"), cfg) == parse_date("2025-10-01"));
    CHECK(snapshot_date_for(parse_timestamp("2025-12-01T00:00:00Z"), cfg) == parse_date("2026-02-01"));
    CHECK(snapshot_date_for(parse_timestamp("2025-10-01T00:00:00Z"), cfg) == parse_date("2026-02-01"));
    CHECK(snapshot_date_for(std::nullopt, cfg) == parse_date("2026-02-01"));

    Site s;
    const auto until = http::url_encode("2025-10-01T00:00:00Z");
    s.json(fmt::format("{}/repos/o/old/commits?until={}&per_page=1", kApi, until), Json::array({{{"sha", "abc123"}}}));
    s.text(kApi + "/repos/o/old/readme?ref=abc123", "old readme at cutoff");
    s.text(kApi + "/repos/o/old/readme", "latest readme");
    s.text(kApi + "/repos/o/new/readme", "new readme");
    s.json(kApi + "/repos/o/nodoc", {{"created_at", "2025-12-02T00:00:00Z"}});
    s.json(kApi + "/repos/o/b64/readme", {{"content", "aGVsbG8g\nd29ybGQ="}, {"encoding", "base64"}});
    s.commit();
    Harness h(s);

    auto old = cand("github.com/o/old", {Source::github_search}, 1);
    old.created_at = parse_timestamp("2025-03-01T00:00:00Z");
    auto a = snapshot(old, cfg, h.api);
    REQUIRE(a.doc);
    CHECK(a.doc->readme_text == "old readme at cutoff");
    CHECK(a.doc->snapshot_date == parse_date("2025-10-01"));

    auto fresh = cand("github.com/o/new", {Source::github_search}, 1);
    fresh.created_at = parse_timestamp("2025-12-01T00:00:00Z");
    auto b = snapshot(fresh, cfg, h.api);
    REQUIRE(b.doc);
    CHECK(b.doc->readme_text == "new readme");
    CHECK(b.doc->snapshot_date == parse_date("2026-02-01"));

    auto deleted = cand("github.com/o/gone", {Source::smithery}, 1);
    auto c = snapshot(deleted, cfg, h.api);
    CHECK_FALSE(c.doc);
    CHECK(c.dropped_reason == "repo-deleted");

    auto nodoc = cand("github.com/o/nodoc", {Source::smithery}, 1);
    auto d = snapshot(nodoc, cfg, h.api);
    CHECK_FALSE(d.doc);
    CHECK(d.dropped_reason == "readme-missing");

    auto enc = cand("github.com/o/b64", {Source::smithery}, 1);
    enc.created_at = parse_timestamp("2026-01-05T00:00:00Z");
    auto e = snapshot(enc, cfg, h.api);
    REQUIRE(e.doc);
    CHECK(e.doc->readme_text == "hello world");
}

TEST_CASE("base64") {
    CHECK(base64_decode("") == "");
    CHECK(base64_decode("TQ==") == "M");
    CHECK(base64_decode("TWE=") == "Ma");
    CHECK(base64_decode("TWFu") == "Man");
    CHECK_THROWS((void)base64_decode("abc"));
}

TEST_CASE("run_crawl end to end is stable") {
    Site s;
    CrawlConfig cfg;
    cfg.awesome_list_urls = {"https://raw.githubusercontent.com/l/awesome/main/README.md"};
    s.json(search_url(cfg), {{"total_count", 2},
                             {"items", {item("o/a", "mcp server A", 5, "2025-12-10T00:00:00Z"),
                                        item("o/b", "mcp server B", 1, "2025-12-11T00:00:00Z")}}});
    s.json(cfg.registry_api + "/servers?page=1&pageSize=100",
           {{"servers", {{{"qualifiedName", "a"}, {"repository", "https://github.com/o/a"}}}},
            {"pagination", {{"totalPages", 1}, {"totalCount", 1}}}});
    s.text(cfg.official_list_url, "- [c](https://github.com/o/c)\n");
    s.text(cfg.awesome_list_urls[0], "- [d](https://github.com/o/d)\n- [a](https://github.com/o/a)\n");
    s.json(kApi + "/repos/o/c", {{"stargazers_count", 7}, {"created_at", "2026-01-01T00:00:00Z"}, {"description", "C"}});
    s.json(kApi + "/repos/o/d", {{"stargazers_count", 0}, {"created_at", "2026-01-01T00:00:00Z"}});
    for (auto n : {"a", "b", "c"}) s.text(fmt::format("{}/repos/o/{}/readme", kApi, n), fmt::format("# {}\n", n));
    s.commit();

    auto once = [&] {
        Harness h(s);
        return run_crawl(cfg, h.api);
    };
    auto r1 = once();
    auto r2 = once();
    REQUIRE(r1.candidates.size() == 3);
    CHECK(r1.candidates[0].sources ==
          std::set<Source>{Source::github_search, Source::smithery, Source::awesome_list});
    CHECK(r1.candidates[2].is_official);
    CHECK(r1.candidates[2].stars == 7);
    CHECK(r1.dropped.at("https://github.com/o/d") == "zero-stars");
    CHECK(r1.docs.size() == 3);
    CHECK(to_jsonl(to_rows(r1.candidates)) == to_jsonl(to_rows(r2.candidates)));
    CHECK(to_jsonl(to_rows(r1.docs)) == to_jsonl(to_rows(r2.docs)));
}
