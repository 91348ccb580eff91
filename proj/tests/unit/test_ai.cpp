#include <doctest.h>

#include <algorithm>
#include <random>

#include <fmt/format.h>
#include <unistd.h>

#include "mcpscope/ai_authorship.hpp"

using namespace mcpscope;
using namespace mcpscope::ai;

namespace {

const PatternSet& pats() {
    static const PatternSet p = PatternSet::load();
    return p;
}

const Timestamp kCreated = parse_timestamp("2025-03-01T12:00:00Z");

Timestamp day(int d) { return kCreated + std::chrono::hours(24 * d); }

CommitInfo commit(std::string sha, std::string login, std::string msg, Timestamp when) {
    return {std::move(sha), std::move(login), std::move(msg), when};
}

AiEvidence ev(int criterion, std::string tool, std::optional<Timestamp> date = std::nullopt, bool fm = false) {
    AiEvidence e;
    e.criterion = criterion;
    e.tool = std::move(tool);
    e.date = date;
    e.in_first_month_tree = fm;
    return e;
}

/// Reference attribution: score every agent from the raw formula, order by the full
/// preference list, take the head.
std::optional<std::string> oracle_agent(const std::vector<AiEvidence>& evidence) {
    struct Row {
        std::string name;
        int score = 0;
        bool c2 = false, c3 = false, c1 = false, c4 = false;
    };
    std::vector<Row> rows;
    for (const auto& e : evidence) {
        auto it = std::find_if(rows.begin(), rows.end(), [&](const Row& r) { return r.name == e.tool; });
        if (it == rows.end()) {
            rows.push_back({e.tool});
            it = rows.end() - 1;
        }
        const int w[] = {0, 3, 10, 5, 1};
        it->score += w[e.criterion];
        (e.criterion == 1 ? it->c1 : e.criterion == 2 ? it->c2 : e.criterion == 3 ? it->c3 : it->c4) = true;
    }
    if (rows.empty()) return std::nullopt;
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.c2 != b.c2) return a.c2;
        if (a.c3 != b.c3) return a.c3;
        if (a.c1 != b.c1) return a.c1;
        if (a.c4 != b.c4) return a.c4;
        return a.name < b.name;
    });
    return rows.front().name;
}

struct Site {
    fs::path dir;
    Json index = Json::object();
    Site() {
        static int n = 0;
        dir = fs::temp_directory_path() / fmt::format("mcpscope-ai-{}-{}", ::getpid(), n++);
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Site() { fs::remove_all(dir); }
    void json(const std::string& url, Json body, int status = 200) { index[url] = {{"status", status}, {"json", body}}; }
    void commit() { write_json(dir / "index.json", index); }
};

Json gh_commit(const std::string& sha, const std::string& login, const std::string& msg, Timestamp when) {
    Json author = login.empty() ? Json(nullptr) : Json{{"login", login}};
    return {{"sha", sha}, {"author", author},
            {"commit", {{"message", msg}, {"author", {{"name", "x"}, {"date", format_timestamp(when)}}}}}};
}

Json gh_tree(std::vector<std::string> paths) {
    Json t = Json::array();
    for (auto& p : paths) t.push_back({{"path", p}, {"type", "blob"}});
    return {{"tree", t}, {"truncated", false}};
}

}  // namespace

TEST_CASE("pattern asset is consistent") {
    const auto& p = pats();
    CHECK(p.agents.size() == 12);
    for (const auto& [login, agent] : p.bots) CHECK_FALSE(p.is_dependency_bot(login));
    CHECK(p.is_dependency_bot("dependabot[bot]"));
    CHECK(p.is_dependency_bot("Renovate[bot]"));
    CHECK(p.canonical("ChatGPT") == "Codex");
    CHECK(p.canonical("claude code") == "Claude");
}

TEST_CASE("co-author trailer names an agent") {
    RepoActivity a;
    a.commits = {commit("s1", "alice", "Add tools\n\nCo-Authored-By: Claude <noreply@anthropic.com>", day(1))};
    auto e = scan_evidence(a, pats());
    REQUIRE(e.size() == 1);
    CHECK(e[0].criterion == 1);
    CHECK(e[0].tool == "Claude");
    CHECK(e[0].location == "s1");
    CHECK(e[0].date == day(1));

    a.commits = {commit("s2", "bob", "Fix\n\nco-authored-by: Jane Doe <jane@example.com>", day(1))};
    CHECK(scan_evidence(a, pats()).empty());
    CHECK(coauthor_trailers("x\n  Co-authored-by:  A <a@b>\nCo-Authored-By: B") == std::vector<std::string>{"A <a@b>", "B"});
}

TEST_CASE("configuration files") {
    RepoActivity a;
    a.tree = {"README.md", ".github/copilot-instructions.md", "src/main.ts"};
    auto e = scan_evidence(a, pats());
    REQUIRE(e.size() == 1);
    CHECK(e[0].criterion == 2);
    CHECK(e[0].tool == "Copilot");

    a.tree = {".cursor/rules/a.mdc", ".cursor/rules/b.mdc", "docs/CLAUDE.md", "AGENTS.md", "x/.aider.conf.yml"};
    e = scan_evidence(a, pats());
    REQUIRE(e.size() == 4);
    for (const auto& x : e) CHECK(x.criterion == 2);
    CHECK(e[0].location == ".cursor");
    CHECK(e[0].tool == "Cursor");
    CHECK(e[1].tool == "Codex");
    CHECK(e[2].tool == "Claude");
    CHECK(e[3].tool == "Aider");

    ConfigPattern dir{ConfigPattern::Kind::dir, ".roo", "Roo Code"};
    CHECK(dir.match("pkg/.roo/rules.md") == std::optional<std::string>("pkg/.roo"));
    CHECK_FALSE(dir.match("pkg/.rooster/x"));
    ConfigPattern path{ConfigPattern::Kind::path, ".github/copilot-instructions.md", "Copilot"};
    CHECK_FALSE(path.match("docs/.github/copilot-instructions.md"));
}

TEST_CASE("bot contributors exclude dependency bots") {
    RepoActivity a;
    a.commits = {commit("d1", "dependabot[bot]", "Bump codex-parser from 1.0 to 1.1", day(2)),
                 commit("d2", "renovate[bot]", "Update dependency @anthropic-ai/sdk", day(3))};
    a.pulls = {{7, "dependabot[bot]", "Bump lodash", "Bumps lodash. @copilot", day(4)}};
    CHECK(scan_evidence(a, pats()).empty());

    a.commits.push_back(commit("b1", "copilot-swe-agent[bot]", "Implement feature", day(5)));
    a.pulls.push_back({8, "devin-ai-integration[bot]", "Refactor", "", day(6)});
    auto e = scan_evidence(a, pats());
    REQUIRE(e.size() == 2);
    CHECK(e[0].criterion == 3);
    CHECK(e[0].tool == "Devin");
    CHECK(e[0].location == "PR #8");
    CHECK(e[1].tool == "Copilot");
}

TEST_CASE("mentions use word boundaries and exclusions") {
    const auto& p = pats();
    CHECK(mentioned_agents("asked @codex to review", p) == std::vector<std::string>{"Codex"});
    CHECK(mentioned_agents("Generated with Claude Code", p) == std::vector<std::string>{"Claude"});
    CHECK(mentioned_agents("@claude please fix", p) == std::vector<std::string>{"Claude"});
    CHECK(mentioned_agents("add claude desktop config", p).empty());
    CHECK(mentioned_agents("use a database cursor for pagination", p).empty());
    CHECK(mentioned_agents("connector for Microsoft Copilot Studio", p).empty());
    CHECK(mentioned_agents("mail me at dev@claude.example", p).empty());
    CHECK(mentioned_agents("decline the request", p).empty());
    CHECK(mentioned_agents("Co-Authored-By: Claude <noreply@anthropic.com>", p).empty());
    auto two = mentioned_agents("ported from Cursor IDE to windsurf", p);
    CHECK(two == std::vector<std::string>{"Cursor", "Windsurf"});
}

TEST_CASE("verdict worked examples") {
    auto late = verdict({ev(2, "Claude", day(45), false)}, kCreated);
    CHECK(late.ai_authored);
    REQUIRE(late.first_month);
    CHECK_FALSE(*late.first_month);
    CHECK_FALSE(late.first_month_agent);
    CHECK(late.agent == std::optional<std::string>("Claude"));

    auto none = verdict({}, kCreated);
    CHECK_FALSE(none.ai_authored);
    CHECK_FALSE(none.agent);
    CHECK(none.first_month == std::optional<bool>(false));

    auto mixed = verdict({ev(4, "Cursor", day(60)), ev(1, "Claude", day(3))}, kCreated);
    CHECK(*mixed.first_month);
    CHECK(mixed.date_first_ai_evidence == day(3));
    CHECK(mixed.first_month_agent == std::optional<std::string>("Claude"));

    auto edge = verdict({ev(1, "Codex", kCreated + std::chrono::hours(720))}, kCreated);
    CHECK(*edge.first_month);
    auto past = verdict({ev(1, "Codex", kCreated + std::chrono::hours(720) + std::chrono::seconds(1))}, kCreated);
    CHECK_FALSE(*past.first_month);

    auto unknown = verdict({ev(1, "Codex", day(1))}, std::nullopt);
    CHECK_FALSE(unknown.first_month);
    CHECK(unknown.ai_authored);
}

TEST_CASE("identify_agent worked examples") {
    auto [a, s] = identify_agent({ev(2, "Claude"), ev(4, "Cursor"), ev(4, "Cursor")});
    CHECK(a == std::optional<std::string>("Claude"));
    CHECK(s.at("Claude").total() == 10);
    CHECK(s.at("Cursor").total() == 2);
    auto [b, t] = identify_agent({ev(1, "Codex")});
    CHECK(b == std::optional<std::string>("Codex"));
    CHECK(t.at("Codex").total() == 3);
    CHECK_FALSE(identify_agent({}).first);

    // Three agents at 10 points each: config presence wins.
    std::vector<AiEvidence> tie{ev(3, "Cursor"), ev(3, "Cursor"), ev(2, "Copilot")};
    for (int i = 0; i < 10; ++i) tie.push_back(ev(4, "Aider"));
    CHECK(identify_agent(tie).first == std::optional<std::string>("Copilot"));
    // Same profile: name order.
    CHECK(identify_agent({ev(1, "Gemini"), ev(1, "Cline")}).first == std::optional<std::string>("Cline"));
    // Bot beats co-author plus mentions at equal score.
    CHECK(identify_agent({ev(3, "Windsurf"), ev(1, "Augment"), ev(4, "Augment"), ev(4, "Augment")}).first ==
          std::optional<std::string>("Windsurf"));
}

TEST_CASE("identify_agent matches the oracle and ignores order") {
    std::mt19937_64 rng(31);
    const std::vector<std::string> names{"Claude", "Cursor", "Copilot"};
    std::uniform_int_distribution<int> len(1, 12), crit(1, 4), who(0, 2);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<AiEvidence> e;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) e.push_back(ev(crit(rng), names[static_cast<std::size_t>(who(rng))]));
        auto expect = oracle_agent(e);
        CHECK(identify_agent(e).first == expect);
        std::shuffle(e.begin(), e.end(), rng);
        CHECK(identify_agent(e).first == expect);
    }
}

TEST_CASE("first_month implies ai_authored and the first date is minimal") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> len(0, 6), crit(1, 4), d(-5, 120), coin(0, 1);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<AiEvidence> e;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) {
            auto x = ev(crit(rng), "Claude", coin(rng) ? std::optional<Timestamp>(day(d(rng))) : std::nullopt, coin(rng));
            e.push_back(x);
        }
        auto v = verdict(e, kCreated);
        CHECK(v.ai_authored == !e.empty());
        if (v.first_month && *v.first_month) CHECK(v.ai_authored);
        for (const auto& x : e) {
            if (x.date) CHECK(*v.date_first_ai_evidence <= *x.date);
        }
    }
}

TEST_CASE("load_activity reads the code host and dates config files") {
    Site s;
    const std::string api = "https://api.github.com/repos/o/r";
    s.json(api + "/commits?per_page=100&page=1",
           Json::array({gh_commit("c3", "alice", "Add CLAUDE.md", day(45)),
                        gh_commit("c2", "", "Fix bug\n\nCo-Authored-By: Claude <noreply@anthropic.com>", day(40)),
                        gh_commit("c1", "dependabot[bot]", "Bump x", day(1))}));
    s.json(api + "/pulls?state=all&sort=created&direction=desc&per_page=30",
           Json::array({{{"number", 4}, {"title", "Try @copilot"}, {"body", nullptr}, {"user", {{"login", "alice"}}},
                         {"created_at", format_timestamp(day(50))}}}));
    s.json(api + "/git/trees/HEAD?recursive=1", gh_tree({"README.md", "CLAUDE.md", "src/index.ts"}));
    s.json(fmt::format("{}/commits?until={}&per_page=1", api, http::url_encode(format_timestamp(day(30)))),
           Json::array({{{"sha", "c1"}}}));
    s.json(api + "/git/trees/c1?recursive=1", gh_tree({"README.md", "src/index.ts"}));
    s.json(api + "/commits?path=CLAUDE.md&per_page=100&page=1", Json::array({gh_commit("c3", "alice", "Add", day(45))}));
    s.commit();

    http::FixtureTransport transport(s.dir);
    http::RateLimiter limiter(0);
    http::Client client(transport, limiter, http::RetryPolicy{0});
    GithubApi gh(client);
    auto act = load_activity(RepoRef::from_url("github.com/o/r"), kCreated, gh, pats());
    CHECK(act.commits.size() == 3);
    CHECK(act.pulls.size() == 1);
    CHECK(act.coverage.at("commits"));
    CHECK(act.coverage.at("first_month_tree"));
    CHECK(act.introduced.at("CLAUDE.md") == day(45));

    auto e = scan_evidence(act, pats());
    auto v = verdict(e, kCreated);
    CHECK(v.ai_authored);
    CHECK(v.agent == std::optional<std::string>("Claude"));
    CHECK_FALSE(*v.first_month);
    CHECK(v.date_first_ai_evidence == day(40));
    CHECK(v.score_breakdown.at("Claude").config == 1);
    CHECK(v.score_breakdown.at("Claude").coauthor == 1);
    CHECK(v.score_breakdown.at("Copilot").mention == 1);

    // Missing endpoints leave partial coverage instead of failing.
    auto other = load_activity(RepoRef::from_url("github.com/o/missing"), kCreated, gh, pats());
    CHECK_FALSE(other.coverage.at("commits"));
    CHECK_FALSE(other.coverage.at("tree"));
}
