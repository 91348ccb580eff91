#include <doctest.h>

#include "mcpscope/common/text.hpp"
#include "mcpscope/extract.hpp"

using namespace mcpscope;
using namespace mcpscope::extract;

namespace {

RawServerDoc doc_of(std::string readme) {
    RawServerDoc d;
    d.repo = RepoRef::from_url("https://github.com/acme/demo-mcp");
    d.readme_text = std::move(readme);
    d.description = "Demo server";
    return d;
}

const ExtractLexicon& lex() {
    static const ExtractLexicon l = ExtractLexicon::load();
    return l;
}

std::vector<std::string> names(const ExtractionResult& r) {
    std::vector<std::string> out;
    for (const auto& t : r.tools) out.push_back(t.name);
    return out;
}

class Scripted final : public TextAnalysisProvider {
public:
    explicit Scripted(std::vector<std::string> replies) : replies_(std::move(replies)) {}
    std::string id() const override { return "scripted"; }
    bool deterministic() const override { return true; }
    std::string complete(const AnalysisRequest& r) override {
        documents.push_back(r.document);
        if (fail) throw ProviderUnavailable("down");
        auto reply = replies_[std::min(calls, replies_.size() - 1)];
        ++calls;
        return reply;
    }
    std::size_t calls = 0;
    bool fail = false;
    std::vector<std::string> documents;

private:
    std::vector<std::string> replies_;
};

}  // namespace

TEST_CASE("definition lines under a tools heading") {
    auto r = fallback_extract(doc_of("# Demo MCP\n\n## Tools\n- `read_file`: Read file contents\n"), lex());
    REQUIRE(r.tools.size() == 1);
    CHECK(r.tools[0].name == "read_file");
    CHECK(r.tools[0].description == "Read file contents");
    CHECK(r.is_mcp_server);
    CHECK(validate_server(r));
}

TEST_CASE("bank example style lines") {
    auto r = fallback_extract(doc_of("# asher-mcp\nFinancial data aggregation MCP tool.\n\n"
                                     "## Tools\n"
                                     "- get_accounts: Retrieve list of all connected bank accounts\n"
                                     "- get_account_balance: Get current balance for a specific account\n"
                                     "- get_transactions: Retrieve transaction history for an account\n"),
                              lex());
    CHECK(names(r) == std::vector<std::string>{"get_accounts", "get_account_balance", "get_transactions"});
    CHECK(r.tools[0].description == "Retrieve list of all connected bank accounts");
    CHECK(r.summary == "Financial data aggregation MCP tool.");
}

TEST_CASE("duplicates collapse with the first description") {
    auto r = fallback_extract(doc_of("MCP\n## Tools\n- a_b: x\n- a_b: y\n"), lex());
    REQUIRE(r.tools.size() == 1);
    CHECK(r.tools[0].description == "x");
}

TEST_CASE("lines outside tool sections are ignored") {
    auto r = fallback_extract(doc_of("MCP server\n## Usage\n- `read_file`: Read file\n## About\nnote_this: prose\n"),
                              lex());
    CHECK(r.tools.empty());
    CHECK_FALSE(r.is_mcp_server);
}

TEST_CASE("no headings and no tool lines") {
    auto r = fallback_extract(doc_of("Just some words about an mcp thing.\nNothing else."), lex());
    CHECK(r.tools.empty());
    CHECK_FALSE(r.is_mcp_server);
    CHECK_FALSE(validate_server(r));
}

TEST_CASE("link-list README is not a server") {
    auto r = fallback_extract(doc_of("# Awesome MCP servers\n\n## Servers\n"
                                     "- [github-mcp](https://github.com/a/b) - GitHub access\n"
                                     "- [slack-mcp](https://github.com/c/d) - Slack access\n"),
                              lex());
    CHECK(r.tools.empty());
    CHECK_FALSE(r.is_mcp_server);
}

TEST_CASE("tools without an mcp mention fail the gate") {
    auto r = fallback_extract(doc_of("# Helper\n## API\n- `do_thing`: does it\n"), lex());
    CHECK(r.tools.size() == 1);
    CHECK_FALSE(r.is_mcp_server);
}

TEST_CASE("tables, bold names, dash separators and heading tools") {
    const std::string em = "\xE2\x80\x94";
    auto r = fallback_extract(
        doc_of("# X MCP\n\n## Available Tools\n\n"
               "| Tool | Description |\n|------|-------------|\n"
               "| `search_docs` | Search the docs |\n| **fetch_page** | Fetch a page |\n\n"
               "- **create_issue**: Open an issue\n"
               "- `close_issue` " + em + " Close an issue\n"
               "* listRepos - List repositories\n"
               "1. `merge_pr`: Merge a pull request\n"
               "   - `number` (int): PR number\n"
               "   - `method` (string): merge method\n\n"
               "### `run_query`\nRun a SQL query.\n\n**Parameters**\n- `sql`: the query\n\n"
               "### delete_row\nDelete one row\n\n"
               "## Capabilities\n- `summarize`: Summarize text\n"
               "## License\n- `not_a_tool`: MIT\n"),
        lex());
    CHECK(names(r) == std::vector<std::string>{"search_docs", "fetch_page", "create_issue", "close_issue",
                                               "listRepos", "merge_pr", "run_query", "delete_row",
                                               "summarize"});
    CHECK(r.tools[3].description == "Close an issue");
    REQUIRE(r.tools[5].input_schema);
    CHECK(*r.tools[5].input_schema == "- `number` (int): PR number\n- `method` (string): merge method");
    REQUIRE(r.tools[6].input_schema);
    CHECK(r.tools[6].input_schema->find("`sql`") != std::string::npos);
    CHECK(r.tools[6].description == "Run a SQL query.");
    CHECK_FALSE(r.tools[0].input_schema);
}

TEST_CASE("code blocks are skipped during harvesting") {
    auto r = fallback_extract(doc_of("MCP\n## Tools\n```\n- `fake_tool`: inside code\n```\n- `real_tool`: outside\n"),
                              lex());
    CHECK(names(r) == std::vector<std::string>{"real_tool"});
}

TEST_CASE("filtered content drops setup sections and every URL") {
    std::string readme =
        "# Demo MCP [![badge](https://img.shields.io/x.svg)](https://ci)\n\nSee [the docs](https://docs.example.com) "
        "or www.example.org for more.\n\n## Installation\nnpm install demo\n\n### From source\ngit clone x\n\n"
        "## Tools\n- `a_tool`: visit http://foo.bar/baz\n\n[ref]: https://example.com\n\n## License\nMIT\n";
    auto f = filter_content(readme, lex());
    CHECK_FALSE(text::contains_url(f));
    CHECK(f.find("npm install") == std::string::npos);
    CHECK(f.find("git clone") == std::string::npos);
    CHECK(f.find("MIT") == std::string::npos);
    CHECK(f.find("the docs") != std::string::npos);
    CHECK(f.find("a_tool") != std::string::npos);
}

TEST_CASE("filtered content is URL-free for arbitrary inputs") {
    const char* pieces[] = {"https://a.b/c", "www.x.y", "[t](http://q)", "![i](ftp://z)", "## Setup\n",
                            "## Tools\n", "- `t_x`: ", "plain words ", "\n", "<a href=\"https://h\">h</a>",
                            "git+ssh://git@host/repo"};
    std::uint64_t state = 12345;
    for (int trial = 0; trial < 300; ++trial) {
        std::string s;
        for (int k = 0; k < 20; ++k) {
            state = state * 6364136223846793005ULL + 1442695040888963407ULL;
            s += pieces[(state >> 33) % 11];
        }
        auto r = fallback_extract(doc_of(s), lex());
        CHECK_FALSE(text::contains_url(r.filtered_content));
        std::set<std::string> unique;
        for (const auto& t : r.tools) CHECK(unique.insert(t.name).second);
    }
}

TEST_CASE("validate_server truth table") {
    ExtractionResult r;
    r.is_mcp_server = true;
    r.tools = {{"x", "", std::nullopt}};
    CHECK(validate_server(r));
    r.tools.clear();
    CHECK_FALSE(validate_server(r));
    r.is_mcp_server = false;
    r.tools = {{"x", "", std::nullopt}, {"y", "", std::nullopt}};
    CHECK_FALSE(validate_server(r));
}

TEST_CASE("parse_extraction enforces the schema") {
    auto ok = parse_extraction(
        "Here you go:\n```json\n{\"summary\": \"S\", \"is_mcp_server\": 1, \"filtered_content\": \"see https://x.y now\","
        " \"tools\": [{\"name\": \" t1 \", \"description\": \"d\"}, {\"name\": \"t1\", \"description\": \"dup\"},"
        " {\"name\": \"t2\", \"description\": \"e\", \"input_schema\": {\"a\": 1}}]}\n```");
    REQUIRE(ok);
    CHECK(ok->is_mcp_server);
    CHECK(names(*ok) == std::vector<std::string>{"t1", "t2"});
    CHECK(ok->tools[0].description == "d");
    CHECK(ok->filtered_content == "see  now");
    CHECK(*ok->tools[1].input_schema == "{\"a\":1}");

    CHECK_FALSE(parse_extraction("no json here"));
    CHECK_FALSE(parse_extraction(R"({"summary": "S", "is_mcp_server": 2, "filtered_content": "", "tools": []})"));
    CHECK_FALSE(parse_extraction(R"({"summary": "S", "is_mcp_server": 1, "tools": []})"));
    CHECK_FALSE(parse_extraction(R"({"summary": "S", "is_mcp_server": 0, "filtered_content": "", "tools": [{"name": ""}]})"));
    auto b = parse_extraction(R"({"summary": "S", "is_mcp_server": false, "filtered_content": "", "tools": []})");
    REQUIRE(b);
    CHECK_FALSE(b->is_mcp_server);
}

TEST_CASE("chunking keeps every byte and respects the limit") {
    std::string s;
    for (int i = 0; i < 400; ++i) s += "paragraph " + std::to_string(i) + " with some words in it\n\n";
    s += std::string(250, 'x');
    auto chunks = chunk_readme(s, 100);
    std::string joined;
    for (const auto& c : chunks) {
        CHECK(c.size() <= 100);
        joined += c;
    }
    CHECK(joined == s);
    CHECK(chunk_readme("short", 50000) == std::vector<std::string>{"short"});
    std::string utf = "\xC3\xA9\xC3\xA9\xC3\xA9";  // three two-byte characters
    auto u = chunk_readme(utf, 3);
    CHECK(u.front() == "\xC3\xA9");
}

TEST_CASE("process_readme uses the provider, retries once, then falls back") {
    PromptLibrary prompts(asset_dir() / "prompts");
    auto d = doc_of("# Demo MCP\n## Tools\n- `local_tool`: from rules\n");
    const std::string good =
        R"({"summary": "S", "is_mcp_server": 1, "filtered_content": "F", "tools": [{"name": "remote_tool", "description": "d"}]})";

    Scripted first_ok({good});
    auto a = process_readme(d, &first_ok, prompts, lex());
    CHECK(a.method == "provider");
    CHECK(names(a.result) == std::vector<std::string>{"remote_tool"});
    CHECK(first_ok.calls == 1);

    Scripted retry_ok({"garbage", good});
    auto b = process_readme(d, &retry_ok, prompts, lex());
    CHECK(b.method == "provider");
    CHECK(retry_ok.calls == 2);

    Scripted bad({"garbage"});
    auto c = process_readme(d, &bad, prompts, lex());
    CHECK(c.method == "fallback");
    CHECK(bad.calls == 2);
    CHECK(names(c.result) == std::vector<std::string>{"local_tool"});

    Scripted down({good});
    down.fail = true;
    auto e = process_readme(d, &down, prompts, lex());
    CHECK(e.method == "fallback");

    auto n = process_readme(d, nullptr, prompts, lex());
    CHECK(n.method == "fallback");
    CHECK_THROWS_AS(process_readme(doc_of("  \n"), nullptr, prompts, lex()), std::invalid_argument);
}

TEST_CASE("long READMEs are chunked and tool lists merged") {
    PromptLibrary prompts(asset_dir() / "prompts");
    std::string readme = "# Big MCP\n\n" + std::string(30000, 'a') + "\n\n" + std::string(30000, 'b');
    Scripted s({R"({"summary": "one", "is_mcp_server": 1, "filtered_content": "A", "tools": [{"name": "x", "description": ""}]})",
                R"({"summary": "two", "is_mcp_server": 0, "filtered_content": "B", "tools": [{"name": "x", "description": "again"}, {"name": "y", "description": ""}]})"});
    auto out = process_readme(doc_of(readme), &s, prompts, lex());
    CHECK(s.documents.size() == 2);
    CHECK(out.result.summary == "one");
    CHECK(out.result.is_mcp_server);
    CHECK(out.result.filtered_content == "A\n\nB");
    CHECK(names(out.result) == std::vector<std::string>{"x", "y"});
    CHECK(out.result.tools[0].description.empty());
}

TEST_CASE("deterministic extraction is byte-stable") {
    auto d = doc_of("# Demo MCP\nA server.\n## Tools\n- `a_b`: one\n- `c_d`: two\n");
    ServerCandidate c;
    c.repo = d.repo;
    c.stars = 3;
    auto s1 = make_server_record(c, d, {fallback_extract(d, lex()), "fallback"});
    auto s2 = make_server_record(c, d, {fallback_extract(d, lex()), "fallback"});
    CHECK(Json(s1).dump() == Json(s2).dump());
    CHECK(s1.id == server_id_for(c.repo));
    CHECK(s1.id.size() == 16);
}
