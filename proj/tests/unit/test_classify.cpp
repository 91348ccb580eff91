#include <doctest.h>

#include <random>
#include <set>

#include "mcpscope/classify.hpp"
#include "mcpscope/common/text.hpp"

using namespace mcpscope;
using namespace mcpscope::classify;

namespace {

const Lexicons& lex() {
    static const Lexicons l = Lexicons::load();
    return l;
}

Context rules() {
    Context c;
    c.lexicons = &lex();
    return c;
}

ToolRecord tool(std::string name, std::string desc = "") { return {std::move(name), std::move(desc), std::nullopt}; }

ServerRecord server(std::string name, std::string description, std::vector<ToolRecord> tools,
                    std::string readme = "") {
    ServerRecord s;
    s.repo = RepoRef::from_url("https://github.com/example/" + name);
    s.id = server_id_for(s.repo);
    s.description = std::move(description);
    s.extraction.tools = std::move(tools);
    s.extraction.is_mcp_server = true;
    s.readme_text = std::move(readme);
    return s;
}

ServerRecord asher() {
    return server("asher-mcp", "Financial data aggregation tool",
                  {tool("get_accounts", "Retrieve list of all connected bank accounts"),
                   tool("get_account_balance", "Get current balance for a specific account"),
                   tool("get_transactions", "Retrieve transaction history for an account"),
                   tool("get_investment_holdings", "View investment portfolio holdings")});
}

ServerRecord base() {
    return server("base-mcp", "Blockchain interaction tool for Base network",
                  {tool("get_balance", "Check wallet balance"), tool("get_transaction", "Retrieve transaction details"),
                   tool("send_transaction", "Send ETH or tokens"), tool("deploy_contract", "Deploy smart contracts"),
                   tool("interact_contract", "Call contract functions"), tool("estimate_gas", "Calculate gas fees")},
                  "## Required inputs\n- private_key: Wallet private key\n- rpc_endpoint: Base network RPC URL\n");
}

ServerRecord desktop() {
    return server("DesktopCommanderMCP", "Execute python and control mouse and keyboard on local OS",
                  {tool("execute_command", "Execute arbitrary shell commands with timeout"),
                   tool("read_file", "Read file contents with pagination / negative offset"),
                   tool("write_file", "Write or append to files (line-limited)"),
                   tool("kill_process", "Terminate a running process by PID")});
}

class Scripted final : public TextAnalysisProvider {
public:
    explicit Scripted(std::vector<std::string> replies) : replies_(std::move(replies)) {}
    std::string id() const override { return "scripted"; }
    bool deterministic() const override { return true; }
    std::string complete(const AnalysisRequest& r) override {
        tasks.push_back(r.task);
        auto reply = replies_[std::min(calls, replies_.size() - 1)];
        ++calls;
        return reply;
    }
    std::size_t calls = 0;
    std::vector<std::string> tasks;

private:
    std::vector<std::string> replies_;
};

std::string code_of(const DirectImpact& d) { return d.label(); }

}  // namespace

TEST_CASE("worked direct-impact examples under the rule path") {
    CHECK(code_of(fallback_direct_impact(tool("get_database_records"), lex().impact)) == "1.1");
    CHECK(code_of(fallback_direct_impact(tool("calculate_statistics"), lex().impact)) == "2.2");
    CHECK(code_of(fallback_direct_impact(tool("execute_trade"), lex().impact)) == "3.4");
    CHECK(code_of(fallback_direct_impact(tool("run_python_code"), lex().impact)) == "3.3");
}

TEST_CASE("lexicon branches") {
    const auto& l = lex().impact;
    CHECK(code_of(fallback_direct_impact(tool("plan_trip"), l)) == "2.1");
    CHECK(code_of(fallback_direct_impact(tool("create_entities_memory"), l)) == "2.3");
    CHECK(code_of(fallback_direct_impact(tool("send_email"), l)) == "3.6");
    CHECK(code_of(fallback_direct_impact(tool("browser_navigate"), l)) == "3.2");
    CHECK(code_of(fallback_direct_impact(tool("write_file"), l)) == "3.3");
    CHECK(code_of(fallback_direct_impact(tool("login"), l)) == "3.1");
    CHECK(code_of(fallback_direct_impact(tool("move_robot_arm"), l)) == "3.5");
    CHECK(code_of(fallback_direct_impact(tool("delegate_to_agent"), l)) == "3.7");
    CHECK(code_of(fallback_direct_impact(tool("createIssue"), l)) == "3.4");
    CHECK(code_of(fallback_direct_impact(tool("weather", "Fetches the forecast"), l)) == "1.1");
    CHECK(code_of(fallback_direct_impact(tool("zq", "xyzzy"), l)) == "unclassified");
    CHECK_FALSE(fallback_direct_impact(tool("zq"), l).classified());
}

TEST_CASE("category digit matches functionality for random names") {
    std::vector<std::string> vocab;
    for (const auto& [_, words] : lex().impact.verbs) vocab.insert(vocab.end(), words.begin(), words.end());
    for (const auto& [_, words] : lex().impact.action_nouns) vocab.insert(vocab.end(), words.begin(), words.end());
    for (const char* junk : {"foo", "bar", "qux", "data", "item", "v2", "x"}) vocab.emplace_back(junk);
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1), len(1, 4), sep(0, 2);
    int classified = 0;
    for (int i = 0; i < 1000; ++i) {
        std::string name;
        auto n = len(rng);
        for (std::size_t k = 0; k < n; ++k) {
            auto w = vocab[pick(rng)];
            if (k > 0) {
                switch (sep(rng)) {
                    case 0: name += "_"; break;
                    case 1: name += "-"; break;
                    default: w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
                }
            }
            name += w;
        }
        auto d = fallback_direct_impact(tool(name, vocab[pick(rng)]), lex().impact);
        if (!d.classified()) continue;
        ++classified;
        REQUIRE(is_functionality_code(*d.code));
        auto expected = (*d.code)[0] == '1' ? ImpactCategory::perception
                        : (*d.code)[0] == '2' ? ImpactCategory::reasoning
                                              : ImpactCategory::action;
        CHECK(d.category() == expected);
    }
    CHECK(classified > 900);
}

TEST_CASE("worked server examples under the rule path") {
    auto a = fallback_payments(asher(), lex().payments);
    CHECK(a.autonomy == 1);
    auto b = fallback_payments(base(), lex().payments);
    CHECK(b.autonomy == 4);
    CHECK(b.analysis.find("private") != std::string::npos);
    auto files = server("file-manager", "Manage local notes", {tool("list_files", "List files in a folder")});
    CHECK(fallback_payments(files, lex().payments).autonomy == 0);

    auto gd = fallback_generality(desktop(), lex().generality);
    CHECK(gd.industry_general);
    CHECK(gd.environment_general);
    auto gb = fallback_generality(base(), lex().generality);
    CHECK_FALSE(gb.environment_general);
    CHECK_FALSE(gb.industry_general);
    auto ga = fallback_generality(asher(), lex().generality);
    CHECK_FALSE(ga.environment_general);
    CHECK_FALSE(ga.industry_general);
    auto undocumented = server("ai-agent-mcp-servers", "Collection of MCP servers for AI agents", {tool("x_tool")});
    auto gu = fallback_generality(undocumented, lex().generality);
    CHECK(gu.industry_general);
    CHECK(gu.environment_general);
    CHECK(fallback_payments(undocumented, lex().payments).autonomy == 0);
    CHECK(code_of(fallback_direct_impact(desktop().extraction.tools[0], lex().impact)) == "3.3");
}

TEST_CASE("payments lexicon levels") {
    const auto& l = lex().payments;
    auto p2 = server("links", "Create payment links for customers", {tool("create_link", "Make a payment link")});
    CHECK(fallback_payments(p2, l).autonomy == 2);
    auto p3 = server("stripe-agent", "Stripe tools", {tool("create_refund", "Create refund for a charge")});
    CHECK(fallback_payments(p3, l).autonomy == 3);
    auto p1 = server("stripe-read", "Stripe reporting", {tool("list_disputes", "List disputes")});
    CHECK(fallback_payments(p1, l).autonomy == 1);
    auto db = server("pg", "Postgres access", {tool("begin_transaction", "Start a database transaction")});
    CHECK(fallback_payments(db, l).autonomy == 0);
}

TEST_CASE("provider replies for direct impact") {
    CHECK(parse_direct_impact("3.4")->label() == "3.4");
    CHECK(parse_direct_impact(" \"1.1\". ")->label() == "1.1");
    CHECK(parse_direct_impact("2.2 Analysis")->label() == "2.2");
    CHECK_FALSE(parse_direct_impact("None")->classified());
    CHECK_FALSE(parse_direct_impact("4.1"));
    CHECK_FALSE(parse_direct_impact("3.45"));
    CHECK_FALSE(parse_direct_impact("I think 3.4"));

    PromptLibrary prompts(asset_dir() / "prompts");
    auto ctx = rules();
    ctx.prompts = &prompts;
    auto s = asher();
    Scripted good({"3.6"});
    ctx.provider = &good;
    auto a = classify_direct_impact(s.extraction.tools[0], s, ctx);
    CHECK(a.method == "provider");
    CHECK(a.impact.label() == "3.6");

    Scripted bad({"maybe", "still no"});
    ctx.provider = &bad;
    auto b = classify_direct_impact(s.extraction.tools[0], s, ctx);
    CHECK(bad.calls == 2);
    CHECK(b.method == "fallback");
    CHECK(b.impact.label() == "1.1");
}

TEST_CASE("provider replies for server labels") {
    auto ok = parse_server_labels(R"({"server": "x", "analysis_notes": "", "action_space_description": "d",
        "generality_industry": 1, "generality_environment": 0, "payments_analysis": "p", "payments_autonomy": 3})");
    REQUIRE(ok);
    CHECK(ok->generality.industry_general);
    CHECK_FALSE(ok->generality.environment_general);
    CHECK(ok->payments.autonomy == 3);
    CHECK(ok->generality.action_space_description == "d");
    CHECK_FALSE(parse_server_labels(R"({"generality_industry": 1, "generality_environment": 0, "payments_autonomy": 5})"));
    CHECK_FALSE(parse_server_labels(R"({"generality_industry": 2, "generality_environment": 0, "payments_autonomy": 1})"));
    CHECK_FALSE(parse_server_labels(R"({"generality_environment": 0, "payments_autonomy": 1})"));

    PromptLibrary prompts(asset_dir() / "prompts");
    auto ctx = rules();
    ctx.prompts = &prompts;
    Scripted bad({"{}"});
    ctx.provider = &bad;
    auto l = classify_server_labels(base(), ctx);
    CHECK(l.method == "fallback");
    CHECK(l.payments.autonomy == 4);
}

TEST_CASE("aggregate_server") {
    auto tc = [](std::optional<std::string> code, std::string l1, std::map<std::string, double> soc = {}) {
        ToolClassification t;
        t.direct_impact.code = std::move(code);
        t.task.l1_id = std::move(l1);
        t.task.soc_distribution = std::move(soc);
        return t;
    };
    auto a = aggregate_server({tc("1.1", "L1_04"), tc("3.4", "L1_04")});
    CHECK(*a.direct_impact == ImpactCategory::action);
    CHECK(*aggregate_server({tc("1.1", ""), tc("1.1", "")}).direct_impact == ImpactCategory::perception);
    CHECK_FALSE(aggregate_server({tc(std::nullopt, "")}).direct_impact);

    std::vector<ToolClassification> six;
    for (int i = 0; i < 2; ++i) six.push_back(tc("1.1", "L1_01", {{"13", 1.0}}));
    for (int i = 0; i < 4; ++i) six.push_back(tc("2.2", "L1_04", {{"15", 1.0}}));
    auto m = aggregate_server(six);
    CHECK(m.domain == "L1_04");
    CHECK(m.soc == "15");

    // Ties go to the first tool's value.
    auto t = aggregate_server({tc("1.1", "L1_07", {{"19", 0.5}, {"15", 0.5}}), tc("1.1", "L1_02", {{"29", 1.0}}),
                               tc("1.1", "L1_02"), tc("1.1", "L1_07", {{"15", 0.5}, {"19", 0.5}})});
    CHECK(t.domain == "L1_07");
    CHECK(t.soc == "15");  // 15, 19, 29 all weigh 1.0; the first tool lists 15 and 19 equally, 15 sorts first
    CHECK_THROWS_AS(aggregate_server({}), std::invalid_argument);
}

TEST_CASE("adding an action tool never lowers server impact") {
    std::mt19937_64 rng(99);
    const auto& codes = functionality_codes();
    std::uniform_int_distribution<std::size_t> pick(0, codes.size()), len(1, 6);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<ToolClassification> tools(len(rng));
        for (auto& t : tools) {
            auto k = pick(rng);
            if (k < codes.size()) t.direct_impact.code = codes[k];
        }
        auto before = aggregate_server(tools).direct_impact;
        ToolClassification act;
        act.direct_impact.code = "3.3";
        tools.push_back(act);
        auto after = aggregate_server(tools).direct_impact;
        CHECK(*after == ImpactCategory::action);
        if (before) CHECK(static_cast<int>(*after) >= static_cast<int>(*before));
    }
}

namespace {

struct Fixture {
    taxonomy::OnetData onet;
    taxonomy::Hierarchy h;
    HashedTfidfEmbedder emb;
};

const Fixture& fixture() {
    static const Fixture f = [] {
        Fixture x;
        taxonomy::OnetFiles files;
        const fs::path dir = fs::path(MCPSCOPE_FIXTURE_DIR) / "onet";
        files.tasks = dir / "task_statements.txt";
        files.work_context = dir / "work_context.txt";
        files.crosswalk = dir / "task_crosswalk.txt";
        x.onet = taxonomy::load_onet(files);
        taxonomy::BuildOptions opt;
        opt.k = 12;
        opt.n_init = 10;
        x.h = taxonomy::build_hierarchy(x.onet.tasks, taxonomy::load_l1_categories(), x.emb, nullptr, opt);
        return x;
    }();
    return f;
}

}  // namespace

TEST_CASE("classify_task returns a valid path within the option budget") {
    const auto& f = fixture();
    auto emb = f.emb;
    auto ctx = rules();
    ctx.hierarchy = &f.h;
    ctx.embedder = &emb;
    const auto budget = 12 + f.h.max_children() + f.h.max_members();
    auto s = desktop();
    std::vector<ToolRecord> tools{tool("create_pull_request", "Open a pull request in a GitHub repository"),
                                  tool("audit_invoices", "Check invoices and payment records"),
                                  tool("get_patient_vitals", "Read patient vital signs from the health record"),
                                  tool("plan_route", "Plan a delivery route for a truck shipment")};
    for (const auto& t : tools) {
        auto a = classify_task(t, s, ctx);
        CHECK(static_cast<std::size_t>(a.options_presented) <= budget);
        const auto& l2 = f.h.l2_node(a.l2_id);
        CHECK(l2.parent == a.l1_id);
        CHECK(std::find(l2.members.begin(), l2.members.end(), a.task_id) != l2.members.end());
        CHECK(a.options_presented == static_cast<int>(12 + f.h.children(a.l1_id).size() + l2.members.size()));
        double w = 0;
        for (const auto& [_, v] : a.soc_distribution) w += v;
        CHECK(w == doctest::Approx(1.0));
        REQUIRE(a.impact_score);
        CHECK(a.stakes_bucket == taxonomy::stakes_bucket(*a.impact_score));
        CHECK(a.low_confidence);
    }
    auto top_group = [](const TaskAssignment& a) {
        return std::max_element(a.soc_distribution.begin(), a.soc_distribution.end(),
                                [](const auto& x, const auto& y) { return x.second < y.second; })
            ->first;
    };
    CHECK(top_group(classify_task(tools[0], s, ctx)) == "15");
    CHECK(top_group(classify_task(tools[2], s, ctx)) == "29");
    CHECK(top_group(classify_task(tools[3], s, ctx)) == "53");
    auto inv = top_group(classify_task(tools[1], s, ctx));
    CHECK((inv == "13" || inv == "43" || inv == "11"));
}

TEST_CASE("classify_task agrees with a flat argmax over all tasks") {
    const auto& f = fixture();
    auto emb = f.emb;
    auto ctx = rules();
    ctx.hierarchy = &f.h;
    ctx.embedder = &emb;
    std::vector<ToolRecord> tools{
        tool("merge_pull_request", "Merge a pull request after review"),
        tool("run_tests", "Run the automated test suite and report failing builds"),
        tool("monitor_server_logs", "Monitor system logs for failures"),
        tool("configure_firewall", "Configure firewall rules and network access permissions"),
        tool("reconcile_transactions", "Reconcile bank account transactions with the ledger"),
        tool("calculate_tax", "Calculate tax liabilities for a return"),
        tool("answer_customer", "Answer customer questions by email and chat messages"),
        tool("record_medication", "Record medication dosages administered to patients"),
        tool("grade_assignment", "Grade student assignments"),
        tool("plan_delivery_route", "Plan delivery routes and logistics schedules"),
        tool("search_literature", "Search scientific literature for research studies"),
        tool("edit_image", "Edit photographs and images"),
        tool("inspect_circuit", "Inspect electrical components for hazards"),
        tool("execute_trade", "Execute trades and transfers of financial assets"),
        tool("file_incident_report", "Write incident reports and maintain case records"),
    };
    auto s = desktop();
    int agree = 0;
    for (const auto& t : tools) {
        auto v = emb.embed({tool_text(t)})[0];
        std::size_t best = 0;
        double best_s = -2;
        for (std::size_t i = 0; i < f.h.task_vectors.size(); ++i) {
            double c = v.dot(f.h.task_vectors[i]) / (v.norm() * f.h.task_vectors[i].norm());
            if (c > best_s) {
                best_s = c;
                best = i;
            }
        }
        auto a = classify_task(t, s, ctx);
        if (a.task_id == f.h.tasks[best].task_id) {
            ++agree;
        } else {
            MESSAGE("disagreement for ", t.name, ": hierarchical ", a.task_id, " flat ", f.h.tasks[best].task_id);
        }
    }
    CHECK(agree >= 13);
}

TEST_CASE("classify_task provider choices are validated per level") {
    const auto& f = fixture();
    auto emb = f.emb;
    PromptLibrary prompts(asset_dir() / "prompts");
    auto ctx = rules();
    ctx.hierarchy = &f.h;
    ctx.embedder = &emb;
    ctx.prompts = &prompts;
    const auto& l2 = f.h.l2.front();
    Scripted scripted({l2.parent, l2.id, l2.members.back()});
    ctx.provider = &scripted;
    auto t = tool("anything", "unrelated words");
    auto a = classify_task(t, desktop(), ctx);
    CHECK(a.l1_id == l2.parent);
    CHECK(a.l2_id == l2.id);
    CHECK(a.task_id == l2.members.back());
    CHECK(scripted.tasks == std::vector<std::string>{"onet_l1", "onet_l2", "onet_task"});

    // An L1 without children is not selectable; two bad replies fall back to cosine ranking.
    std::string empty_l1;
    for (const auto& n : f.h.l1) {
        if (f.h.children(n.id).empty()) empty_l1 = n.id;
    }
    if (!empty_l1.empty()) {
        Scripted wrong({empty_l1});
        ctx.provider = &wrong;
        auto b = classify_task(t, desktop(), ctx);
        CHECK_FALSE(f.h.children(b.l1_id).empty());
        CHECK(wrong.calls >= 2);
    }
}

TEST_CASE("classify_server end to end on the rule path") {
    const auto& f = fixture();
    auto emb = f.emb;
    auto ctx = rules();
    ctx.hierarchy = &f.h;
    ctx.embedder = &emb;
    auto sc = classify_server(base(), ctx);
    CHECK(sc.method == "fallback");
    CHECK(sc.tools.size() == 6);
    CHECK(*sc.direct_impact == ImpactCategory::action);
    CHECK(sc.payments.autonomy == 4);
    CHECK_FALSE(sc.domain.empty());
    for (const auto& t : sc.tools) CHECK(t.method == "fallback");
    auto again = classify_server(base(), ctx);
    CHECK(Json(sc).dump() == Json(again).dump());
}
