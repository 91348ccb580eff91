#include "mcpscope/model.hpp"

#include <stdexcept>

#include <fmt/format.h>

#include "mcpscope/common/text.hpp"

namespace mcpscope {

std::string to_string(Source s) {
    switch (s) {
        case Source::github_search: return "github_search";
        case Source::smithery: return "smithery";
        case Source::official_list: return "official_list";
        case Source::awesome_list: return "awesome_list";
    }
    return "?";
}

Source parse_source(std::string_view s) {
    for (Source v : {Source::github_search, Source::smithery, Source::official_list,
                     Source::awesome_list}) {
        if (to_string(v) == s) return v;
    }
    throw std::invalid_argument(fmt::format("unknown source '{}'", s));
}

RepoRef RepoRef::from_url(std::string_view raw) {
    std::string u = text::to_lower(text::trim(raw));
    if (u.empty()) throw std::invalid_argument("empty repository url");
    if (u.starts_with("git@")) {  // git@github.com:owner/name.git
        u = u.substr(4);
        auto colon = u.find(':');
        if (colon != std::string::npos) u[colon] = '/';
    } else {
        for (std::string_view scheme : {"https://", "http://", "git://", "ssh://git@", "ssh://"}) {
            if (u.starts_with(scheme)) {
                u = u.substr(scheme.size());
                break;
            }
        }
    }
    if (u.starts_with("www.")) u = u.substr(4);
    auto cut = u.find_first_of("?#");
    if (cut != std::string::npos) u.resize(cut);
    auto parts = text::split(u, '/');
    std::vector<std::string> segs;
    for (auto& p : parts) {
        if (!p.empty()) segs.push_back(p);
    }
    RepoRef r;
    std::size_t first = 0;
    if (segs.size() == 2 && segs[0].find('.') == std::string::npos) {
        r.host = "github.com";  // owner/name shorthand
    } else {
        if (segs.size() < 3) {
            throw std::invalid_argument(fmt::format("not a repository url: '{}'", raw));
        }
        r.host = segs[0];
        first = 1;
    }
    r.owner = segs[first];
    r.name = segs[first + 1];
    if (r.name.ends_with(".git")) r.name.resize(r.name.size() - 4);
    if (r.owner.empty() || r.name.empty()) {
        throw std::invalid_argument(fmt::format("not a repository url: '{}'", raw));
    }
    r.url = fmt::format("https://{}/{}/{}", r.host, r.owner, r.name);
    return r;
}

std::string normalize_repo_url(std::string_view url) { return RepoRef::from_url(url).url; }

std::string server_id_for(const RepoRef& repo) { return sha256_hex(repo.url).substr(0, 16); }

std::string to_string(ImpactCategory c) {
    switch (c) {
        case ImpactCategory::perception: return "perception";
        case ImpactCategory::reasoning: return "reasoning";
        case ImpactCategory::action: return "action";
    }
    return "?";
}

ImpactCategory DirectImpact::category() const {
    if (!code || code->empty()) throw std::logic_error("unclassified tool has no category");
    switch ((*code)[0]) {
        case '1': return ImpactCategory::perception;
        case '2': return ImpactCategory::reasoning;
        case '3': return ImpactCategory::action;
    }
    throw std::logic_error(fmt::format("invalid functionality code '{}'", *code));
}

const std::vector<std::string>& functionality_codes() {
    static const std::vector<std::string> codes{"1.1", "2.1", "2.2", "2.3", "3.1", "3.2",
                                                "3.3", "3.4", "3.5", "3.6", "3.7"};
    return codes;
}

const std::string& functionality_name(const std::string& code) {
    static const std::map<std::string, std::string> names{
        {"1.1", "sensors"},          {"2.1", "planning"},
        {"2.2", "analysis"},         {"2.3", "resource_mgmt"},
        {"3.1", "authentication"},   {"3.2", "computer_use"},
        {"3.3", "code_execution"},   {"3.4", "software_extensions"},
        {"3.5", "physical_extensions"}, {"3.6", "human_interaction"},
        {"3.7", "agent_interaction"},
    };
    static const std::string unknown = "unclassified";
    auto it = names.find(code);
    return it == names.end() ? unknown : it->second;
}

bool is_functionality_code(std::string_view code) {
    const auto& c = functionality_codes();
    return std::find(c.begin(), c.end(), code) != c.end();
}

std::string to_string(StakesBucket b) {
    switch (b) {
        case StakesBucket::low: return "low";
        case StakesBucket::medium: return "medium";
        case StakesBucket::high: return "high";
    }
    return "?";
}

namespace {

StakesBucket parse_bucket(const std::string& s) {
    if (s == "low") return StakesBucket::low;
    if (s == "medium") return StakesBucket::medium;
    if (s == "high") return StakesBucket::high;
    throw std::invalid_argument(fmt::format("unknown stakes bucket '{}'", s));
}

ImpactCategory parse_category(const std::string& s) {
    if (s == "perception") return ImpactCategory::perception;
    if (s == "reasoning") return ImpactCategory::reasoning;
    if (s == "action") return ImpactCategory::action;
    throw std::invalid_argument(fmt::format("unknown impact category '{}'", s));
}

Json opt_ts(const std::optional<Timestamp>& t) {
    return t ? Json(format_timestamp(*t)) : Json(nullptr);
}

std::optional<Timestamp> get_ts(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return parse_timestamp(it->get<std::string>());
}

template <class T>
std::optional<T> get_opt(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<T>();
}

}  // namespace

void to_json(Json& j, const RepoRef& r) {
    j = Json{{"host", r.host}, {"owner", r.owner}, {"name", r.name}, {"url", r.url}};
}

void from_json(const Json& j, RepoRef& r) {
    r = RepoRef::from_url(j.at("url").get<std::string>());
}

void to_json(Json& j, const ServerCandidate& c) {
    std::vector<std::string> sources;
    for (auto s : c.sources) sources.push_back(to_string(s));
    j = Json{{"repo", c.repo},          {"sources", sources},
             {"stars", c.stars},        {"created_at", opt_ts(c.created_at)},
             {"is_official", c.is_official}, {"description", c.description},
             {"topics", c.topics}};
}

void from_json(const Json& j, ServerCandidate& c) {
    c.repo = j.at("repo").get<RepoRef>();
    c.sources.clear();
    for (const auto& s : j.at("sources")) c.sources.insert(parse_source(s.get<std::string>()));
    c.stars = j.value("stars", std::int64_t{0});
    c.created_at = get_ts(j, "created_at");
    c.is_official = j.value("is_official", false);
    c.description = j.value("description", std::string{});
    c.topics = j.value("topics", std::vector<std::string>{});
}

void to_json(Json& j, const RawServerDoc& d) {
    j = Json{{"repo", d.repo},
             {"readme_text", d.readme_text},
             {"description", d.description},
             {"tags", d.tags},
             {"snapshot_date", format_date(d.snapshot_date)}};
}

void from_json(const Json& j, RawServerDoc& d) {
    d.repo = j.at("repo").get<RepoRef>();
    d.readme_text = j.value("readme_text", std::string{});
    d.description = j.value("description", std::string{});
    d.tags = j.value("tags", std::vector<std::string>{});
    d.snapshot_date = parse_date(j.at("snapshot_date").get<std::string>());
}

void to_json(Json& j, const ToolRecord& t) {
    j = Json{{"name", t.name}, {"description", t.description}};
    j["input_schema"] = t.input_schema ? Json(*t.input_schema) : Json(nullptr);
}

void from_json(const Json& j, ToolRecord& t) {
    t.name = j.at("name").get<std::string>();
    t.description = j.value("description", std::string{});
    t.input_schema = get_opt<std::string>(j, "input_schema");
}

void to_json(Json& j, const ExtractionResult& e) {
    j = Json{{"summary", e.summary},
             {"is_mcp_server", e.is_mcp_server},
             {"filtered_content", e.filtered_content},
             {"tools", e.tools}};
}

void from_json(const Json& j, ExtractionResult& e) {
    e.summary = j.value("summary", std::string{});
    const auto& flag = j.at("is_mcp_server");
    e.is_mcp_server = flag.is_boolean() ? flag.get<bool>() : flag.get<int>() != 0;
    e.filtered_content = j.value("filtered_content", std::string{});
    e.tools = j.value("tools", std::vector<ToolRecord>{});
}

void to_json(Json& j, const ServerRecord& s) {
    j = Json{{"id", s.id},
             {"repo", s.repo},
             {"extraction", s.extraction},
             {"is_official", s.is_official},
             {"created_at", opt_ts(s.created_at)},
             {"stars", s.stars},
             {"description", s.description},
             {"readme_text", s.readme_text},
             {"snapshot_date", format_date(s.snapshot_date)},
             {"extraction_method", s.extraction_method}};
}

void from_json(const Json& j, ServerRecord& s) {
    s.id = j.at("id").get<std::string>();
    s.repo = j.at("repo").get<RepoRef>();
    s.extraction = j.at("extraction").get<ExtractionResult>();
    s.is_official = j.value("is_official", false);
    s.created_at = get_ts(j, "created_at");
    s.stars = j.value("stars", std::int64_t{0});
    s.description = j.value("description", std::string{});
    s.readme_text = j.value("readme_text", std::string{});
    s.snapshot_date = parse_date(j.at("snapshot_date").get<std::string>());
    s.extraction_method = j.value("extraction_method", std::string{});
}

void to_json(Json& j, const TaskAssignment& t) {
    j = Json{{"l1_id", t.l1_id},
             {"l2_id", t.l2_id},
             {"task_id", t.task_id},
             {"soc_distribution", t.soc_distribution},
             {"options_presented", t.options_presented},
             {"low_confidence", t.low_confidence}};
    j["impact_score"] = t.impact_score ? Json(*t.impact_score) : Json(nullptr);
    j["stakes_bucket"] = t.stakes_bucket ? Json(to_string(*t.stakes_bucket)) : Json(nullptr);
}

void from_json(const Json& j, TaskAssignment& t) {
    t.l1_id = j.value("l1_id", std::string{});
    t.l2_id = j.value("l2_id", std::string{});
    t.task_id = j.value("task_id", std::string{});
    t.soc_distribution = j.value("soc_distribution", std::map<std::string, double>{});
    t.options_presented = j.value("options_presented", 0);
    t.low_confidence = j.value("low_confidence", true);
    t.impact_score = get_opt<double>(j, "impact_score");
    auto b = get_opt<std::string>(j, "stakes_bucket");
    t.stakes_bucket = b ? std::optional(parse_bucket(*b)) : std::nullopt;
}

void to_json(Json& j, const ToolClassification& t) {
    j = Json{{"tool_name", t.tool_name},
             {"functionality", t.direct_impact.label()},
             {"task", t.task},
             {"method", t.method}};
    j["direct_impact"] = t.direct_impact.classified()
                             ? Json(to_string(t.direct_impact.category()))
                             : Json("unclassified");
}

void from_json(const Json& j, ToolClassification& t) {
    t.tool_name = j.at("tool_name").get<std::string>();
    auto code = j.value("functionality", std::string{"unclassified"});
    t.direct_impact.code = is_functionality_code(code) ? std::optional(code) : std::nullopt;
    t.task = j.value("task", TaskAssignment{});
    t.method = j.value("method", std::string{});
}

void to_json(Json& j, const ServerClassification& s) {
    j = Json{{"server_id", s.server_id},
             {"industry_general", s.generality.industry_general},
             {"environment_general", s.generality.environment_general},
             {"action_space_description", s.generality.action_space_description},
             {"payments_autonomy", s.payments.autonomy},
             {"payments_analysis", s.payments.analysis},
             {"domain", s.domain},
             {"soc", s.soc},
             {"tools", s.tools},
             {"method", s.method}};
    j["direct_impact"] = s.direct_impact ? Json(to_string(*s.direct_impact)) : Json("unclassified");
}

void from_json(const Json& j, ServerClassification& s) {
    s.server_id = j.at("server_id").get<std::string>();
    s.generality.industry_general = j.value("industry_general", false);
    s.generality.environment_general = j.value("environment_general", false);
    s.generality.action_space_description = j.value("action_space_description", std::string{});
    s.payments.autonomy = j.value("payments_autonomy", 0);
    s.payments.analysis = j.value("payments_analysis", std::string{});
    s.domain = j.value("domain", std::string{});
    s.soc = j.value("soc", std::string{});
    s.tools = j.value("tools", std::vector<ToolClassification>{});
    s.method = j.value("method", std::string{});
    auto di = j.value("direct_impact", std::string{"unclassified"});
    s.direct_impact = di == "unclassified" ? std::nullopt : std::optional(parse_category(di));
}

void to_json(Json& j, const AiEvidence& e) {
    j = Json{{"criterion", e.criterion},
             {"tool", e.tool},
             {"date", opt_ts(e.date)},
             {"location", e.location},
             {"in_first_month_tree", e.in_first_month_tree}};
}

void from_json(const Json& j, AiEvidence& e) {
    e.criterion = j.at("criterion").get<int>();
    e.tool = j.at("tool").get<std::string>();
    e.date = get_ts(j, "date");
    e.location = j.value("location", std::string{});
    e.in_first_month_tree = j.value("in_first_month_tree", false);
}

void to_json(Json& j, const AiVerdict& v) {
    Json scores = Json::object();
    for (const auto& [agent, s] : v.score_breakdown) {
        scores[agent] = Json{{"coauthor", 3 * s.coauthor},
                             {"config", 10 * s.config},
                             {"bot", 5 * s.bot},
                             {"mention", s.mention},
                             {"total", s.total()}};
    }
    j = Json{{"server_id", v.server_id},
             {"repo_url", v.repo_url},
             {"ai_authored", v.ai_authored},
             {"score_breakdown", scores},
             {"evidence", v.evidence},
             {"coverage", v.coverage}};
    j["agent"] = v.agent ? Json(*v.agent) : Json(nullptr);
    j["first_month"] = v.first_month ? Json(*v.first_month) : Json(nullptr);
    j["first_month_agent"] = v.first_month_agent ? Json(*v.first_month_agent) : Json(nullptr);
    j["date_first_ai_evidence"] = opt_ts(v.date_first_ai_evidence);
}

void from_json(const Json& j, AiVerdict& v) {
    v.server_id = j.value("server_id", std::string{});
    v.repo_url = j.value("repo_url", std::string{});
    v.ai_authored = j.at("ai_authored").get<bool>();
    v.agent = get_opt<std::string>(j, "agent");
    v.first_month = get_opt<bool>(j, "first_month");
    v.first_month_agent = get_opt<std::string>(j, "first_month_agent");
    v.date_first_ai_evidence = get_ts(j, "date_first_ai_evidence");
    v.evidence = j.value("evidence", std::vector<AiEvidence>{});
    v.coverage = j.value("coverage", std::map<std::string, bool>{});
    v.score_breakdown.clear();
    if (j.contains("score_breakdown")) {
        for (auto& [agent, s] : j["score_breakdown"].items()) {
            AgentScore a;
            a.coauthor = s.value("coauthor", 0) / 3;
            a.config = s.value("config", 0) / 10;
            a.bot = s.value("bot", 0) / 5;
            a.mention = s.value("mention", 0);
            v.score_breakdown[agent] = a;
        }
    }
}

}  // namespace mcpscope
