#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mcpscope/common/io.hpp"
#include "mcpscope/common/time.hpp"

namespace mcpscope {

enum class Source { github_search, smithery, official_list, awesome_list };
std::string to_string(Source s);
Source parse_source(std::string_view s);

/// Canonical repository identity. url is "https://<host>/<owner>/<name>", lowercase.
struct RepoRef {
    std::string host;
    std::string owner;
    std::string name;
    std::string url;

    /// Accepts https/http/ssh forms, "owner/name" shorthand (github.com assumed) and
    /// deeper paths (only the first two segments are kept). Throws std::invalid_argument.
    static RepoRef from_url(std::string_view url);
    auto operator<=>(const RepoRef&) const = default;
};

/// Idempotent: normalize(normalize(u)) == normalize(u).
std::string normalize_repo_url(std::string_view url);

struct ServerCandidate {
    RepoRef repo;
    std::set<Source> sources;
    std::int64_t stars = 0;
    std::optional<Timestamp> created_at;
    bool is_official = false;
    std::string description;
    std::vector<std::string> topics;
};

struct RawServerDoc {
    RepoRef repo;
    std::string readme_text;
    std::string description;
    std::vector<std::string> tags;
    Date snapshot_date{};
};

struct ToolRecord {
    std::string name;
    std::string description;
    std::optional<std::string> input_schema;
};

struct ExtractionResult {
    std::string summary;
    bool is_mcp_server = false;
    std::string filtered_content;
    std::vector<ToolRecord> tools;
};

struct ServerRecord {
    std::string id;  // sha256 of repo.url, first 16 hex digits
    RepoRef repo;
    ExtractionResult extraction;
    bool is_official = false;
    std::optional<Timestamp> created_at;
    std::int64_t stars = 0;
    std::string description;
    std::string readme_text;  // raw snapshot, kept for package matching
    Date snapshot_date{};
    std::string extraction_method;  // "provider" or "fallback"
};

std::string server_id_for(const RepoRef& repo);

// ---- classification labels ----

enum class ImpactCategory { perception, reasoning, action };
std::string to_string(ImpactCategory c);

/// Functionality code "d.d" from the 11-code list, or unclassified.
struct DirectImpact {
    std::optional<std::string> code;

    [[nodiscard]] bool classified() const { return code.has_value(); }
    /// Category from the leading digit. Only valid when classified.
    [[nodiscard]] ImpactCategory category() const;
    [[nodiscard]] std::string label() const { return code.value_or("unclassified"); }
};

/// The 11 valid functionality codes in table order.
const std::vector<std::string>& functionality_codes();
const std::string& functionality_name(const std::string& code);
bool is_functionality_code(std::string_view code);

struct GeneralityLabel {
    bool industry_general = false;
    bool environment_general = false;
    std::string action_space_description;
};

struct PaymentsLabel {
    int autonomy = 0;
    std::string analysis;
};

enum class StakesBucket { low, medium, high };
std::string to_string(StakesBucket b);

struct TaskAssignment {
    std::string l1_id;
    std::string l2_id;
    std::string task_id;
    std::map<std::string, double> soc_distribution;  // 2-digit SOC group -> weight
    std::optional<double> impact_score;
    std::optional<StakesBucket> stakes_bucket;
    int options_presented = 0;
    bool low_confidence = true;  // L2 and task level are low-confidence by construction
};

struct ToolClassification {
    std::string tool_name;
    DirectImpact direct_impact;
    TaskAssignment task;
    std::string method;
};

struct ServerClassification {
    std::string server_id;
    GeneralityLabel generality;
    PaymentsLabel payments;
    std::optional<ImpactCategory> direct_impact;  // max over tools
    std::string domain;                           // mode L1 id
    std::string soc;                              // mode 2-digit SOC group
    std::vector<ToolClassification> tools;
    std::string method;
};

// ---- AI authorship ----

struct AiEvidence {
    int criterion = 0;  // 1 coauthor, 2 config, 3 bot, 4 mention
    std::string tool;
    std::optional<Timestamp> date;
    std::string location;
    bool in_first_month_tree = false;
};

struct AgentScore {
    int coauthor = 0;
    int config = 0;
    int bot = 0;
    int mention = 0;
    [[nodiscard]] int total() const { return 3 * coauthor + 10 * config + 5 * bot + mention; }
};

struct AiVerdict {
    std::string server_id;
    std::string repo_url;
    bool ai_authored = false;
    std::optional<std::string> agent;
    std::map<std::string, AgentScore> score_breakdown;
    std::optional<bool> first_month;
    std::optional<std::string> first_month_agent;
    std::optional<Timestamp> date_first_ai_evidence;
    std::vector<AiEvidence> evidence;
    std::map<std::string, bool> coverage;  // commits/pulls/tree/first_month_tree fetched
};

// ---- JSON ----

void to_json(Json& j, const RepoRef& r);
void from_json(const Json& j, RepoRef& r);
void to_json(Json& j, const ServerCandidate& c);
void from_json(const Json& j, ServerCandidate& c);
void to_json(Json& j, const RawServerDoc& d);
void from_json(const Json& j, RawServerDoc& d);
void to_json(Json& j, const ToolRecord& t);
void from_json(const Json& j, ToolRecord& t);
void to_json(Json& j, const ExtractionResult& e);
void from_json(const Json& j, ExtractionResult& e);
void to_json(Json& j, const ServerRecord& s);
void from_json(const Json& j, ServerRecord& s);
void to_json(Json& j, const TaskAssignment& t);
void from_json(const Json& j, TaskAssignment& t);
void to_json(Json& j, const ToolClassification& t);
void from_json(const Json& j, ToolClassification& t);
void to_json(Json& j, const ServerClassification& s);
void from_json(const Json& j, ServerClassification& s);
void to_json(Json& j, const AiEvidence& e);
void from_json(const Json& j, AiEvidence& e);
void to_json(Json& j, const AiVerdict& v);
void from_json(const Json& j, AiVerdict& v);

template <class T>
std::vector<Json> to_rows(const std::vector<T>& items) {
    std::vector<Json> rows;
    rows.reserve(items.size());
    for (const auto& it : items) rows.emplace_back(it);
    return rows;
}

template <class T>
std::vector<T> load_rows(const fs::path& path) {
    std::vector<T> out;
    for (const auto& row : read_jsonl(path)) out.push_back(row.get<T>());
    return out;
}

}  // namespace mcpscope
