#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mcpscope/github.hpp"
#include "mcpscope/model.hpp"
#include "mcpscope/provider.hpp"

namespace mcpscope::ai {

inline constexpr std::size_t kMaxCommits = 10000;
inline constexpr std::size_t kMaxPulls = 30;
inline constexpr auto kFirstMonth = std::chrono::hours(30 * 24);

enum Criterion { coauthor = 1, config = 2, bot = 3, mention = 4 };

struct ConfigPattern {
    enum class Kind { file, dir, path } kind = Kind::file;
    std::string pattern;  // lowercased
    std::string agent;

    /// The tree path that identifies this match ("a/.cursor" for "a/.cursor/rules/x.mdc").
    [[nodiscard]] std::optional<std::string> match(const std::string& path) const;
};

struct PatternSet {
    std::vector<std::string> agents;
    std::map<std::string, std::string> aliases;                 // lowercased alias -> canonical
    std::map<std::string, std::vector<std::string>> coauthor;   // agent -> keywords
    std::vector<ConfigPattern> config_files;
    std::map<std::string, std::string> bots;                    // lowercased login -> agent
    std::vector<std::string> dependency_bots;                   // lowercased logins
    std::map<std::string, std::vector<std::string>> mentions;   // agent -> phrases or @handles
    std::vector<std::string> mention_exclusions;

    /// Throws ConfigError on unknown agents or a bot listed as both AI and dependency bot.
    static PatternSet load(const fs::path& file = asset_dir() / "ai_patterns.json");
    [[nodiscard]] std::string canonical(const std::string& name) const;
    [[nodiscard]] bool is_dependency_bot(const std::string& login) const;
};

struct CommitInfo {
    std::string sha;
    std::string author_login;
    std::string message;
    std::optional<Timestamp> date;
};

struct PullInfo {
    int number = 0;
    std::string author_login;
    std::string title;
    std::string body;
    std::optional<Timestamp> date;
};

struct RepoActivity {
    RepoRef repo;
    std::optional<Timestamp> created_at;
    std::vector<CommitInfo> commits;
    std::vector<PullInfo> pulls;
    std::vector<std::string> tree;
    std::optional<std::vector<std::string>> first_month_tree;
    std::map<std::string, Timestamp> introduced;  // config match path -> first commit touching it
    std::map<std::string, bool> coverage;
};

/// "Co-Authored-By:" trailer values in a message (case-insensitive key).
std::vector<std::string> coauthor_trailers(std::string_view message);

/// Agents mentioned in free text, exclusions blanked out first. Trailer lines are ignored.
std::vector<std::string> mentioned_agents(std::string_view text, const PatternSet& p);

/// Evidence from all four criteria. Config matches are scanned in both trees, one piece per
/// distinct match path, dated by `introduced`.
std::vector<AiEvidence> scan_evidence(const RepoActivity& activity, const PatternSet& p);

/// Weighted per-agent scores; nullopt agent for empty evidence. Ties: config presence,
/// then bot, co-author, mention, then name.
std::pair<std::optional<std::string>, std::map<std::string, AgentScore>>
identify_agent(const std::vector<AiEvidence>& evidence);

/// Evidence restricted to the first 30x24h: dated evidence inside the window, config
/// evidence when present in the first-month tree.
std::vector<AiEvidence> first_month_evidence(const std::vector<AiEvidence>& evidence,
                                             std::optional<Timestamp> created_at);

AiVerdict verdict(const std::vector<AiEvidence>& evidence, std::optional<Timestamp> created_at);

/// Commits (capped), the 30 newest pulls, the latest recursive tree, the tree at the newest
/// commit inside the first month, and introduction dates of matched config paths.
/// Failures leave the piece empty and its coverage flag false.
RepoActivity load_activity(const RepoRef& repo, std::optional<Timestamp> created_at, GithubApi& api,
                           const PatternSet& p);

/// load_activity + scan_evidence + verdict for each server, in parallel.
std::vector<AiVerdict> detect_all(const std::vector<ServerRecord>& servers, GithubApi& api, const PatternSet& p);

}  // namespace mcpscope::ai
