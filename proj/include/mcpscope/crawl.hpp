#pragma once

#include <set>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcpscope/github.hpp"
#include "mcpscope/model.hpp"

namespace mcpscope::crawl {

struct CrawlConfig {
    std::string search_string = "mcp server";
    std::string search_query;  // empty: "\"<search_string>\" in:name,description,readme,topics"
    std::int64_t min_stars = 1;
    std::string official_list_url =
        "https://raw.githubusercontent.com/modelcontextprotocol/servers/main/README.md";
    std::vector<std::string> awesome_list_urls{
        "https://raw.githubusercontent.com/punkpeye/awesome-mcp-servers/main/README.md"};
    std::string registry_api = "https://registry.smithery.ai";
    std::string registry_token_env = "SMITHERY_API_KEY";
    Date snapshot_cutoff = parse_date("2025-10-01");
    Date collection_date = parse_date("2026-02-01");
    double request_rate_limit = 10.0;  // requests per second per host
    int max_search_pages = 10;
    int max_registry_pages = 200;
    std::set<Source> sources{Source::github_search, Source::smithery, Source::official_list, Source::awesome_list};

    /// Throws ConfigError.
    void validate() const;
    [[nodiscard]] std::string effective_query() const;
};

struct DiscoverStats {
    std::int64_t reported_hits = 0;  // total the remote claims to have
    std::size_t seen = 0;
    std::size_t kept = 0;
    std::size_t skipped_malformed = 0;
};

/// Candidates from one source, each tagged with it. github_search keeps items whose
/// name, description, topics or README contain the search string (case-insensitive)
/// and that have at least min_stars stars; the lists keep every member.
std::vector<ServerCandidate> discover(Source source, const CrawlConfig& cfg, GithubApi& api,
                                      DiscoverStats* stats = nullptr);

/// Repository links in a markdown document, in order of first appearance, deduplicated.
std::vector<RepoRef> parse_list_links(std::string_view markdown);

/// Group by url: sources unioned, stars max, is_official OR, earliest created_at, first
/// non-empty description and topics. Sorted by url. No filtering.
std::vector<ServerCandidate> merge_duplicates(const std::vector<ServerCandidate>& candidates);

/// merge_duplicates, then drop zero-star candidates.
std::vector<ServerCandidate> dedup(const std::vector<ServerCandidate>& candidates);

/// Fills stars, created_at, description and topics from repository metadata for
/// candidates that lack a creation date. Gone repositories keep zero stars.
void enrich(std::vector<ServerCandidate>& candidates, GithubApi& api);

struct SnapshotOutcome {
    std::optional<RawServerDoc> doc;
    std::string dropped_reason;  // "repo-deleted", "readme-missing", "remote-unreachable", ...
};

/// Snapshot date the policy assigns to a repository created at `created_at`.
Date snapshot_date_for(std::optional<Timestamp> created_at, const CrawlConfig& cfg);

/// README as of the cutoff for repositories created before it, else the latest README.
SnapshotOutcome snapshot(const ServerCandidate& candidate, const CrawlConfig& cfg, GithubApi& api);

struct CrawlResult {
    std::vector<ServerCandidate> candidates;
    std::vector<RawServerDoc> docs;
    std::map<std::string, std::string> dropped;  // url -> reason
    std::map<std::string, DiscoverStats> per_source;
};

/// Every source, merge, enrich, dedup, then snapshot in parallel (one rate limiter per host).
/// A source that fails outright is logged and contributes nothing.
CrawlResult run_crawl(const CrawlConfig& cfg, GithubApi& api);

}  // namespace mcpscope::crawl
