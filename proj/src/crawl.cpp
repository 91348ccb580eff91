#include "mcpscope/crawl.hpp"

#include <algorithm>
#include <cstdlib>
#include <regex>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "mcpscope/common/errors.hpp"
#include "mcpscope/common/text.hpp"

namespace mcpscope::crawl {

void CrawlConfig::validate() const {
    if (min_stars < 0) throw ConfigError("crawl.min_stars must be >= 0");
    if (snapshot_cutoff > collection_date) {
        throw ConfigError(fmt::format("crawl.snapshot_cutoff {} is after collection_date {}",
                                      format_date(snapshot_cutoff), format_date(collection_date)));
    }
    if (search_string.empty() && search_query.empty()) throw ConfigError("crawl.search_string is empty");
    if (request_rate_limit < 0) throw ConfigError("crawl.request_rate_limit must be >= 0");
    if (max_search_pages < 1 || max_registry_pages < 1) throw ConfigError("crawl page limits must be >= 1");
}

std::string CrawlConfig::effective_query() const {
    if (!search_query.empty()) return search_query;
    return fmt::format("\"{}\" in:name,description,readme,topics", search_string);
}

namespace {

std::vector<std::string> string_list(const Json& j, const char* key) {
    std::vector<std::string> out;
    if (j.contains(key) && j[key].is_array()) {
        for (const auto& v : j[key]) {
            if (v.is_string()) out.push_back(v.get<std::string>());
        }
    }
    return out;
}

std::string str_or(const Json& j, const char* key) {
    return j.contains(key) && j[key].is_string() ? j[key].get<std::string>() : std::string{};
}

std::optional<Timestamp> time_or(const Json& j, const char* key) {
    return try_parse_timestamp(str_or(j, key));
}

bool matches_search(const std::string& haystack, const CrawlConfig& cfg) {
    return text::contains_ci(haystack, cfg.search_string);
}

std::vector<ServerCandidate> discover_search(const CrawlConfig& cfg, GithubApi& api, DiscoverStats& st) {
    std::vector<ServerCandidate> out;
    const auto q = http::url_encode(cfg.effective_query());
    for (int page = 1; page <= cfg.max_search_pages; ++page) {
        auto j = api.get_json(fmt::format("/search/repositories?q={}&per_page=100&page={}", q, page));
        if (page == 1) st.reported_hits = j.value("total_count", std::int64_t{0});
        if (!j.contains("items") || !j["items"].is_array()) {
            throw RemoteError("search response without items", 200, false);
        }
        const auto& items = j["items"];
        for (const auto& it : items) {
            ++st.seen;
            ServerCandidate c;
            try {
                c.repo = RepoRef::from_url(str_or(it, "html_url").empty() ? "github.com/" + str_or(it, "full_name")
                                                                           : str_or(it, "html_url"));
            } catch (const std::invalid_argument& e) {
                ++st.skipped_malformed;
                spdlog::warn("github_search: skipping item: {}", e.what());
                continue;
            }
            c.stars = it.value("stargazers_count", std::int64_t{0});
            if (c.stars < cfg.min_stars) continue;
            c.created_at = time_or(it, "created_at");
            c.description = str_or(it, "description");
            c.topics = string_list(it, "topics");
            c.sources = {Source::github_search};
            auto meta = fmt::format("{}\n{}\n{}", c.repo.name, c.description, text::join(c.topics, " "));
            if (!matches_search(meta, cfg)) {
                auto readme = api.readme(c.repo);
                if (!readme || !matches_search(*readme, cfg)) continue;
            }
            out.push_back(std::move(c));
        }
        if (items.size() < 100) break;
    }
    if (st.reported_hits > 1000) {
        spdlog::warn("github_search: {} hits reported, the search interface serves at most 1000 per query",
                     st.reported_hits);
    }
    return out;
}

std::optional<RepoRef> registry_repo(const Json& entry) {
    for (const char* key : {"repository", "sourceUrl", "homepage"}) {
        if (!entry.contains(key)) continue;
        const Json& v = entry[key];
        std::string url = v.is_string() ? v.get<std::string>() : v.is_object() ? str_or(v, "url") : "";
        if (url.empty()) continue;
        try {
            auto r = RepoRef::from_url(url);
            if (r.host == "github.com") return r;
        } catch (const std::invalid_argument&) {
        }
    }
    return std::nullopt;
}

std::vector<ServerCandidate> discover_registry(const CrawlConfig& cfg, GithubApi& api, DiscoverStats& st) {
    http::Headers h{{"Accept", "application/json"}, {"User-Agent", "mcp-scope"}};
    if (const char* tok = std::getenv(cfg.registry_token_env.c_str()); tok && *tok) {
        h["Authorization"] = fmt::format("Bearer {}", tok);
    }
    std::vector<ServerCandidate> out;
    auto base = cfg.registry_api;
    while (!base.empty() && base.back() == '/') base.pop_back();
    for (int page = 1; page <= cfg.max_registry_pages; ++page) {
        auto resp = api.client().get_ok(fmt::format("{}/servers?page={}&pageSize=100", base, page), h);
        auto j = Json::parse(resp.body, nullptr, false);
        if (j.is_discarded() || !j.contains("servers") || !j["servers"].is_array()) {
            throw RemoteError("malformed registry page", resp.status, false);
        }
        if (page == 1 && j.contains("pagination")) {
            st.reported_hits = j["pagination"].value("totalCount", std::int64_t{0});
        }
        for (const auto& entry : j["servers"]) {
            ++st.seen;
            auto repo = entry.is_object() ? registry_repo(entry) : std::nullopt;
            if (!repo) {
                ++st.skipped_malformed;
                spdlog::info("registry: no repository link for '{}'",
                             entry.is_object() ? str_or(entry, "qualifiedName") : entry.dump());
                continue;
            }
            ServerCandidate c;
            c.repo = *repo;
            c.sources = {Source::smithery};
            c.description = str_or(entry, "description");
            c.is_official = entry.value("official", false) || entry.value("verified", false);
            out.push_back(std::move(c));
        }
        int total_pages = j.contains("pagination") ? j["pagination"].value("totalPages", page) : page;
        if (page >= total_pages || j["servers"].empty()) break;
    }
    return out;
}

std::vector<ServerCandidate> discover_list(Source source, const std::string& url, GithubApi& api,
                                           DiscoverStats& st) {
    auto body = api.client().get_ok(url, {{"User-Agent", "mcp-scope"}}).body;
    std::optional<RepoRef> self;
    if (source == Source::awesome_list) {
        auto parts = text::split(url, '/');
        // raw.githubusercontent.com/<owner>/<name>/... or github.com/<owner>/<name>/...
        if (parts.size() >= 5) {
            try {
                self = RepoRef::from_url("github.com/" + parts[3] + "/" + parts[4]);
            } catch (const std::invalid_argument&) {
            }
        }
    }
    std::vector<ServerCandidate> out;
    for (auto& r : parse_list_links(body)) {
        ++st.seen;
        if (self && r.url == self->url) continue;
        ServerCandidate c;
        c.repo = std::move(r);
        c.sources = {source};
        c.is_official = source == Source::official_list;
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace

std::vector<ServerCandidate> discover(Source source, const CrawlConfig& cfg, GithubApi& api, DiscoverStats* stats) {
    DiscoverStats local;
    DiscoverStats& st = stats ? *stats : local;
    std::vector<ServerCandidate> out;
    switch (source) {
        case Source::github_search: out = discover_search(cfg, api, st); break;
        case Source::smithery: out = discover_registry(cfg, api, st); break;
        case Source::official_list: out = discover_list(source, cfg.official_list_url, api, st); break;
        case Source::awesome_list:
            for (const auto& url : cfg.awesome_list_urls) {
                auto part = discover_list(source, url, api, st);
                out.insert(out.end(), part.begin(), part.end());
            }
            break;
    }
    st.kept = out.size();
    return out;
}

std::vector<RepoRef> parse_list_links(std::string_view markdown) {
    static const std::regex link(R"(https?://(?:www\.)?github\.com/([A-Za-z0-9_.-]+)/([A-Za-z0-9_.-]+))",
                                 std::regex::icase);
    static const std::set<std::string> reserved{"topics", "orgs", "sponsors", "features", "marketplace",
                                                "apps", "settings", "login", "about", "pricing",
                                                "collections", "site", "explore", "enterprise", "users",
                                                "search", "notifications", "trending"};
    std::vector<RepoRef> out;
    std::set<std::string> seen;
    const std::string doc(markdown);
    for (auto it = std::sregex_iterator(doc.begin(), doc.end(), link); it != std::sregex_iterator(); ++it) {
        const auto owner = text::to_lower((*it)[1].str());
        if (reserved.count(owner)) continue;
        std::string name = (*it)[2].str();
        while (!name.empty() && name.back() == '.') name.pop_back();  // sentence punctuation
        if (name.empty()) continue;
        try {
            auto r = RepoRef::from_url("github.com/" + owner + "/" + name);
            if (seen.insert(r.url).second) out.push_back(std::move(r));
        } catch (const std::invalid_argument&) {
        }
    }
    return out;
}

std::vector<ServerCandidate> merge_duplicates(const std::vector<ServerCandidate>& candidates) {
    std::map<std::string, ServerCandidate> by_url;
    for (const auto& c : candidates) {
        auto [it, fresh] = by_url.try_emplace(c.repo.url, c);
        if (fresh) continue;
        auto& m = it->second;
        m.sources.insert(c.sources.begin(), c.sources.end());
        m.stars = std::max(m.stars, c.stars);
        m.is_official = m.is_official || c.is_official;
        if (c.created_at && (!m.created_at || *c.created_at < *m.created_at)) m.created_at = c.created_at;
        if (m.description.empty()) m.description = c.description;
        if (m.topics.empty()) m.topics = c.topics;
    }
    std::vector<ServerCandidate> out;
    out.reserve(by_url.size());
    for (auto& [_, c] : by_url) {
        if (c.sources.count(Source::official_list)) c.is_official = true;
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<ServerCandidate> dedup(const std::vector<ServerCandidate>& candidates) {
    auto merged = merge_duplicates(candidates);
    std::erase_if(merged, [](const ServerCandidate& c) { return c.stars <= 0; });
    return merged;
}

void enrich(std::vector<ServerCandidate>& candidates, GithubApi& api) {
    for (auto& c : candidates) {
        if (c.created_at) continue;
        try {
            auto meta = api.repo(c.repo);
            if (!meta) {
                spdlog::info("enrich: {} no longer exists", c.repo.url);
                continue;
            }
            c.stars = std::max(c.stars, meta->value("stargazers_count", std::int64_t{0}));
            c.created_at = time_or(*meta, "created_at");
            if (c.description.empty()) c.description = str_or(*meta, "description");
            if (c.topics.empty()) c.topics = string_list(*meta, "topics");
        } catch (const std::exception& e) {
            spdlog::warn("enrich: {}: {}", c.repo.url, e.what());
        }
    }
}

Date snapshot_date_for(std::optional<Timestamp> created_at, const CrawlConfig& cfg) {
    if (created_at && to_date(*created_at) < cfg.snapshot_cutoff) return cfg.snapshot_cutoff;
    return cfg.collection_date;
}

SnapshotOutcome snapshot(const ServerCandidate& candidate, const CrawlConfig& cfg, GithubApi& api) {
    SnapshotOutcome out;
    try {
        auto created = candidate.created_at;
        std::optional<Json> meta;
        if (!created) {
            meta = api.repo(candidate.repo);
            if (!meta) {
                out.dropped_reason = "repo-deleted";
                return out;
            }
            created = time_or(*meta, "created_at");
        }
        const Date when = snapshot_date_for(created, cfg);
        std::string ref;
        if (when == cfg.snapshot_cutoff && created && to_date(*created) < cfg.snapshot_cutoff) {
            auto sha = api.commit_before(candidate.repo, Timestamp{cfg.snapshot_cutoff});
            if (!sha) {
                out.dropped_reason = api.repo(candidate.repo) ? "no-commit-before-cutoff" : "repo-deleted";
                return out;
            }
            ref = *sha;
        }
        auto readme = api.readme(candidate.repo, ref);
        if (!readme) {
            out.dropped_reason = (meta || api.repo(candidate.repo)) ? "readme-missing" : "repo-deleted";
            return out;
        }
        RawServerDoc doc;
        doc.repo = candidate.repo;
        doc.readme_text = std::move(*readme);
        doc.description = candidate.description;
        doc.tags = candidate.topics;
        if (meta) {
            if (doc.description.empty()) doc.description = str_or(*meta, "description");
            if (doc.tags.empty()) doc.tags = string_list(*meta, "topics");
        }
        doc.snapshot_date = when;
        out.doc = std::move(doc);
    } catch (const RemoteError& e) {
        out.dropped_reason = "remote-unreachable";
        spdlog::warn("snapshot: {}: {}", candidate.repo.url, e.what());
    } catch (const Json::exception& e) {
        out.dropped_reason = "malformed-response";
        spdlog::warn("snapshot: {}: {}", candidate.repo.url, e.what());
    } catch (const std::exception& e) {
        out.dropped_reason = "error";
        spdlog::warn("snapshot: {}: {}", candidate.repo.url, e.what());
    }
    return out;
}

CrawlResult run_crawl(const CrawlConfig& cfg, GithubApi& api) {
    cfg.validate();
    CrawlResult res;
    std::vector<ServerCandidate> all;
    for (Source s : cfg.sources) {
        auto& st = res.per_source[to_string(s)];
        try {
            auto got = discover(s, cfg, api, &st);
            all.insert(all.end(), std::make_move_iterator(got.begin()), std::make_move_iterator(got.end()));
        } catch (const std::exception& e) {
            spdlog::error("discover {}: {}", to_string(s), e.what());
        }
        spdlog::info("discover {}: {} seen, {} kept, {} reported", to_string(s), st.seen, st.kept, st.reported_hits);
    }

    auto merged = merge_duplicates(all);
    enrich(merged, api);
    for (const auto& c : merged) {
        if (c.stars <= 0) res.dropped[c.repo.url] = "zero-stars";
    }
    res.candidates = dedup(merged);

    std::vector<SnapshotOutcome> outcomes(res.candidates.size());
    const auto n = static_cast<long>(res.candidates.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
        outcomes[static_cast<std::size_t>(i)] = snapshot(res.candidates[static_cast<std::size_t>(i)], cfg, api);
    }
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].doc) {
            res.docs.push_back(std::move(*outcomes[i].doc));
        } else {
            res.dropped[res.candidates[i].repo.url] = outcomes[i].dropped_reason;
            spdlog::info("snapshot: dropped {} ({})", res.candidates[i].repo.url, outcomes[i].dropped_reason);
        }
    }
    return res;
}

}  // namespace mcpscope::crawl
