#include "mcpscope/ai_authorship.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "mcpscope/common/errors.hpp"
#include "mcpscope/common/text.hpp"

namespace mcpscope::ai {

namespace {

std::vector<std::string> lower_all(std::vector<std::string> v) {
    for (auto& s : v) s = text::to_lower(s);
    return v;
}

}  // namespace

std::optional<std::string> ConfigPattern::match(const std::string& path) const {
    const auto lower = text::to_lower(path);
    const auto parts = text::split(lower, '/');
    switch (kind) {
        case Kind::path:
            if (lower == pattern) return path;
            return std::nullopt;
        case Kind::file:
            if (!parts.empty() && parts.back() == pattern) return path;
            return std::nullopt;
        case Kind::dir: {
            // The entry for the directory itself and every path below it share one key.
            std::size_t offset = 0;
            for (const auto& part : parts) {
                offset += part.size();
                if (part == pattern) return path.substr(0, offset);
                offset += 1;
            }
            return std::nullopt;
        }
    }
    return std::nullopt;
}

PatternSet PatternSet::load(const fs::path& file) {
    const auto j = read_json(file);
    PatternSet p;
    p.agents = j.at("agents").get<std::vector<std::string>>();
    const std::set<std::string> known(p.agents.begin(), p.agents.end());
    auto need = [&](const std::string& agent, const char* where) {
        if (!known.count(agent)) throw ConfigError(fmt::format("ai_patterns: unknown agent '{}' in {}", agent, where));
    };
    for (auto& [alias, agent] : j.at("aliases").items()) {
        need(agent.get<std::string>(), "aliases");
        p.aliases[text::to_lower(alias)] = agent.get<std::string>();
    }
    for (auto& [agent, words] : j.at("coauthor").items()) {
        need(agent, "coauthor");
        p.coauthor[agent] = lower_all(words.get<std::vector<std::string>>());
    }
    for (const auto& c : j.at("config_files")) {
        ConfigPattern cp;
        const auto kind = c.at("kind").get<std::string>();
        cp.kind = kind == "dir" ? ConfigPattern::Kind::dir : kind == "path" ? ConfigPattern::Kind::path
                                                                           : ConfigPattern::Kind::file;
        if (kind != "dir" && kind != "path" && kind != "file") throw ConfigError("ai_patterns: bad config kind " + kind);
        cp.pattern = text::to_lower(c.at("pattern").get<std::string>());
        cp.agent = c.at("agent").get<std::string>();
        need(cp.agent, "config_files");
        p.config_files.push_back(std::move(cp));
    }
    for (auto& [login, agent] : j.at("bots").items()) {
        need(agent.get<std::string>(), "bots");
        p.bots[text::to_lower(login)] = agent.get<std::string>();
    }
    p.dependency_bots = lower_all(j.at("dependency_bots").get<std::vector<std::string>>());
    for (const auto& d : p.dependency_bots) {
        if (p.bots.count(d)) throw ConfigError("ai_patterns: '" + d + "' is listed as both AI and dependency bot");
    }
    for (auto& [agent, phrases] : j.at("mentions").items()) {
        need(agent, "mentions");
        p.mentions[agent] = lower_all(phrases.get<std::vector<std::string>>());
    }
    p.mention_exclusions = lower_all(j.at("mention_exclusions").get<std::vector<std::string>>());
    return p;
}

std::string PatternSet::canonical(const std::string& name) const {
    auto it = aliases.find(text::to_lower(name));
    if (it != aliases.end()) return it->second;
    for (const auto& a : agents) {
        if (text::to_lower(a) == text::to_lower(name)) return a;
    }
    return name;
}

bool PatternSet::is_dependency_bot(const std::string& login) const {
    const auto l = text::to_lower(login);
    return std::find(dependency_bots.begin(), dependency_bots.end(), l) != dependency_bots.end();
}

std::vector<std::string> coauthor_trailers(std::string_view message) {
    std::vector<std::string> out;
    constexpr std::string_view key = "co-authored-by:";
    for (const auto& line : text::split_lines(message)) {
        auto t = text::trim(line);
        if (text::starts_with_ci(t, key)) out.emplace_back(text::trim(t.substr(key.size())));
    }
    return out;
}

namespace {

bool handle_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
}

bool has_handle(const std::string& lower, const std::string& handle) {
    for (auto pos = lower.find(handle); pos != std::string::npos; pos = lower.find(handle, pos + 1)) {
        const bool left_ok = pos == 0 || !(std::isalnum(static_cast<unsigned char>(lower[pos - 1])) || lower[pos - 1] == '.');
        const auto end = pos + handle.size();
        const bool right_ok = end >= lower.size() || !handle_char(lower[end]);
        if (left_ok && right_ok) return true;
    }
    return false;
}

std::string without_trailers(std::string_view s) {
    std::string out;
    for (const auto& line : text::split_lines(s)) {
        if (text::starts_with_ci(text::trim(line), "co-authored-by:")) continue;
        out += line;
        out += '\n';
    }
    return out;
}

std::optional<std::string> coauthor_agent(const std::string& trailer, const PatternSet& p) {
    const auto norm = text::word_normal_form(trailer);
    for (const auto& [agent, words] : p.coauthor) {
        for (const auto& w : words) {
            if (text::contains_word_normalized(norm, w)) return agent;
        }
    }
    return std::nullopt;
}

std::optional<std::string> bot_agent(const std::string& login, const PatternSet& p) {
    if (login.empty() || p.is_dependency_bot(login)) return std::nullopt;
    auto it = p.bots.find(text::to_lower(login));
    if (it == p.bots.end()) return std::nullopt;
    return it->second;
}

std::string pr_location(int number) { return fmt::format("PR #{}", number); }

}  // namespace

std::vector<std::string> mentioned_agents(std::string_view raw, const PatternSet& p) {
    const auto body = without_trailers(raw);
    auto norm = text::word_normal_form(body);
    for (const auto& ex : p.mention_exclusions) {
        const auto ex_norm = text::word_normal_form(ex);
        norm = text::replace_all(std::move(norm), ex_norm, " ");
    }
    const auto lower = text::to_lower(body);
    std::vector<std::string> out;
    for (const auto& [agent, phrases] : p.mentions) {
        for (const auto& ph : phrases) {
            const bool hit = ph.starts_with("@") ? has_handle(lower, ph) : text::contains_word_normalized(norm, ph);
            if (hit) {
                out.push_back(agent);
                break;
            }
        }
    }
    return out;
}

std::vector<AiEvidence> scan_evidence(const RepoActivity& a, const PatternSet& p) {
    std::vector<AiEvidence> ev;
    auto add = [&](int criterion, std::string tool, std::optional<Timestamp> date, std::string where) {
        AiEvidence e;
        e.criterion = criterion;
        e.tool = p.canonical(tool);
        e.date = date;
        e.location = std::move(where);
        ev.push_back(std::move(e));
    };

    for (const auto& c : a.commits) {
        if (p.is_dependency_bot(c.author_login)) continue;
        for (const auto& t : coauthor_trailers(c.message)) {
            if (auto agent = coauthor_agent(t, p)) add(coauthor, *agent, c.date, c.sha);
        }
        if (auto agent = bot_agent(c.author_login, p)) add(bot, *agent, c.date, c.sha);
        for (const auto& agent : mentioned_agents(c.message, p)) add(mention, agent, c.date, c.sha);
    }
    for (const auto& pr : a.pulls) {
        if (p.is_dependency_bot(pr.author_login)) continue;
        for (const auto& t : coauthor_trailers(pr.body)) {
            if (auto agent = coauthor_agent(t, p)) add(coauthor, *agent, pr.date, pr_location(pr.number));
        }
        if (auto agent = bot_agent(pr.author_login, p)) add(bot, *agent, pr.date, pr_location(pr.number));
        for (const auto& agent : mentioned_agents(pr.title + "\n" + pr.body, p)) {
            add(mention, agent, pr.date, pr_location(pr.number));
        }
    }

    struct Hit {
        std::string agent;
        bool first_month = false;
    };
    std::map<std::string, Hit> hits;  // match path -> hit
    auto scan_tree = [&](const std::vector<std::string>& tree, bool first_month) {
        for (const auto& path : tree) {
            for (const auto& cp : p.config_files) {
                auto key = cp.match(path);
                if (!key) continue;
                auto [it, fresh] = hits.try_emplace(*key, Hit{cp.agent, false});
                if (first_month) it->second.first_month = true;
            }
        }
    };
    scan_tree(a.tree, false);
    if (a.first_month_tree) scan_tree(*a.first_month_tree, true);
    for (const auto& [key, hit] : hits) {
        std::optional<Timestamp> date;
        if (auto it = a.introduced.find(key); it != a.introduced.end()) date = it->second;
        add(config, hit.agent, date, key);
        ev.back().in_first_month_tree = hit.first_month;
    }

    std::stable_sort(ev.begin(), ev.end(), [](const AiEvidence& x, const AiEvidence& y) {
        return std::tie(x.criterion, x.location, x.tool) < std::tie(y.criterion, y.location, y.tool);
    });
    return ev;
}

std::pair<std::optional<std::string>, std::map<std::string, AgentScore>>
identify_agent(const std::vector<AiEvidence>& evidence) {
    std::map<std::string, AgentScore> scores;
    for (const auto& e : evidence) {
        auto& s = scores[e.tool];
        switch (e.criterion) {
            case coauthor: ++s.coauthor; break;
            case config: ++s.config; break;
            case bot: ++s.bot; break;
            case mention: ++s.mention; break;
            default: throw std::invalid_argument(fmt::format("evidence criterion {} out of range", e.criterion));
        }
    }
    if (scores.empty()) return {std::nullopt, scores};
    // Map order is alphabetical, so strict comparison keeps the earliest name on a full tie.
    auto key = [](const AgentScore& s) {
        return std::make_tuple(s.total(), s.config > 0, s.bot > 0, s.coauthor > 0, s.mention > 0);
    };
    const std::string* best = nullptr;
    const AgentScore* best_s = nullptr;
    for (const auto& [agent, s] : scores) {
        if (!best || key(s) > key(*best_s)) {
            best = &agent;
            best_s = &s;
        }
    }
    return {*best, scores};
}

std::vector<AiEvidence> first_month_evidence(const std::vector<AiEvidence>& evidence,
                                             std::optional<Timestamp> created_at) {
    std::vector<AiEvidence> out;
    if (!created_at) return out;
    const auto limit = *created_at + kFirstMonth;
    for (const auto& e : evidence) {
        const bool inside = e.criterion == config ? e.in_first_month_tree : (e.date && *e.date <= limit);
        if (inside) out.push_back(e);
    }
    return out;
}

AiVerdict verdict(const std::vector<AiEvidence>& evidence, std::optional<Timestamp> created_at) {
    AiVerdict v;
    v.evidence = evidence;
    v.ai_authored = !evidence.empty();
    auto [agent, scores] = identify_agent(evidence);
    v.agent = agent;
    v.score_breakdown = std::move(scores);
    for (const auto& e : evidence) {
        if (e.date && (!v.date_first_ai_evidence || *e.date < *v.date_first_ai_evidence)) {
            v.date_first_ai_evidence = e.date;
        }
    }
    if (created_at) {
        auto fm = first_month_evidence(evidence, created_at);
        v.first_month = !fm.empty();
        v.first_month_agent = identify_agent(fm).first;
    }
    return v;
}

namespace {

std::optional<Timestamp> json_time(const Json& j, std::initializer_list<const char*> path) {
    const Json* cur = &j;
    for (const char* k : path) {
        if (!cur->is_object() || !cur->contains(k) || (*cur)[k].is_null()) return std::nullopt;
        cur = &(*cur)[k];
    }
    return cur->is_string() ? try_parse_timestamp(cur->get<std::string>()) : std::nullopt;
}

std::string json_str(const Json& j, std::initializer_list<const char*> path) {
    const Json* cur = &j;
    for (const char* k : path) {
        if (!cur->is_object() || !cur->contains(k) || (*cur)[k].is_null()) return {};
        cur = &(*cur)[k];
    }
    return cur->is_string() ? cur->get<std::string>() : std::string{};
}

std::vector<std::string> tree_paths(const Json& j) {
    std::vector<std::string> out;
    if (j.contains("tree") && j["tree"].is_array()) {
        for (const auto& e : j["tree"]) out.push_back(json_str(e, {"path"}));
    }
    if (j.value("truncated", false)) spdlog::warn("tree listing truncated");
    return out;
}

}  // namespace

RepoActivity load_activity(const RepoRef& repo, std::optional<Timestamp> created_at, GithubApi& api,
                           const PatternSet& p) {
    RepoActivity a;
    a.repo = repo;
    a.created_at = created_at;
    const auto prefix = fmt::format("/repos/{}/{}", repo.owner, repo.name);
    auto attempt = [&](const char* what, auto&& fn) {
        try {
            fn();
            a.coverage[what] = true;
        } catch (const std::exception& e) {
            a.coverage[what] = false;
            spdlog::warn("detect-ai: {} for {}: {}", what, repo.url, e.what());
        }
    };
    attempt("commits", [&] {
        auto rows = api.list(api.base() + prefix + "/commits", static_cast<int>(kMaxCommits / 100), 100);
        if (rows.size() > kMaxCommits) rows.resize(kMaxCommits);
        for (const auto& r : rows) {
            a.commits.push_back({json_str(r, {"sha"}), json_str(r, {"author", "login"}), json_str(r, {"commit", "message"}),
                                 json_time(r, {"commit", "author", "date"})});
        }
    });
    attempt("pulls", [&] {
        auto rows = api.get_json(fmt::format("{}/pulls?state=all&sort=created&direction=desc&per_page={}", prefix, kMaxPulls));
        for (const auto& r : rows) {
            if (a.pulls.size() >= kMaxPulls) break;
            a.pulls.push_back({r.value("number", 0), json_str(r, {"user", "login"}), json_str(r, {"title"}),
                               json_str(r, {"body"}), json_time(r, {"created_at"})});
        }
    });
    attempt("tree", [&] { a.tree = tree_paths(api.get_json(prefix + "/git/trees/HEAD?recursive=1")); });
    if (created_at) {
        attempt("first_month_tree", [&] {
            auto sha = api.commit_before(repo, *created_at + kFirstMonth);
            a.first_month_tree = sha ? tree_paths(api.get_json(fmt::format("{}/git/trees/{}?recursive=1", prefix, *sha)))
                                     : std::vector<std::string>{};
        });
    }
    std::set<std::string> keys;
    auto collect = [&](const std::vector<std::string>& tree) {
        for (const auto& path : tree) {
            for (const auto& cp : p.config_files) {
                if (auto k = cp.match(path)) keys.insert(*k);
            }
        }
    };
    collect(a.tree);
    if (a.first_month_tree) collect(*a.first_month_tree);
    if (!keys.empty()) {
        attempt("introductions", [&] {
            for (const auto& k : keys) {
                auto rows = api.list(api.base() + prefix + "/commits?path=" + http::url_encode(k), 100, 100);
                for (const auto& r : rows) {
                    auto t = json_time(r, {"commit", "author", "date"});
                    if (t && (!a.introduced.count(k) || *t < a.introduced[k])) a.introduced[k] = *t;
                }
            }
        });
    }
    return a;
}

std::vector<AiVerdict> detect_all(const std::vector<ServerRecord>& servers, GithubApi& api, const PatternSet& p) {
    std::vector<AiVerdict> out(servers.size());
    const auto n = static_cast<long>(servers.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
        const auto& s = servers[static_cast<std::size_t>(i)];
        AiVerdict v;
        try {
            auto activity = load_activity(s.repo, s.created_at, api, p);
            v = verdict(scan_evidence(activity, p), s.created_at);
            v.coverage = activity.coverage;
        } catch (const std::exception& e) {
            spdlog::error("detect-ai: {}: {}", s.repo.url, e.what());
            v.coverage = {{"commits", false}, {"pulls", false}, {"tree", false}};
        }
        v.server_id = s.id;
        v.repo_url = s.repo.url;
        out[static_cast<std::size_t>(i)] = std::move(v);
    }
    return out;
}

}  // namespace mcpscope::ai
