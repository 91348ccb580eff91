#include "mcpscope/usage.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "mcpscope/common/errors.hpp"
#include "mcpscope/common/text.hpp"

namespace mcpscope::usage {

std::string to_string(Registry r) { return r == Registry::npm ? "npm" : "pypi"; }

Registry parse_registry(std::string_view s) {
    auto l = text::to_lower(s);
    if (l == "npm") return Registry::npm;
    if (l == "pypi") return Registry::pypi;
    throw std::invalid_argument(fmt::format("unknown registry '{}'", s));
}

std::string PackageRef::str() const { return to_string(registry) + ":" + name; }

namespace {

bool npm_part_ok(std::string_view s) {
    if (s.empty() || s.front() == '.' || s.front() == '_') return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '.' || c == '_' || c == '~';
    });
}

bool alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

}  // namespace

bool valid_name(const PackageRef& p) {
    const auto& n = p.name;
    if (n.empty()) return false;
    if (p.registry == Registry::npm) {
        if (n.size() > 214) return false;
        if (n.front() == '@') {
            auto slash = n.find('/');
            if (slash == std::string::npos || slash == 1) return false;
            return npm_part_ok(std::string_view(n).substr(1, slash - 1)) && npm_part_ok(std::string_view(n).substr(slash + 1));
        }
        return npm_part_ok(n);
    }
    if (!alnum(n.front()) || !alnum(n.back())) return false;
    return std::all_of(n.begin(), n.end(), [](char c) { return alnum(c) || c == '.' || c == '_' || c == '-'; });
}

std::string canonical_name(Registry r, std::string_view name) {
    if (r == Registry::npm) return std::string(name);
    std::string out;
    bool sep = false;
    for (char c : name) {
        if (c == '-' || c == '_' || c == '.') {
            sep = true;
            continue;
        }
        if (sep && !out.empty()) out += '-';
        sep = false;
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

// ---- install command harvesting ----

namespace {

struct Token {
    std::string text;
    int line = 0;
};

/// Code regions: fenced blocks and inline backtick spans.
std::vector<std::string> code_regions(std::string_view doc) {
    std::vector<std::string> out;
    std::string block;
    bool fenced = false;
    std::string fence;
    for (const auto& raw : text::split_lines(doc)) {
        auto t = text::trim(raw);
        if (!fenced && (t.starts_with("```") || t.starts_with("~~~"))) {
            fenced = true;
            fence = std::string(t.substr(0, 3));
            block.clear();
            continue;
        }
        if (fenced) {
            if (t.starts_with(fence)) {
                fenced = false;
                out.push_back(block);
            } else {
                block += raw;
                block += '\n';
            }
            continue;
        }
        std::string_view line = raw;
        for (;;) {
            auto a = line.find('`');
            if (a == std::string_view::npos) break;
            auto b = line.find('`', a + 1);
            if (b == std::string_view::npos) break;
            out.emplace_back(line.substr(a + 1, b - a - 1));
            line = line.substr(b + 1);
        }
    }
    if (fenced) out.push_back(block);
    return out;
}

std::string strip_token(std::string s) {
    auto is_punct = [](char c) {
        return c == '"' || c == '\'' || c == '`' || c == ',' || c == '[' || c == ']' || c == '(' || c == ')' ||
               c == '{' || c == '}' || c == ';';
    };
    while (!s.empty() && is_punct(s.front())) s.erase(s.begin());
    while (!s.empty() && is_punct(s.back())) s.pop_back();
    return s;
}

std::vector<Token> tokenize(const std::string& region) {
    std::vector<Token> out;
    int line = 0;
    for (const auto& l : text::split_lines(region)) {
        std::string cur;
        auto flush = [&] {
            if (!cur.empty()) {
                auto s = strip_token(cur);
                if (!s.empty()) out.push_back({s, line});
                cur.clear();
            }
        };
        for (char c : l) {
            if (c == ' ' || c == '\t') {
                flush();
            } else {
                cur += c;
            }
        }
        flush();
        ++line;
    }
    return out;
}

bool is_separator(const std::string& t) { return t == "&&" || t == "||" || t == "|" || t == ";" || t == "\\"; }
bool is_flag(const std::string& t) { return t.starts_with("-"); }
bool is_json_key(const std::string& t) { return t.ends_with(":"); }

bool looks_like_location(const std::string& t) {
    return t.starts_with(".") || t.starts_with("/") || t.starts_with("~") || t.starts_with("$") ||
           t.find("://") != std::string::npos || t.starts_with("git+") || t.starts_with("file:") ||
           t.ends_with(".tgz") || t.ends_with(".whl") || t.ends_with(".tar.gz") || t.ends_with(".txt") ||
           t.find('<') != std::string::npos || t.find('{') != std::string::npos;
}

std::optional<PackageRef> clean_npm(std::string t) {
    if (looks_like_location(t)) return std::nullopt;
    auto at = t.find('@', t.starts_with("@") ? 1 : 0);
    if (at != std::string::npos) t.resize(at);
    if (!t.starts_with("@") && t.find('/') != std::string::npos) return std::nullopt;  // owner/repo shorthand
    PackageRef p{Registry::npm, text::to_lower(t)};
    if (!valid_name(p) || p.name != t) return std::nullopt;
    return p;
}

std::optional<PackageRef> clean_pypi(std::string t) {
    if (looks_like_location(t)) return std::nullopt;
    auto cut = t.find_first_of("[=<>!~;@ ");
    if (cut != std::string::npos) t.resize(cut);
    PackageRef p{Registry::pypi, t};
    if (!valid_name(p)) return std::nullopt;
    p.name = canonical_name(Registry::pypi, t);
    return p;
}

/// Flags whose next token is their argument rather than a package.
bool takes_argument(const std::string& flag) {
    static const std::set<std::string> with_arg{"-r", "--requirement", "-c", "--constraint", "-e", "--editable",
                                                "-i", "--index-url", "--extra-index-url", "--python", "--with",
                                                "--prefix", "--target", "-t", "--registry", "--cache", "--python-version"};
    return with_arg.count(flag) > 0;
}

}  // namespace

std::vector<PackageRef> harvest_install_commands(std::string_view readme) {
    std::vector<PackageRef> out;
    auto push = [&](std::optional<PackageRef> p) {
        if (p && std::find(out.begin(), out.end(), *p) == out.end()) out.push_back(std::move(*p));
    };
    for (const auto& region : code_regions(readme)) {
        const auto toks = tokenize(region);
        const std::size_t n = toks.size();
        // Next package-like token after position i: skips flags (and their arguments)
        // and JSON keys, may cross two line breaks, stops at shell separators.
        auto next_arg = [&](std::size_t i, bool same_line, std::size_t& pos) -> std::optional<std::string> {
            const int line = toks[i].line;
            for (std::size_t j = i + 1; j < n; ++j) {
                const auto& t = toks[j].text;
                if (is_separator(t)) return std::nullopt;
                if (same_line ? toks[j].line != line : toks[j].line > line + 2) return std::nullopt;
                if (is_flag(t)) {
                    if (takes_argument(t)) ++j;
                    continue;
                }
                if (is_json_key(t)) continue;
                pos = j;
                return t;
            }
            return std::nullopt;
        };
        auto all_args = [&](std::size_t i, auto clean) {
            std::size_t pos = i;
            while (auto a = next_arg(pos, true, pos)) push(clean(*a));
        };
        for (std::size_t i = 0; i < n; ++i) {
            const auto t = text::to_lower(toks[i].text);
            auto nxt = [&](std::size_t k) { return i + k < n && toks[i + k].line == toks[i].line ? text::to_lower(toks[i + k].text) : std::string{}; };
            std::size_t pos = 0;
            if (t == "npx" || t == "bunx") {
                // npx -p <pkg> <cmd> names the package explicitly.
                if (nxt(1) == "-p" || nxt(1) == "--package") {
                    if (i + 2 < n) push(clean_npm(toks[i + 2].text));
                } else if (auto a = next_arg(i, false, pos)) {
                    push(clean_npm(*a));
                }
            } else if (t == "npm" && (nxt(1) == "install" || nxt(1) == "i" || nxt(1) == "add")) {
                all_args(i + 1, clean_npm);
            } else if ((t == "pip" || t == "pip3" || t == "pipx") && nxt(1) == "install") {
                if (i > 0 && text::to_lower(toks[i - 1].text) == "uv") {
                    all_args(i + 1, clean_pypi);  // uv pip install
                } else {
                    all_args(i + 1, clean_pypi);
                }
            } else if (t == "uv" && nxt(1) == "tool" && nxt(2) == "install") {
                if (auto a = next_arg(i + 2, true, pos)) push(clean_pypi(*a));
            } else if (t == "uvx") {
                if (nxt(1) == "--from") {
                    if (i + 2 < n) push(clean_pypi(toks[i + 2].text));
                } else if (auto a = next_arg(i, false, pos)) {
                    push(clean_pypi(*a));
                }
            }
        }
    }
    return out;
}

// ---- registry lookups ----

PackageIndex::PackageIndex(http::Client& client, UsageConfig cfg) : client_(client), cfg_(std::move(cfg)) {}

std::optional<Json> PackageIndex::metadata(const PackageRef& p) {
    std::string url = p.registry == Registry::npm ? fmt::format("{}/{}", cfg_.npm_registry, text::replace_all(p.name, "/", "%2F"))
                                                  : fmt::format("{}/{}/json", cfg_.pypi_json, p.name);
    auto resp = client_.get(url, {{"Accept", "application/json"}, {"User-Agent", "mcp-scope"}});
    if (resp.status == 404 || resp.status == 410) return std::nullopt;
    if (!resp.ok()) {
        throw RemoteError(fmt::format("{} lookup failed with status {}", p.str(), resp.status), resp.status,
                          resp.status == 0 || resp.status >= 500);
    }
    auto j = Json::parse(resp.body, nullptr, false);
    if (j.is_discarded()) throw RemoteError(fmt::format("{} lookup returned malformed JSON", p.str()), resp.status, false);
    return j;
}

namespace {

std::optional<RepoRef> code_host_repo(const std::string& url) {
    auto u = url;
    if (u.starts_with("git+")) u = u.substr(4);
    if (u.starts_with("github:")) u = "github.com/" + u.substr(7);
    if (u.find("github.com") == std::string::npos) return std::nullopt;
    try {
        return RepoRef::from_url(u);
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
}

}  // namespace

std::optional<RepoRef> PackageIndex::repository(const PackageRef& p) {
    auto meta = metadata(p);
    if (!meta) return std::nullopt;
    std::vector<std::string> urls;
    if (p.registry == Registry::npm) {
        if (meta->contains("repository")) {
            const auto& r = (*meta)["repository"];
            if (r.is_string()) urls.push_back(r.get<std::string>());
            if (r.is_object() && r.contains("url") && r["url"].is_string()) urls.push_back(r["url"].get<std::string>());
        }
        if (meta->contains("homepage") && (*meta)["homepage"].is_string()) urls.push_back((*meta)["homepage"].get<std::string>());
    } else if (meta->contains("info") && (*meta)["info"].is_object()) {
        const auto& info = (*meta)["info"];
        if (info.contains("project_urls") && info["project_urls"].is_object()) {
            std::vector<std::pair<std::string, std::string>> sorted;
            const auto& urls_obj = info["project_urls"];
            for (auto it = urls_obj.begin(); it != urls_obj.end(); ++it) {
                if (it.value().is_string()) sorted.emplace_back(it.key(), it.value().get<std::string>());
            }
            std::sort(sorted.begin(), sorted.end());
            for (auto& [_, v] : sorted) urls.push_back(v);
        }
        if (info.contains("home_page") && info["home_page"].is_string()) urls.push_back(info["home_page"].get<std::string>());
    }
    for (const auto& u : urls) {
        if (auto r = code_host_repo(u)) return r;
    }
    return std::nullopt;
}

PackageIgnore PackageIgnore::load(const fs::path& asset_root) {
    auto j = read_json(asset_root / "lexicons" / "packages.json");
    PackageIgnore ig;
    for (const auto& s : j.at("ignore_npm")) ig.npm.insert(s.get<std::string>());
    for (const auto& s : j.at("ignore_pypi")) ig.pypi.insert(canonical_name(Registry::pypi, s.get<std::string>()));
    return ig;
}

bool PackageIgnore::contains(const PackageRef& p) const {
    return p.registry == Registry::npm ? npm.count(p.name) > 0 : pypi.count(canonical_name(Registry::pypi, p.name)) > 0;
}

std::set<PackageRef> match_packages(const ServerRecord& server, PackageIndex& index, const PackageIgnore& ignore) {
    std::set<PackageRef> out;
    for (const auto& p : harvest_install_commands(server.readme_text)) {
        if (ignore.contains(p)) continue;
        if (index.metadata(p)) out.insert(p);
    }
    for (Registry r : {Registry::npm, Registry::pypi}) {
        PackageRef p{r, r == Registry::npm ? text::to_lower(server.repo.name) : canonical_name(r, server.repo.name)};
        if (!valid_name(p) || ignore.contains(p) || out.count(p)) continue;
        auto repo = index.repository(p);
        if (repo && repo->url == server.repo.url) out.insert(p);
    }
    return out;
}

UsageJoin build_join(const std::vector<ServerRecord>& servers, PackageIndex& index, const PackageIgnore& ignore) {
    UsageJoin j;
    for (const auto& s : servers) {
        std::set<PackageRef> pkgs;
        try {
            pkgs = match_packages(s, index, ignore);
        } catch (const RemoteError& e) {
            spdlog::warn("usage: package matching for {} incomplete: {}", s.repo.url, e.what());
        }
        std::set<PackageRef> kept;
        for (const auto& p : pkgs) {
            auto [it, fresh] = j.owner.try_emplace(p, s.id);
            if (fresh) {
                kept.insert(p);
            } else {
                j.conflicts.push_back(fmt::format("{} claimed by {}, kept {}", p.str(), s.id, it->second));
                spdlog::warn("usage: {}", j.conflicts.back());
            }
        }
        if (!kept.empty()) {
            ++j.matched_servers;
            j.matched_tools += s.extraction.tools.size();
            j.by_server[s.id] = std::move(kept);
        }
    }
    return j;
}

// ---- downloads ----

namespace {

fs::path cache_path(const PackageRef& p, const UsageConfig& cfg) {
    return cfg.cache_dir / to_string(p.registry) / http::url_encode(p.name) /
           fmt::format("{}_{}_{}.json", cfg.first.str(), cfg.last.str(), format_date(cfg.fetch_date));
}

}  // namespace

DownloadSeries parse_downloads(const PackageRef& p, Registry shape, const std::string& body, int status,
                               const UsageConfig& cfg) {
    DownloadSeries s;
    s.package = p;
    for (auto m = cfg.first; m <= cfg.last; m = m.plus(1)) s.monthly[m] = 0;
    if (status == 404) {
        s.unknown = true;
        return s;
    }
    auto j = Json::parse(body, nullptr, false);
    if (status < 200 || status >= 300 || j.is_discarded() || !j.is_object()) {
        throw RemoteError(fmt::format("downloads for {}: status {}", p.str(), status), status, status == 0 || status >= 500);
    }
    std::set<YearMonth> covered;
    auto add = [&](const std::string& day, std::int64_t n) {
        if (n < 0) throw RemoteError(fmt::format("negative download count for {}", p.str()), status, false);
        auto m = YearMonth::of(parse_date(day));
        if (m < cfg.first || m > cfg.last) return;
        s.monthly[m] += n;
        covered.insert(m);
    };
    if (shape == Registry::npm) {
        if (j.contains("downloads") && j["downloads"].is_array()) {
            for (const auto& d : j["downloads"]) add(d.at("day").get<std::string>(), d.at("downloads").get<std::int64_t>());
        }
        // The npm range response names the span it answered for.
        if (j.contains("start") && j.contains("end")) {
            auto a = YearMonth::of(parse_date(j["start"].get<std::string>()));
            auto b = YearMonth::of(parse_date(j["end"].get<std::string>()));
            for (auto m = a; m <= b; m = m.plus(1)) covered.insert(m);
        }
    } else {
        const auto& data = j.contains("data") && j["data"].is_array() ? j["data"] : Json::array();
        bool any_without = std::any_of(data.begin(), data.end(),
                                       [](const Json& d) { return d.value("category", "") == "without_mirrors"; });
        std::optional<YearMonth> earliest;
        for (const auto& d : data) {
            if (any_without && d.value("category", "") != "without_mirrors") continue;
            add(d.at("date").get<std::string>(), d.at("downloads").get<std::int64_t>());
        }
        if (!covered.empty()) earliest = *covered.begin();
        if (earliest) {
            for (auto m = *earliest; m <= cfg.last; m = m.plus(1)) covered.insert(m);
        }
    }
    for (const auto& [m, _] : s.monthly) {
        if (!covered.count(m)) s.missing.push_back(m);
    }
    return s;
}

DownloadSeries fetch_downloads(const PackageRef& p, const UsageConfig& cfg, http::Client& client) {
    const auto path = cache_path(p, cfg);
    int status = 0;
    std::string body;
    if (fs::exists(path)) {
        auto cached = read_json(path);
        status = cached.at("status").get<int>();
        body = cached.at("body").get<std::string>();
    } else {
        std::string url;
        if (p.registry == Registry::npm) {
            url = fmt::format("{}/{}:{}/{}", cfg.npm_downloads, format_date(cfg.first.first_day()),
                              format_date(cfg.last.last_day()), p.name);
        } else {
            url = fmt::format("{}/{}/overall?mirrors=false", cfg.pypi_stats, canonical_name(Registry::pypi, p.name));
        }
        auto resp = client.get(url, {{"Accept", "application/json"}, {"User-Agent", "mcp-scope"}});
        status = resp.status;
        body = resp.body;
        if (resp.ok() || resp.status == 404) write_json(path, {{"status", status}, {"body", body}, {"url", url}});
    }
    return parse_downloads(p, p.registry, body, status, cfg);
}

std::vector<std::pair<PackageRef, YearMonth>> GeoDownloads::violations(const std::vector<DownloadSeries>& totals) const {
    std::vector<std::pair<PackageRef, YearMonth>> out;
    for (const auto& s : totals) {
        auto it = cells.find(s.package);
        if (it == cells.end()) continue;
        for (const auto& [m, countries] : it->second) {
            std::int64_t sum = 0;
            for (const auto& [_, n] : countries) sum += n;
            auto t = s.monthly.find(m);
            bool known = t != s.monthly.end() && std::find(s.missing.begin(), s.missing.end(), m) == s.missing.end();
            if (known && sum > t->second) out.emplace_back(s.package, m);
        }
    }
    return out;
}

GeoDownloads load_geo_file(const fs::path& path) {
    auto t = read_csv(path);
    const auto cp = t.column("package"), cm = t.column("month"), cc = t.column("country"), cd = t.column("downloads");
    const bool has_reg = t.has_column("registry");
    GeoDownloads g;
    for (const auto& row : t.rows) {
        Registry r = has_reg ? parse_registry(row[t.column("registry")]) : Registry::pypi;
        PackageRef p{r, canonical_name(r, row[cp])};
        auto n = std::stoll(row[cd]);
        if (n < 0) throw std::invalid_argument("negative downloads in geo file");
        g.cells[p][YearMonth::parse(row[cm])][row[cc]] += n;
    }
    return g;
}

// ---- aggregation ----

std::map<std::string, std::map<YearMonth, std::int64_t>> server_series(const UsageJoin& join,
                                                                     const std::vector<DownloadSeries>& series,
                                                                     std::optional<Registry> only) {
    std::map<PackageRef, const DownloadSeries*> by_pkg;
    for (const auto& s : series) by_pkg[s.package] = &s;
    std::map<std::string, std::map<YearMonth, std::int64_t>> out;
    for (const auto& [server, pkgs] : join.by_server) {
        auto& acc = out[server];
        for (const auto& p : pkgs) {
            if (only && p.registry != *only) continue;
            auto it = by_pkg.find(p);
            if (it == by_pkg.end()) continue;
            for (const auto& [m, n] : it->second->monthly) acc[m] += n;
        }
    }
    return out;
}

namespace {

using Key = std::tuple<YearMonth, std::string, std::string>;

struct Acc {
    std::map<Key, std::pair<double, double>> cells;  // (server_downloads, tool_uses)
    void add(YearMonth m, const std::string& dim, const std::string& cat, double sd, double tu) {
        auto& c = cells[{m, dim, cat}];
        c.first += sd;
        c.second += tu;
    }
};

std::string impact_cat(const DirectImpact& d) { return d.classified() ? to_string(d.category()) : kUnclassified; }

}  // namespace

UsageTables aggregate_usage(const std::vector<ServerRecord>& servers,
                            const std::vector<ServerClassification>& classifications,
                            const std::vector<AiVerdict>& verdicts, const UsageJoin& join,
                            const std::vector<DownloadSeries>& series) {
    std::map<std::string, const ServerClassification*> cls;
    for (const auto& c : classifications) cls[c.server_id] = &c;
    std::map<std::string, const AiVerdict*> ai;
    for (const auto& v : verdicts) ai[v.server_id] = &v;
    const auto per_server = server_series(join, series);

    Acc acc;
    UsageTables t;
    for (const auto& s : servers) {
        auto ps = per_server.find(s.id);
        if (ps == per_server.end()) continue;
        const ServerClassification* c = cls.count(s.id) ? cls[s.id] : nullptr;
        std::vector<ToolClassification> tools;
        if (c) {
            tools = c->tools;
        } else {
            for (const auto& tr : s.extraction.tools) tools.push_back(ToolClassification{tr.name, {}, {}, "none"});
        }
        const double n = static_cast<double>(tools.size());
        if (tools.empty()) continue;
        std::optional<YearMonth> ai_from;
        if (auto v = ai.find(s.id); v != ai.end() && v->second->ai_authored) {
            ai_from = v->second->date_first_ai_evidence ? YearMonth::of(*v->second->date_first_ai_evidence) : YearMonth{0, 1};
        }
        double server_total = 0;
        for (const auto& [m, count] : ps->second) {
            const double D = static_cast<double>(count);
            server_total += D;
            t.total_downloads[m] += D;
            t.total_tool_uses[m] += D * n;
            acc.add(m, "total", "all", D, D * n);
            if (D == 0) continue;  // zero rows carry nothing

            for (const auto& tool : tools) {
                const double sd = D / n;
                acc.add(m, "direct_impact", impact_cat(tool.direct_impact), sd, D);
                if (s.is_official) acc.add(m, "official_direct_impact", impact_cat(tool.direct_impact), sd, D);
                acc.add(m, "functionality", tool.direct_impact.label(), sd, D);
                acc.add(m, "domain", tool.task.l1_id.empty() ? kUnclassified : tool.task.l1_id, sd, D);
                acc.add(m, "stakes", tool.task.stakes_bucket ? to_string(*tool.task.stakes_bucket) : kUnclassified, sd, D);
                if (tool.task.soc_distribution.empty()) {
                    acc.add(m, "soc", kUnclassified, sd, D);
                } else {
                    for (const auto& [g, w] : tool.task.soc_distribution) acc.add(m, "soc", g, sd * w, D * w);
                }
                if (tool.direct_impact.classified() && tool.direct_impact.category() == ImpactCategory::action) {
                    acc.add(m, "action_space", "action", sd, D);
                    if (c && c->generality.environment_general) acc.add(m, "action_space", "general_purpose_action", sd, D);
                    if (tool.task.stakes_bucket == StakesBucket::medium) acc.add(m, "action_space", "medium_stakes_action", sd, D);
                    if (tool.task.stakes_bucket == StakesBucket::high) acc.add(m, "action_space", "high_stakes_action", sd, D);
                }
            }
            const double tu = D * n;
            if (c) {
                acc.add(m, "generality", c->generality.environment_general ? "general_purpose" : "narrow_purpose", D, tu);
                acc.add(m, "industry_generality", c->generality.industry_general ? "general" : "specific", D, tu);
                acc.add(m, "server_direct_impact", c->direct_impact ? to_string(*c->direct_impact) : kUnclassified, D, tu);
                acc.add(m, "server_domain", c->domain.empty() ? kUnclassified : c->domain, D, tu);
                acc.add(m, "server_soc", c->soc.empty() ? kUnclassified : c->soc, D, tu);
                acc.add(m, "payments", std::to_string(c->payments.autonomy), D, tu);
            } else {
                for (const char* dim : {"generality", "industry_generality", "server_direct_impact", "server_domain",
                                        "server_soc", "payments"}) {
                    acc.add(m, dim, kUnclassified, D, tu);
                }
            }
            acc.add(m, "ai_coauthored", ai_from && m >= *ai_from ? "ai" : "not_detected", D, tu);
            acc.add(m, "official", s.is_official ? "official" : "community", D, tu);
        }
        t.server_totals[s.id] = server_total;
    }
    for (const auto& [k, v] : acc.cells) {
        t.rows.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), v.first, v.second});
    }
    return t;
}

std::map<std::string, double> shares(const UsageTables& t, YearMonth month, const std::string& dimension, bool tool_level) {
    std::map<std::string, double> mass;
    double denom = 0;
    for (const auto& r : t.rows) {
        if (r.month != month || r.dimension != dimension || r.category == kUnclassified) continue;
        mass[r.category] += tool_level ? r.tool_uses : r.server_downloads;
    }
    if (dimension == "action_space") {
        // Overlapping categories: measured against all classified tool uses.
        for (const auto& r : t.rows) {
            if (r.month == month && r.dimension == "direct_impact" && r.category != kUnclassified) {
                denom += tool_level ? r.tool_uses : r.server_downloads;
            }
        }
    } else {
        for (const auto& [_, v] : mass) denom += v;
    }
    std::map<std::string, double> out;
    for (const auto& [k, v] : mass) out[k] = denom > 0 ? v / denom : 0.0;
    return out;
}

std::string usage_csv(const UsageTables& t) {
    Table out;
    out.header = {"month", "dimension", "category", "server_downloads", "tool_uses", "server_download_share", "tool_use_share"};
    std::map<std::pair<YearMonth, std::string>, std::pair<std::map<std::string, double>, std::map<std::string, double>>> memo;
    for (const auto& r : t.rows) {
        auto key = std::make_pair(r.month, r.dimension);
        if (!memo.count(key)) memo[key] = {shares(t, r.month, r.dimension, false), shares(t, r.month, r.dimension, true)};
        const auto& [sd, tu] = memo[key];
        auto share = [&](const std::map<std::string, double>& m) {
            auto it = m.find(r.category);
            return it == m.end() ? std::string{} : fmt_num(it->second);
        };
        out.rows.push_back({r.month.str(), r.dimension, r.category, fmt_num(r.server_downloads), fmt_num(r.tool_uses),
                            r.dimension == "total" ? "" : share(sd), r.dimension == "total" ? "" : share(tu)});
    }
    return format_csv(out);
}

UsageTables read_usage_csv(const fs::path& path) {
    auto tab = read_csv(path);
    UsageTables t;
    const auto cm = tab.column("month"), cd = tab.column("dimension"), cc = tab.column("category"),
               cs = tab.column("server_downloads"), ct = tab.column("tool_uses");
    for (const auto& row : tab.rows) {
        UsageRow r{YearMonth::parse(row[cm]), row[cd], row[cc], std::stod(row[cs]), std::stod(row[ct])};
        if (r.dimension == "total") {
            t.total_downloads[r.month] += r.server_downloads;
            t.total_tool_uses[r.month] += r.tool_uses;
        }
        t.rows.push_back(std::move(r));
    }
    return t;
}

// ---- concentration ----

Concentration concentration(std::vector<double> downloads, const std::vector<double>& ps) {
    if (downloads.empty()) throw std::invalid_argument("concentration of an empty list");
    Concentration c;
    std::sort(downloads.begin(), downloads.end(), std::greater<>());
    c.ranked = downloads;
    const double total = std::accumulate(downloads.begin(), downloads.end(), 0.0);
    c.undefined = total <= 0;
    double run = 0;
    for (double d : downloads) {
        run += d;
        c.cumulative.push_back(c.undefined ? 0.0 : run / total);
    }
    if (!c.undefined) c.cumulative.back() = 1.0;
    for (double p : ps) {
        if (p <= 0 || p > 1) throw std::invalid_argument("concentration share p must be in (0,1]");
        auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(downloads.size()) - 1e-9));
        k = std::clamp<std::size_t>(k, 1, downloads.size());
        c.top[p] = {k, c.undefined ? std::nan("") : c.cumulative[k - 1]};
    }
    return c;
}

// ---- geography ----

std::string to_string(Breadth b) {
    switch (b) {
        case Breadth::one_country: return "one_country";
        case Breadth::one_continent: return "one_continent";
        case Breadth::worldwide: return "worldwide";
    }
    return "?";
}

const std::map<std::string, std::string>& continents() {
    static const std::map<std::string, std::string> m = [] {
        std::map<std::string, std::string> out;
        const auto doc = read_json(asset_dir() / "continents.json");
        for (auto it = doc.begin(); it != doc.end(); ++it) out[it.key()] = it.value().get<std::string>();
        return out;
    }();
    return m;
}

GeoBreadth geo_breadth(const std::map<std::string, double>& by_country) {
    double total = 0;
    for (const auto& [_, v] : by_country) {
        if (v < 0) throw std::invalid_argument("negative country downloads");
        total += v;
    }
    if (total <= 0) throw std::invalid_argument("geo_breadth needs a positive total");
    GeoBreadth g;
    std::map<std::string, double> by_continent;
    const auto& cmap = continents();
    for (const auto& [country, v] : by_country) {
        const double share = v / total;
        g.country_shares[country] = share;
        auto it = cmap.find(country);
        const std::string cont = it == cmap.end() ? "Unknown" : it->second;
        by_continent[cont] += share;
        if (share > g.top_country_share) {
            g.top_country_share = share;
            g.top_country = country;
        }
    }
    for (const auto& [cont, share] : by_continent) {
        if (share > g.top_continent_share) {
            g.top_continent_share = share;
            g.top_continent = cont;
        }
    }
    if (g.top_country_share > 0.80) {
        g.breadth = Breadth::one_country;
    } else if (g.top_continent_share < 0.70) {
        g.breadth = Breadth::worldwide;
    } else {
        g.breadth = Breadth::one_continent;
    }
    return g;
}

}  // namespace mcpscope::usage
