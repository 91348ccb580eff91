#include "mcpscope/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "mcpscope/ai_authorship.hpp"
#include "mcpscope/classify.hpp"
#include "mcpscope/common/errors.hpp"
#include "mcpscope/common/text.hpp"
#include "mcpscope/embedding.hpp"
#include "mcpscope/extract.hpp"
#include "mcpscope/github.hpp"
#include "mcpscope/report.hpp"
#include "mcpscope/taxonomy.hpp"

namespace mcpscope::pipeline {

// ---- stages ----

const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> s{Stage::crawl, Stage::extract, Stage::classify, Stage::detect_ai,
                                      Stage::usage, Stage::fit,     Stage::report};
    return s;
}

std::string to_string(Stage s) {
    switch (s) {
        case Stage::crawl: return "crawl";
        case Stage::extract: return "extract";
        case Stage::classify: return "classify";
        case Stage::detect_ai: return "detect-ai";
        case Stage::usage: return "usage";
        case Stage::fit: return "fit";
        case Stage::report: return "report";
    }
    return "?";
}

Stage parse_stage(std::string_view name) {
    for (auto s : all_stages()) {
        if (to_string(s) == name) return s;
    }
    throw ConfigError(fmt::format("unknown stage '{}'", name));
}

std::vector<Stage> parse_stages(std::string_view list) {
    std::set<Stage> want;
    std::string item;
    std::stringstream ss{std::string(list)};
    while (std::getline(ss, item, ',')) {
        auto t = std::string(text::trim(item));
        if (t.empty()) continue;
        if (t == "all") {
            want.insert(all_stages().begin(), all_stages().end());
        } else {
            want.insert(parse_stage(t));
        }
    }
    if (want.empty()) throw ConfigError("no stages requested");
    std::vector<Stage> out;
    for (auto s : all_stages()) {
        if (want.count(s)) out.push_back(s);
    }
    return out;
}

const std::vector<Stage>& dependencies(Stage s) {
    static const std::map<Stage, std::vector<Stage>> d{
        {Stage::crawl, {}},
        {Stage::extract, {Stage::crawl}},
        {Stage::classify, {Stage::extract}},
        {Stage::detect_ai, {Stage::extract}},
        {Stage::usage, {Stage::extract, Stage::classify, Stage::detect_ai}},
        {Stage::fit, {Stage::extract, Stage::classify, Stage::detect_ai, Stage::usage}},
        {Stage::report, {Stage::extract, Stage::classify, Stage::detect_ai, Stage::usage, Stage::fit}},
    };
    return d.at(s);
}

namespace {

std::vector<std::string> report_artifacts() {
    std::vector<std::string> out;
    const std::map<report::Kind, std::vector<std::string>> csv{
        {report::Kind::domains, {"domains.csv"}},
        {report::Kind::direct_impact, {"direct_impact.csv", "direct_impact_trend.csv"}},
        {report::Kind::generality, {"generality.csv"}},
        {report::Kind::geography, {"geography.csv", "geography_breadth.csv"}},
        {report::Kind::ai_coauthor, {"ai_coauthor.csv", "ai_coauthor_agents.csv"}},
        {report::Kind::payments, {"payments.csv"}},
        {report::Kind::stakes, {"stakes.csv", "stakes_fit.csv"}},
        {report::Kind::concentration, {"concentration.csv", "concentration_summary.csv"}},
    };
    for (auto k : report::all_kinds()) {
        for (const auto& f : csv.at(k)) out.push_back("report/" + f);
        out.push_back("report/" + report::to_string(k) + ".svg");
    }
    return out;
}

}  // namespace

const std::vector<std::string>& artifacts(Stage s) {
    static const std::map<Stage, std::vector<std::string>> a{
        {Stage::crawl, {"candidates.jsonl", "docs.jsonl", "crawl_dropped.csv"}},
        {Stage::extract, {"servers.jsonl", "extract_rejected.csv"}},
        {Stage::classify, {"hierarchy.json", "classifications.jsonl", "occupation_links.csv"}},
        {Stage::detect_ai, {"ai_verdicts.jsonl"}},
        {Stage::usage,
         {"package_matches.csv", "downloads.csv", "usage_monthly.csv", "usage_geo.csv", "usage_geo_country.csv",
          "concentration.csv", "concentration_summary.csv"}},
        {Stage::fit, {"fits.json"}},
        {Stage::report, report_artifacts()},
    };
    return a.at(s);
}

// ---- config ----

namespace {

using boost::property_tree::ptree;

bool secret_like(const std::string& key) {
    auto last = key.substr(key.rfind('_') == std::string::npos ? 0 : key.rfind('_') + 1);
    static const std::set<std::string> words{"key", "apikey", "token", "secret", "password", "passwd"};
    return words.count(text::to_lower(last)) > 0 || words.count(text::to_lower(key)) > 0;
}

long long to_int(const std::string& where, const std::string& v) {
    try {
        std::size_t pos = 0;
        auto r = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("{}: '{}' is not an integer", where, v));
    }
}

double to_double(const std::string& where, const std::string& v) {
    try {
        std::size_t pos = 0;
        auto r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("{}: '{}' is not a number", where, v));
    }
}

Date to_date_value(const std::string& where, const std::string& v) {
    try {
        return parse_date(v);
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("{}: '{}' is not a date", where, v));
    }
}

YearMonth to_month(const std::string& where, const std::string& v) {
    try {
        return YearMonth::parse(v);
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("{}: '{}' is not a month", where, v));
    }
}

std::vector<std::string> to_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(v);
    while (std::getline(ss, item, ',')) {
        auto t = std::string(text::trim(item));
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

fs::path to_path(const fs::path& base, const std::string& v) {
    fs::path p(v);
    return p.is_absolute() ? p : (base / p).lexically_normal();
}

std::string env_or_empty(const std::string& name) {
    const char* v = name.empty() ? nullptr : std::getenv(name.c_str());
    return v == nullptr ? std::string{} : std::string{v};
}

Json env_ref(const std::string& name) { return {{"env", name}, {"set", !env_or_empty(name).empty()}}; }

std::string opt_path(const std::optional<fs::path>& p) { return p ? p->string() : std::string{}; }

/// Settings that shape artifacts; no secrets, no environment state, no run-store paths.
Json settings_json(const PipelineConfig& c) {
    std::vector<std::string> sources;
    for (auto s : c.crawl.sources) sources.push_back(to_string(s));
    return Json{
        {"run", {{"seed", c.seed}, {"github_api", c.github_api}, {"github_token_env", c.github_token_env},
                 {"max_retries", c.max_retries}, {"initial_backoff_ms", c.initial_backoff.count()},
                 {"fixture_dir", opt_path(c.fixture_dir)}}},
        {"crawl",
         {{"sources", sources}, {"search_string", c.crawl.search_string}, {"search_query", c.crawl.effective_query()},
          {"min_stars", c.crawl.min_stars}, {"official_list_url", c.crawl.official_list_url},
          {"awesome_list_urls", c.crawl.awesome_list_urls}, {"registry_api", c.crawl.registry_api},
          {"registry_token_env", c.crawl.registry_token_env},
          {"snapshot_cutoff", format_date(c.crawl.snapshot_cutoff)},
          {"collection_date", format_date(c.crawl.collection_date)},
          {"request_rate_limit", c.crawl.request_rate_limit}, {"max_search_pages", c.crawl.max_search_pages},
          {"max_registry_pages", c.crawl.max_registry_pages}}},
        {"provider", {{"kind", c.provider.kind}, {"url", c.provider.url}, {"model", c.provider.model},
                      {"api_key_env", c.provider.api_key_env}, {"max_tokens", c.provider.max_tokens}}},
        {"embedding", {{"kind", c.embedding.kind}, {"dimension", c.embedding.dimension}, {"url", c.embedding.url},
                       {"model", c.embedding.model}, {"api_key_env", c.embedding.api_key_env}}},
        {"taxonomy", {{"onet_tasks", c.taxonomy.onet_tasks.string()},
                      {"onet_work_context", c.taxonomy.onet_work_context.string()},
                      {"onet_crosswalk", c.taxonomy.onet_crosswalk.string()}, {"k", c.taxonomy.k},
                      {"n_init", c.taxonomy.n_init}}},
        {"usage", {{"npm_registry", c.usage.npm_registry}, {"npm_downloads", c.usage.npm_downloads},
                   {"pypi_json", c.usage.pypi_json}, {"pypi_stats", c.usage.pypi_stats},
                   {"fetch_date", format_date(c.usage.fetch_date)}, {"first_month", c.usage.first.str()},
                   {"last_month", c.usage.last.str()}, {"geo_file", opt_path(c.usage.geo_file)}}},
        {"fit", {{"n_boot", c.fit.n_boot}, {"ratings_file", c.fit.ratings_file.string()}}},
    };
}

void apply(PipelineConfig& c, const std::string& section, const std::string& key, const std::string& v,
           const fs::path& base, bool& cache_set) {
    const auto where = section + "." + key;
    if (secret_like(key)) {
        throw ConfigError(fmt::format("{}: secrets are read from the environment; name the variable with {}_env",
                                      where, key));
    }
    const auto int_ = [&] { return to_int(where, v); };
    if (section == "run") {
        if (key == "output_dir") return void(c.output_dir = to_path(base, v));
        if (key == "seed") return void(c.seed = static_cast<std::uint64_t>(int_()));
        if (key == "github_api") return void(c.github_api = v);
        if (key == "github_token_env") return void(c.github_token_env = v);
        if (key == "max_retries") return void(c.max_retries = static_cast<int>(int_()));
        if (key == "initial_backoff_ms") return void(c.initial_backoff = std::chrono::milliseconds(int_()));
        if (key == "fixture_dir") return void(c.fixture_dir = to_path(base, v));
    } else if (section == "crawl") {
        auto& k = c.crawl;
        if (key == "sources") {
            k.sources.clear();
            for (const auto& s : to_list(v)) {
                try {
                    k.sources.insert(parse_source(s));
                } catch (const std::exception&) {
                    throw ConfigError(fmt::format("{}: unknown source '{}'", where, s));
                }
            }
            return;
        }
        if (key == "search_string") return void(k.search_string = v);
        if (key == "search_query") return void(k.search_query = v);
        if (key == "min_stars") return void(k.min_stars = int_());
        if (key == "official_list_url") return void(k.official_list_url = v);
        if (key == "awesome_list_urls") return void(k.awesome_list_urls = to_list(v));
        if (key == "registry_api") return void(k.registry_api = v);
        if (key == "registry_token_env") return void(k.registry_token_env = v);
        if (key == "snapshot_cutoff") return void(k.snapshot_cutoff = to_date_value(where, v));
        if (key == "collection_date") return void(k.collection_date = to_date_value(where, v));
        if (key == "request_rate_limit") return void(k.request_rate_limit = to_double(where, v));
        if (key == "max_search_pages") return void(k.max_search_pages = static_cast<int>(int_()));
        if (key == "max_registry_pages") return void(k.max_registry_pages = static_cast<int>(int_()));
    } else if (section == "provider") {
        auto& p = c.provider;
        if (key == "kind") return void(p.kind = v);
        if (key == "url") return void(p.url = v);
        if (key == "model") return void(p.model = v);
        if (key == "api_key_env") return void(p.api_key_env = v);
        if (key == "max_tokens") return void(p.max_tokens = static_cast<int>(int_()));
    } else if (section == "embedding") {
        auto& e = c.embedding;
        if (key == "kind") return void(e.kind = v);
        if (key == "dimension") return void(e.dimension = static_cast<std::size_t>(int_()));
        if (key == "url") return void(e.url = v);
        if (key == "model") return void(e.model = v);
        if (key == "api_key_env") return void(e.api_key_env = v);
    } else if (section == "taxonomy") {
        auto& t = c.taxonomy;
        if (key == "onet_tasks") return void(t.onet_tasks = to_path(base, v));
        if (key == "onet_work_context") return void(t.onet_work_context = to_path(base, v));
        if (key == "onet_crosswalk") return void(t.onet_crosswalk = to_path(base, v));
        if (key == "k") return void(t.k = static_cast<int>(int_()));
        if (key == "n_init") return void(t.n_init = static_cast<int>(int_()));
    } else if (section == "usage") {
        auto& u = c.usage;
        if (key == "npm_registry") return void(u.npm_registry = v);
        if (key == "npm_downloads") return void(u.npm_downloads = v);
        if (key == "pypi_json") return void(u.pypi_json = v);
        if (key == "pypi_stats") return void(u.pypi_stats = v);
        if (key == "cache_dir") {
            cache_set = true;
            return void(u.cache_dir = to_path(base, v));
        }
        if (key == "fetch_date") return void(u.fetch_date = to_date_value(where, v));
        if (key == "first_month") return void(u.first = to_month(where, v));
        if (key == "last_month") return void(u.last = to_month(where, v));
        if (key == "geo_file") return void(u.geo_file = to_path(base, v));
    } else if (section == "fit") {
        if (key == "n_boot") return void(c.fit.n_boot = static_cast<std::size_t>(int_()));
        if (key == "ratings_file") return void(c.fit.ratings_file = to_path(base, v));
    } else {
        throw ConfigError(fmt::format("unknown section [{}]", section));
    }
    throw ConfigError(fmt::format("unknown key {}", where));
}

}  // namespace

PipelineConfig PipelineConfig::parse(const std::string& ini_text, const fs::path& base_dir) {
    ptree tree;
    std::istringstream in(ini_text);
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
    }
    PipelineConfig c;
    bool cache_set = false;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError(fmt::format("config key '{}' outside a section", section));
        for (const auto& [key, value] : body) {
            apply(c, section, key, std::string(text::trim(value.data())), base_dir, cache_set);
        }
    }
    if (!cache_set) c.usage.cache_dir = c.output_dir / "cache" / "downloads";
    if (c.max_retries < 0) throw ConfigError("run.max_retries must be >= 0");
    return c;
}

PipelineConfig PipelineConfig::load(const fs::path& ini) {
    if (!fs::exists(ini)) throw ConfigError(fmt::format("config file {} not found", ini.string()));
    auto c = parse(read_file(ini), fs::absolute(ini).parent_path());
    c.config_file = fs::absolute(ini);
    return c;
}

void PipelineConfig::validate() const {
    crawl.validate();
    if (crawl.sources.empty()) throw ConfigError("crawl.sources is empty");
    if (max_retries < 0) throw ConfigError("run.max_retries must be >= 0");
    if (provider.kind != "none" && provider.kind != "anthropic" && provider.kind != "openai") {
        throw ConfigError(fmt::format("provider.kind '{}' is not none, anthropic or openai", provider.kind));
    }
    if (provider.kind != "none" && provider.model.empty()) throw ConfigError("provider.model is required");
    if (provider.max_tokens < 1) throw ConfigError("provider.max_tokens must be >= 1");
    if (embedding.kind != "hashed" && embedding.kind != "http") {
        throw ConfigError(fmt::format("embedding.kind '{}' is not hashed or http", embedding.kind));
    }
    if (embedding.dimension < 1) throw ConfigError("embedding.dimension must be >= 1");
    if (embedding.kind == "http" && (embedding.url.empty() || embedding.model.empty())) {
        throw ConfigError("embedding.url and embedding.model are required for kind http");
    }
    if (taxonomy.k < 1 || taxonomy.n_init < 1) throw ConfigError("taxonomy.k and taxonomy.n_init must be >= 1");
    if (!taxonomy.onet_tasks.empty() && !fs::exists(taxonomy.onet_tasks)) {
        throw ConfigError(fmt::format("taxonomy.onet_tasks {} not found", taxonomy.onet_tasks.string()));
    }
    if (usage.first > usage.last) throw ConfigError("usage.first_month is after usage.last_month");
    if (usage.geo_file && !fs::exists(*usage.geo_file)) {
        throw ConfigError(fmt::format("usage.geo_file {} not found", usage.geo_file->string()));
    }
    if (fit.n_boot < 1) throw ConfigError("fit.n_boot must be >= 1");
    if (!fit.ratings_file.empty() && !fs::exists(fit.ratings_file)) {
        throw ConfigError(fmt::format("fit.ratings_file {} not found", fit.ratings_file.string()));
    }
    if (fixture_dir && !fs::exists(*fixture_dir / "http" / "index.json")) {
        throw ConfigError(fmt::format("fixture dir {} has no http/index.json", fixture_dir->string()));
    }
    if (from_run && !fs::exists(*from_run / "manifest.json")) {
        throw ConfigError(fmt::format("prior run {} has no manifest", from_run->string()));
    }
}

Json PipelineConfig::redacted() const {
    auto j = settings_json(*this);
    j["run"]["github_token_env"] = env_ref(github_token_env);
    j["crawl"]["registry_token_env"] = env_ref(crawl.registry_token_env);
    j["provider"]["api_key_env"] = env_ref(provider.api_key_env);
    j["embedding"]["api_key_env"] = env_ref(embedding.api_key_env);
    j["run"]["config_file"] = config_file.string();
    j["run"]["output_dir"] = output_dir.string();
    j["run"]["from_run"] = opt_path(from_run);
    j["usage"]["cache_dir"] = usage.cache_dir.string();
    return j;
}

std::string PipelineConfig::digest() const { return sha256_hex(settings_json(*this).dump()); }

// ---- run store ----

RunStore::RunStore(fs::path dir) : dir_(std::move(dir)), locked_(true) {}

RunStore::RunStore(RunStore&& o) noexcept : dir_(std::move(o.dir_)), locked_(o.locked_) { o.locked_ = false; }

RunStore::~RunStore() { release(); }

RunStore RunStore::create(const fs::path& root, const std::string& config_digest,
                          std::chrono::system_clock::time_point now) {
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw ConfigError(fmt::format("cannot create run root {}: {}", root.string(), ec.message()));
    const auto stamp = fmt::format("{:%Y%m%dT%H%M%SZ}", std::chrono::floor<std::chrono::seconds>(now));
    const auto base = stamp + "-" + config_digest.substr(0, 8);
    for (int n = 1; n < 1000; ++n) {
        const auto dir = root / (n == 1 ? base : fmt::format("{}-{}", base, n));
        if (!fs::create_directory(dir, ec)) {
            if (ec) throw ConfigError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
            continue;
        }
        const auto lock = dir / "run.lock";
        int fd = ::open(lock.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) throw ConfigError(fmt::format("run {} is locked", dir.string()));
        auto pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] auto w = ::write(fd, pid.data(), pid.size());
        ::close(fd);
        return RunStore(dir);
    }
    throw ConfigError(fmt::format("too many runs named {}", base));
}

void RunStore::release() {
    if (!locked_) return;
    std::error_code ec;
    fs::remove(dir_ / "run.lock", ec);
    locked_ = false;
}

void RunStore::finish(Json manifest) {
    manifest["complete"] = true;
    manifest["finished_ns"] = std::chrono::duration_cast<std::chrono::nanoseconds>(
                                  std::chrono::system_clock::now().time_since_epoch())
                                  .count();
    write_json(dir_ / "manifest.json", manifest);
    release();
}

void RunStore::abandon(Json manifest, const std::string& reason) {
    manifest["complete"] = false;
    manifest["failure"] = reason;
    write_json(dir_ / "manifest.json", manifest);
    release();
}

namespace {

std::optional<Json> completed_manifest(const fs::path& run_dir) {
    const auto m = run_dir / "manifest.json";
    if (!fs::exists(m) || fs::exists(run_dir / "run.lock")) return std::nullopt;
    try {
        auto j = read_json(m);
        if (j.value("complete", false)) return j;
    } catch (const std::exception& e) {
        spdlog::warn("unreadable manifest {}: {}", m.string(), e.what());
    }
    return std::nullopt;
}

/// Run holding a stage's artifacts: the run itself, else along its prior-run chain.
std::optional<fs::path> run_with_stage(const fs::path& run_dir, Stage s, int depth = 0) {
    if (depth > 64) return std::nullopt;
    auto m = completed_manifest(run_dir);
    if (!m) return std::nullopt;
    if (run_has_stage(run_dir, s)) return run_dir;
    auto prior = m->value("prior_run", std::string{});
    if (prior.empty()) return std::nullopt;
    return run_with_stage(prior, s, depth + 1);
}

}  // namespace

bool run_has_stage(const fs::path& run_dir, Stage s) {
    auto m = completed_manifest(run_dir);
    if (!m) return false;
    for (const auto& st : m->value("stages", Json::array())) {
        if (st.value("name", "") != to_string(s) || st.value("status", "") != "ok") continue;
        for (const auto& a : artifacts(s)) {
            if (!fs::exists(run_dir / a)) return false;
        }
        return true;
    }
    return false;
}

std::optional<fs::path> latest_run(const fs::path& root) {
    if (!fs::is_directory(root)) return std::nullopt;
    // Ordered by completion time; runs started in the same second differ only by digest.
    std::vector<std::pair<std::int64_t, fs::path>> dirs;
    for (const auto& e : fs::directory_iterator(root)) {
        if (!e.is_directory()) continue;
        if (auto m = completed_manifest(e.path())) dirs.emplace_back(m->value("finished_ns", std::int64_t{0}), e.path());
    }
    if (dirs.empty()) return std::nullopt;
    return std::max_element(dirs.begin(), dirs.end())->second;
}

void check_dependencies(const PipelineConfig& cfg, const std::vector<Stage>& stages) {
    std::set<Stage> produced;
    for (auto s : stages) {
        for (auto d : dependencies(s)) {
            if (produced.count(d)) continue;
            if (cfg.from_run && run_with_stage(*cfg.from_run, d)) continue;
            throw MissingStageError(
                to_string(d),
                fmt::format("stage {} needs the output of stage {}; add it to --stages or point --from-run at a "
                            "completed run that has it",
                            to_string(s), to_string(d)));
        }
        produced.insert(s);
    }
}

// ---- run ----

namespace {

struct Env {
    const PipelineConfig& cfg;
    RunStore& store;
    http::Client& client;
    TextAnalysisProvider* provider;
    EmbeddingProvider& embedder;
    PromptLibrary& prompts;
    std::set<std::string> produced;       // artifacts written by this run
    std::map<std::string, std::string> consumed;  // inputs of the current stage

    fs::path out(const std::string& name) {
        produced.insert(name);
        return store.path(name);
    }

    fs::path in(const std::string& name) {
        fs::path p;
        std::string tag;
        if (produced.count(name)) {
            p = store.path(name);
        } else {
            std::optional<fs::path> owner_run;
            for (auto s : all_stages()) {
                const auto& a = artifacts(s);
                if (std::find(a.begin(), a.end(), name) == a.end()) continue;
                if (cfg.from_run) owner_run = run_with_stage(*cfg.from_run, s);
                break;
            }
            if (!owner_run) throw MissingStageError(name, fmt::format("artifact {} is not available", name));
            p = *owner_run / name;
            tag = owner_run->filename().string() + ":";
        }
        if (fs::exists(p)) consumed[name] = tag + "sha256:" + sha256_file(p);
        return p;
    }
};

Table one_table(std::vector<std::string> header) {
    Table t;
    t.header = std::move(header);
    return t;
}

Json stage_crawl(Env& e) {
    GithubApi api(e.client, e.cfg.github_api, e.cfg.github_token_env);
    auto res = crawl::run_crawl(e.cfg.crawl, api);
    write_jsonl(e.out("candidates.jsonl"), to_rows(res.candidates));
    write_jsonl(e.out("docs.jsonl"), to_rows(res.docs));
    auto t = one_table({"url", "reason"});
    for (const auto& [url, reason] : res.dropped) t.rows.push_back({url, reason});
    write_file(e.out("crawl_dropped.csv"), format_csv(t));
    Json c{{"candidates", res.candidates.size()}, {"docs", res.docs.size()}, {"dropped", res.dropped.size()}};
    for (const auto& [src, st] : res.per_source) {
        c["sources"][src] = {{"reported", st.reported_hits}, {"seen", st.seen}, {"kept", st.kept},
                             {"skipped_malformed", st.skipped_malformed}};
    }
    return c;
}

Json stage_extract(Env& e) {
    auto candidates = load_rows<ServerCandidate>(e.in("candidates.jsonl"));
    auto docs = load_rows<RawServerDoc>(e.in("docs.jsonl"));
    std::map<std::string, const ServerCandidate*> by_url;
    for (const auto& c : candidates) by_url[c.repo.url] = &c;
    const auto lex = extract::ExtractLexicon::load();
    std::vector<ServerRecord> servers;
    auto rejected = one_table({"url", "reason"});
    std::size_t via_provider = 0;
    for (const auto& d : docs) {
        auto it = by_url.find(d.repo.url);
        if (it == by_url.end()) {
            rejected.rows.push_back({d.repo.url, "no-candidate"});
            continue;
        }
        auto outcome = extract::process_readme(d, e.provider, e.prompts, lex);
        if (!extract::validate_server(outcome.result)) {
            rejected.rows.push_back({d.repo.url, outcome.result.is_mcp_server ? "no-tools" : "not-mcp-server"});
            continue;
        }
        via_provider += outcome.method == "provider" ? 1 : 0;
        servers.push_back(extract::make_server_record(*it->second, d, std::move(outcome)));
    }
    write_jsonl(e.out("servers.jsonl"), to_rows(servers));
    write_file(e.out("extract_rejected.csv"), format_csv(rejected));
    std::size_t tools = 0;
    for (const auto& s : servers) tools += s.extraction.tools.size();
    return {{"docs", docs.size()}, {"servers", servers.size()}, {"tools", tools}, {"rejected", rejected.rows.size()},
            {"via_provider", via_provider}};
}

Json stage_classify(Env& e) {
    auto servers = load_rows<ServerRecord>(e.in("servers.jsonl"));
    const auto& tc = e.cfg.taxonomy;
    taxonomy::Hierarchy h;
    bool built = false;
    auto links = one_table({"task_id", "occupation_code", "occupation_title", "impact_score"});
    if (!tc.onet_tasks.empty()) {
        auto data = taxonomy::load_onet({tc.onet_tasks, tc.onet_work_context, tc.onet_crosswalk});
        taxonomy::BuildOptions opt;
        opt.k = tc.k;
        opt.n_init = tc.n_init;
        opt.seed = e.cfg.seed;
        h = taxonomy::build_hierarchy(data.tasks, taxonomy::load_l1_categories(), e.embedder, e.provider, opt,
                                      &e.prompts);
        built = true;
        h.metadata["built"] = true;
        std::map<std::string, std::string> titles;
        for (const auto& t : data.tasks) titles.emplace(t.occupation_code, t.occupation_title);
        for (const auto& t : data.tasks) {
            if (!data.crosswalk.contains(t.task_id)) continue;
            for (const auto& occ : data.crosswalk.occupations(t.task_id)) {
                auto imp = data.occupation_impact.find(occ);
                links.rows.push_back({t.task_id, occ, titles.count(occ) ? titles.at(occ) : std::string{},
                                      imp == data.occupation_impact.end() ? "" : fmt_num(imp->second)});
            }
        }
    } else {
        h.l1 = taxonomy::load_l1_categories();
        h.metadata = {{"built", false}, {"reason", "no task statements configured"}};
        h.index();
    }
    taxonomy::save_hierarchy(h, e.out("hierarchy.json"));
    const auto lex = classify::Lexicons::load();
    classify::Context ctx{e.provider, &e.prompts, &lex, built ? &h : nullptr, &e.embedder};
    std::vector<ServerClassification> out;
    std::size_t tools = 0, unclassified = 0;
    for (const auto& s : servers) {
        out.push_back(classify::classify_server(s, ctx));
        for (const auto& t : out.back().tools) {
            ++tools;
            unclassified += t.direct_impact.classified() ? 0 : 1;
        }
    }
    write_jsonl(e.out("classifications.jsonl"), to_rows(out));
    write_file(e.out("occupation_links.csv"), format_csv(links));
    return {{"servers", out.size()}, {"tools", tools}, {"tools_unclassified", unclassified},
            {"hierarchy_built", built}, {"l2_clusters", h.l2.size()}, {"occupation_links", links.rows.size()}};
}

Json stage_detect_ai(Env& e) {
    auto servers = load_rows<ServerRecord>(e.in("servers.jsonl"));
    GithubApi api(e.client, e.cfg.github_api, e.cfg.github_token_env);
    auto verdicts = ai::detect_all(servers, api, ai::PatternSet::load());
    write_jsonl(e.out("ai_verdicts.jsonl"), to_rows(verdicts));
    std::size_t ai = 0, first = 0;
    for (const auto& v : verdicts) {
        ai += v.ai_authored ? 1 : 0;
        first += v.first_month.value_or(false) ? 1 : 0;
    }
    return {{"servers", verdicts.size()}, {"ai_coauthored", ai}, {"first_month_ai", first}};
}

void write_concentration(Env& e, const usage::UsageJoin& join, const std::vector<usage::DownloadSeries>& series) {
    auto ranks = one_table({"scope", "rank", "server_id", "downloads", "cumulative_share"});
    auto summary = one_table({"scope", "servers_n", "top_1pct_n", "top_1pct_share", "top_10pct_n", "top_10pct_share"});
    const std::vector<std::pair<std::string, std::optional<usage::Registry>>> scopes{
        {"all", std::nullopt}, {"npm", usage::Registry::npm}, {"pypi", usage::Registry::pypi}};
    for (const auto& [scope, reg] : scopes) {
        auto per = usage::server_series(join, series, reg);
        std::vector<std::pair<std::string, double>> totals;
        for (const auto& [sid, pkgs] : join.by_server) {
            bool in_scope = !reg || std::any_of(pkgs.begin(), pkgs.end(), [&](const auto& p) { return p.registry == *reg; });
            if (!in_scope) continue;
            double sum = 0;
            if (auto it = per.find(sid); it != per.end()) {
                for (const auto& [_, v] : it->second) sum += static_cast<double>(v);
            }
            totals.emplace_back(sid, sum);
        }
        if (totals.empty()) continue;
        std::stable_sort(totals.begin(), totals.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        std::vector<double> values;
        for (const auto& [_, v] : totals) values.push_back(v);
        auto c = usage::concentration(values);
        for (std::size_t i = 0; i < totals.size(); ++i) {
            ranks.rows.push_back({scope, std::to_string(i + 1), totals[i].first, fmt_num(totals[i].second),
                                  c.undefined ? "" : fmt_num(c.cumulative[i])});
        }
        auto cell = [&](double p, bool share) {
            if (c.undefined) return std::string{};
            const auto& [n, s] = c.top.at(p);
            return share ? fmt_num(s) : std::to_string(n);
        };
        summary.rows.push_back({scope, std::to_string(totals.size()), cell(0.01, false), cell(0.01, true),
                                cell(0.10, false), cell(0.10, true)});
    }
    write_file(e.out("concentration.csv"), format_csv(ranks));
    write_file(e.out("concentration_summary.csv"), format_csv(summary));
}

Json write_geo(Env& e, const usage::UsageJoin& join, const std::vector<usage::DownloadSeries>& series,
               const std::vector<ServerClassification>& cls) {
    auto per_server = one_table(
        {"server_id", "downloads", "top_country", "top_country_share", "top_continent", "top_continent_share", "breadth"});
    auto per_country = one_table({"month", "country", "continent", "downloads", "action_downloads"});
    Json counters{{"geo_file", e.cfg.usage.geo_file.has_value()}};
    if (e.cfg.usage.geo_file) {
        auto geo = usage::load_geo_file(*e.cfg.usage.geo_file);
        auto bad = geo.violations(series);
        counters["violations"] = bad.size();
        for (const auto& [p, m] : bad) spdlog::warn("geo: {} {} countries exceed the monthly total", p.str(), m.str());
        std::set<std::string> action;
        for (const auto& c : cls) {
            if (c.direct_impact == ImpactCategory::action) action.insert(c.server_id);
        }
        std::map<std::string, std::map<std::string, double>> by_server;
        std::map<std::pair<YearMonth, std::string>, std::pair<double, double>> by_month;
        for (const auto& [pkg, months] : geo.cells) {
            auto owner = join.owner.find(pkg);
            if (owner == join.owner.end()) continue;
            for (const auto& [m, countries] : months) {
                if (m < e.cfg.usage.first || m > e.cfg.usage.last) continue;
                for (const auto& [country, v] : countries) {
                    by_server[owner->second][country] += static_cast<double>(v);
                    auto& cell = by_month[{m, country}];
                    cell.first += static_cast<double>(v);
                    if (action.count(owner->second)) cell.second += static_cast<double>(v);
                }
            }
        }
        const auto& cont = usage::continents();
        for (const auto& [sid, countries] : by_server) {
            double total = 0;
            for (const auto& [_, v] : countries) total += v;
            if (total <= 0) continue;
            auto b = usage::geo_breadth(countries);
            per_server.rows.push_back({sid, fmt_num(total), b.top_country, fmt_num(b.top_country_share),
                                       b.top_continent, fmt_num(b.top_continent_share), usage::to_string(b.breadth)});
        }
        for (const auto& [key, v] : by_month) {
            auto c = cont.find(key.second);
            per_country.rows.push_back({key.first.str(), key.second, c == cont.end() ? "Unknown" : c->second,
                                        fmt_num(v.first), fmt_num(v.second)});
        }
        counters["servers"] = per_server.rows.size();
    }
    write_file(e.out("usage_geo.csv"), format_csv(per_server));
    write_file(e.out("usage_geo_country.csv"), format_csv(per_country));
    return counters;
}

Json stage_usage(Env& e) {
    auto servers = load_rows<ServerRecord>(e.in("servers.jsonl"));
    auto cls = load_rows<ServerClassification>(e.in("classifications.jsonl"));
    auto verdicts = load_rows<AiVerdict>(e.in("ai_verdicts.jsonl"));
    usage::PackageIndex index(e.client, e.cfg.usage);
    auto join = usage::build_join(servers, index, usage::PackageIgnore::load());
    auto matches = one_table({"server_id", "registry", "package"});
    for (const auto& [sid, pkgs] : join.by_server) {
        for (const auto& p : pkgs) matches.rows.push_back({sid, usage::to_string(p.registry), p.name});
    }
    write_file(e.out("package_matches.csv"), format_csv(matches));

    std::vector<usage::DownloadSeries> series;
    auto dl = one_table({"registry", "package", "month", "downloads", "covered"});
    std::size_t unknown = 0;
    for (const auto& [pkg, _] : join.owner) {
        series.push_back(usage::fetch_downloads(pkg, e.cfg.usage, e.client));
        const auto& s = series.back();
        unknown += s.unknown ? 1 : 0;
        const std::set<YearMonth> missing(s.missing.begin(), s.missing.end());
        for (const auto& [m, v] : s.monthly) {
            dl.rows.push_back({usage::to_string(pkg.registry), pkg.name, m.str(), std::to_string(v),
                               missing.count(m) || s.unknown ? "0" : "1"});
        }
    }
    write_file(e.out("downloads.csv"), format_csv(dl));

    auto tables = usage::aggregate_usage(servers, cls, verdicts, join, series);
    write_file(e.out("usage_monthly.csv"), usage::usage_csv(tables));
    write_concentration(e, join, series);
    auto geo = write_geo(e, join, series, cls);
    double total = 0;
    for (const auto& [_, v] : tables.total_downloads) total += v;
    return {{"matched_servers", join.matched_servers}, {"matched_tools", join.matched_tools},
            {"packages", join.owner.size()}, {"unknown_packages", unknown}, {"conflicts", join.conflicts.size()},
            {"total_downloads", total}, {"geo", geo}};
}

fs::path locate(Env& e, const std::string& name) { return e.in(name); }

Json stage_fit(Env& e) {
    auto in = report::load_inputs([&](const std::string& n) { return locate(e, n); }, false);
    report::FitSettings s{e.cfg.seed, e.cfg.fit.n_boot, e.cfg.fit.ratings_file};
    auto fits = report::compute_fits(in, s);
    write_json(e.out("fits.json"), fits);
    Json c = Json::object();
    for (const auto& [name, f] : fits["fits"].items()) c[name] = f.value("status", "?");
    return c;
}

Json stage_report(Env& e) {
    auto in = report::load_inputs([&](const std::string& n) { return locate(e, n); }, true);
    std::size_t n = 0;
    for (auto k : report::all_kinds()) {
        for (const auto& p : report::emit_report(in, k, e.store.path("report"))) {
            e.produced.insert("report/" + p.filename().string());
            ++n;
        }
    }
    return {{"files", n}};
}

bool needs_provider(const std::vector<Stage>& stages) {
    return std::any_of(stages.begin(), stages.end(), [](Stage s) { return s == Stage::extract || s == Stage::classify; });
}

std::string required_env(const std::string& name, const std::string& what) {
    auto v = env_or_empty(name);
    if (v.empty()) throw ProviderAuthError(fmt::format("{} needs the environment variable {}", what, name));
    return v;
}

}  // namespace

RunResult run(const PipelineConfig& cfg, const std::vector<Stage>& stages) {
    cfg.validate();
    check_dependencies(cfg, stages);

    std::unique_ptr<http::Transport> transport;
    if (cfg.fixture_dir) {
        transport = std::make_unique<http::FixtureTransport>(*cfg.fixture_dir / "http");
    } else {
        transport = http::make_live_transport();
    }
    http::RateLimiter limiter(cfg.fixture_dir ? 0.0 : cfg.crawl.request_rate_limit);
    http::Client client(*transport, limiter, http::RetryPolicy{cfg.max_retries, cfg.initial_backoff});

    std::unique_ptr<TextAnalysisProvider> provider;
    if (cfg.provider.kind != "none" && needs_provider(stages)) {
        ChatEndpoint ep;
        ep.format = cfg.provider.kind;
        ep.model = cfg.provider.model;
        ep.max_tokens = cfg.provider.max_tokens;
        ep.url = cfg.provider.url.empty() ? (cfg.provider.kind == "anthropic" ? "https://api.anthropic.com/v1/messages"
                                                                               : "https://api.openai.com/v1/chat/completions")
                                          : cfg.provider.url;
        ep.api_key = required_env(cfg.provider.api_key_env, "provider " + cfg.provider.kind);
        provider = std::make_unique<HttpChatProvider>(client, ep);
        try {
            provider->preflight();
        } catch (const ProviderUnavailable& e) {
            throw ProviderAuthError(fmt::format("provider preflight failed: {}", e.what()));
        }
    }
    std::unique_ptr<EmbeddingProvider> embedder;
    if (cfg.embedding.kind == "http") {
        embedder = std::make_unique<HttpEmbeddingProvider>(client, cfg.embedding.url, cfg.embedding.model,
                                                           required_env(cfg.embedding.api_key_env, "embedding"),
                                                           cfg.embedding.dimension);
    } else {
        embedder = std::make_unique<HashedTfidfEmbedder>(cfg.embedding.dimension);
    }
    PromptLibrary prompts(asset_dir() / "prompts");

    std::string stage_list;
    for (auto s : stages) stage_list += to_string(s) + ",";
    auto store = RunStore::create(cfg.output_dir, sha256_hex(cfg.digest() + "|" + stage_list));
    spdlog::info("run {}", store.dir().string());

    Json manifest{{"run_id", store.id()},
                  {"created_at", format_timestamp(std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()))},
                  {"config", cfg.redacted()},
                  {"config_digest", cfg.digest()},
                  {"seed", cfg.seed},
                  {"prior_run", cfg.from_run ? fs::absolute(*cfg.from_run).lexically_normal().string() : std::string{}},
                  {"provider", provider ? provider->id() : std::string("rules")},
                  {"embedder", embedder->id()},
                  {"stages", Json::array()},
                  {"complete", false}};
    Env env{cfg, store, client, provider.get(), *embedder, prompts, {}, {}};
    RunResult result;
    result.run_dir = store.dir();
    for (auto s : stages) {
        StageRecord rec;
        rec.stage = s;
        env.consumed.clear();
        const auto before = env.produced;
        const auto t0 = std::chrono::steady_clock::now();
        spdlog::info("stage {}", to_string(s));
        try {
            switch (s) {
                case Stage::crawl: rec.counters = stage_crawl(env); break;
                case Stage::extract: rec.counters = stage_extract(env); break;
                case Stage::classify: rec.counters = stage_classify(env); break;
                case Stage::detect_ai: rec.counters = stage_detect_ai(env); break;
                case Stage::usage: rec.counters = stage_usage(env); break;
                case Stage::fit: rec.counters = stage_fit(env); break;
                case Stage::report: rec.counters = stage_report(env); break;
            }
        } catch (const std::exception& ex) {
            manifest["stages"].push_back({{"name", to_string(s)}, {"status", "failed"}, {"error", ex.what()}});
            store.abandon(manifest, fmt::format("stage {}: {}", to_string(s), ex.what()));
            throw;
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rec.inputs = env.consumed;
        for (const auto& a : env.produced) {
            if (!before.count(a)) rec.outputs[a] = "sha256:" + sha256_file(store.path(a));
        }
        manifest["stages"].push_back({{"name", to_string(s)},
                                      {"status", "ok"},
                                      {"seconds", rec.seconds},
                                      {"inputs", rec.inputs},
                                      {"outputs", rec.outputs},
                                      {"counters", rec.counters}});
        result.stages.push_back(std::move(rec));
    }
    result.manifest = manifest;
    store.finish(manifest);
    result.manifest["complete"] = true;
    return result;
}

}  // namespace mcpscope::pipeline
