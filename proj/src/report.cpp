#include "mcpscope/report.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "mcpscope/ai_authorship.hpp"
#include "mcpscope/common/errors.hpp"
#include "mcpscope/svg.hpp"
#include "mcpscope/taxonomy.hpp"

namespace mcpscope::report {

using analytics::Model;
using usage::kUnclassified;

namespace {

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

std::string num_or_empty(double v) { return std::isfinite(v) ? fmt_num(v) : std::string{}; }

std::vector<YearMonth> window() {
    std::vector<YearMonth> out;
    for (auto m = kSeriesOrigin; m <= kSeriesEnd; m = m.plus(1)) out.push_back(m);
    return out;
}

Table optional_csv(const Locate& at, const std::string& name) {
    auto p = at(name);
    if (!fs::exists(p)) return {};
    return read_csv(p);
}

std::map<std::string, const ServerClassification*> by_id(const std::vector<ServerClassification>& cls) {
    std::map<std::string, const ServerClassification*> m;
    for (const auto& c : cls) m[c.server_id] = &c;
    return m;
}

}  // namespace

Inputs load_inputs(const Locate& at, bool with_fits) {
    Inputs in;
    in.servers = load_rows<ServerRecord>(at("servers.jsonl"));
    in.classifications = load_rows<ServerClassification>(at("classifications.jsonl"));
    in.verdicts = load_rows<AiVerdict>(at("ai_verdicts.jsonl"));
    in.usage = usage::read_usage_csv(at("usage_monthly.csv"));
    in.concentration = optional_csv(at, "concentration.csv");
    in.concentration_summary = optional_csv(at, "concentration_summary.csv");
    in.geo_servers = optional_csv(at, "usage_geo.csv");
    in.geo_country = optional_csv(at, "usage_geo_country.csv");
    auto occ = optional_csv(at, "occupation_links.csv");
    if (!occ.header.empty()) {
        const auto ct = occ.column("task_id"), cc = occ.column("occupation_code"), cn = occ.column("occupation_title"),
                   cs = occ.column("impact_score");
        for (const auto& r : occ.rows) {
            OccupationLink l{r[ct], r[cc], r[cn], std::nullopt};
            if (!r[cs].empty()) l.impact_score = std::stod(r[cs]);
            in.occupations.push_back(std::move(l));
        }
    }
    auto h = read_json(at("hierarchy.json"));
    for (const auto& n : h.at("l1")) in.l1_names[n.at("id").get<std::string>()] = n.at("name").get<std::string>();
    if (with_fits) in.fits = read_json(at("fits.json"));
    return in;
}

// ---- series ----

Series share_series(const usage::UsageTables& t, const std::string& dimension, const std::string& category,
                    bool tool_level) {
    const std::string mass_dim = dimension == "action_space" ? "direct_impact" : dimension;
    std::map<YearMonth, double> weight;
    for (const auto& r : t.rows) {
        if (r.dimension == mass_dim && r.category != kUnclassified) weight[r.month] += r.server_downloads;
    }
    Series s;
    for (auto m : window()) {
        auto w = weight.find(m);
        if (w == weight.end() || w->second <= 0) continue;
        auto sh = usage::shares(t, m, dimension, tool_level);
        auto it = sh.find(category);
        s.months.push_back(m);
        s.ts.t.push_back(m.index_from(kSeriesOrigin));
        s.ts.y.push_back(it == sh.end() ? 0.0 : it->second);
        s.ts.weights.push_back(w->second);
    }
    return s;
}

Series downloads_series(const usage::UsageTables& t, const std::string& dimension, const std::string& category) {
    std::map<YearMonth, double> v;
    if (dimension == "total") {
        v = t.total_downloads;
    } else {
        for (const auto& r : t.rows) {
            if (r.dimension == dimension && r.category == category) v[r.month] += r.server_downloads;
        }
    }
    Series s;
    for (auto m : window()) {
        auto it = v.find(m);
        if (it == v.end() || it->second <= 0) continue;
        s.months.push_back(m);
        s.ts.t.push_back(m.index_from(kSeriesOrigin));
        s.ts.y.push_back(it->second);
    }
    return s;
}

Series cumulative_general_share(const std::vector<ServerRecord>& servers,
                                const std::vector<ServerClassification>& classifications) {
    auto cls = by_id(classifications);
    std::vector<std::pair<YearMonth, bool>> created;
    for (const auto& s : servers) {
        auto c = cls.find(s.id);
        if (!s.created_at || c == cls.end()) continue;
        created.emplace_back(YearMonth::of(*s.created_at), c->second->generality.environment_general);
    }
    Series out;
    for (auto m : window()) {
        double n = 0, g = 0;
        for (const auto& [cm, general] : created) {
            if (cm <= m) {
                n += 1;
                g += general ? 1 : 0;
            }
        }
        if (n == 0) continue;
        out.months.push_back(m);
        out.ts.t.push_back(m.index_from(kSeriesOrigin));
        out.ts.y.push_back(g / n);
        out.ts.weights.push_back(n);
    }
    return out;
}

Series first_month_ai_share(const std::vector<ServerRecord>& servers, const std::vector<AiVerdict>& verdicts) {
    std::map<std::string, const AiVerdict*> v;
    for (const auto& x : verdicts) v[x.server_id] = &x;
    std::map<YearMonth, std::pair<double, double>> per;  // (new, ai)
    for (const auto& s : servers) {
        auto it = v.find(s.id);
        if (!s.created_at || it == v.end() || !it->second->first_month) continue;
        auto& p = per[YearMonth::of(*s.created_at)];
        p.first += 1;
        p.second += *it->second->first_month ? 1 : 0;
    }
    Series out;
    for (auto m : window()) {
        auto it = per.find(m);
        if (it == per.end() || it->second.first == 0) continue;
        out.months.push_back(m);
        out.ts.t.push_back(m.index_from(kSeriesOrigin));
        out.ts.y.push_back(it->second.second / it->second.first);
        out.ts.weights.push_back(it->second.first);
    }
    return out;
}

std::vector<StakesRow> stakes_rows(const std::vector<ServerClassification>& classifications,
                                   const std::vector<OccupationLink>& links) {
    std::map<std::string, std::vector<const OccupationLink*>> by_task;
    std::map<std::string, StakesRow> rows;
    for (const auto& l : links) {
        by_task[l.task_id].push_back(&l);
        if (l.impact_score) rows[l.occupation_code] = {l.occupation_code, l.occupation_title, *l.impact_score, 0};
    }
    for (const auto& c : classifications) {
        for (const auto& t : c.tools) {
            if (!t.direct_impact.classified() || t.direct_impact.category() != ImpactCategory::action) continue;
            auto it = by_task.find(t.task.task_id);
            if (t.task.task_id.empty() || it == by_task.end()) continue;
            std::set<std::string> seen;
            for (const auto* l : it->second) {
                if (!seen.insert(l->occupation_code).second) continue;
                auto r = rows.find(l->occupation_code);
                if (r != rows.end()) r->second.action_tools += 1;
            }
        }
    }
    std::vector<StakesRow> out;
    for (auto& [_, r] : rows) out.push_back(r);
    return out;
}

// ---- fits ----

namespace {

enum class Ci { covariance, standard, wild, delta };

struct FitSpec {
    std::string name;
    std::string description;
    Series series;
    Model model;
    Ci ci;
    bool share = false;
};

Json skipped(const std::string& reason) { return Json{{"status", "skipped"}, {"reason", reason}}; }

Json series_json(const Series& s) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < s.months.size(); ++i) {
        rows.push_back({{"month", s.months[i].str()},
                        {"t", s.ts.t[i]},
                        {"y", s.ts.y[i]},
                        {"weight", s.ts.weighted() ? s.ts.weights[i] : 1.0}});
    }
    return rows;
}

Json run_fit(const FitSpec& spec, const FitSettings& settings) {
    Json out{{"description", spec.description}, {"model", std::string(analytics::to_string(spec.model))}};
    out["data"] = series_json(spec.series);
    const auto& ts = spec.series.ts;
    const std::size_t need = analytics::param_names(spec.model).size() + 1;
    if (ts.size() < need) {
        auto s = skipped(fmt::format("{} points, model needs {}", ts.size(), need));
        s["description"] = spec.description;
        s["data"] = out["data"];
        return s;
    }
    analytics::FitOptions opt;
    if (spec.share && (spec.model == Model::asymptotic || spec.model == Model::poly_convergence)) {
        opt.bounds["L"] = {0.0, 1.0};
        if (spec.model == Model::asymptotic) opt.bounds["y0"] = {0.0, 1.0};
    }
    analytics::FitResult f;
    try {
        f = analytics::fit(ts, spec.model, opt);
    } catch (const std::invalid_argument& e) {
        auto s = skipped(e.what());
        s["description"] = spec.description;
        s["data"] = out["data"];
        return s;
    }
    std::vector<analytics::Interval> band(ts.size());
    bool band_from_replicates = false;
    if (f.converged && (spec.ci == Ci::standard || spec.ci == Ci::wild)) {
        analytics::BootstrapOptions b;
        b.kind = spec.ci == Ci::wild ? analytics::BootstrapKind::wild : analytics::BootstrapKind::standard;
        b.n_boot = settings.n_boot;
        b.seed = settings.seed;
        auto boot = analytics::bootstrap_ci(ts, spec.model, b, opt);
        analytics::apply_bootstrap(f, boot, b.kind);
        out["bootstrap"] = {{"n_boot", b.n_boot}, {"n_failed", boot.n_failed}, {"reliable", boot.reliable}};
        if (!boot.replicates.empty()) {
            band_from_replicates = true;
            for (std::size_t i = 0; i < ts.size(); ++i) {
                std::vector<double> ys;
                ys.reserve(boot.replicates.size());
                for (const auto& p : boot.replicates) ys.push_back(analytics::evaluate(spec.model, p, ts.t[i]));
                band[i] = {analytics::quantile(ys, 0.025), analytics::quantile(ys, 0.975)};
            }
        }
    }
    if (!band_from_replicates) {
        for (std::size_t i = 0; i < ts.size(); ++i) {
            band[i] = f.converged ? f.predict_band(ts.t[i]) : analytics::Interval{nan(), nan()};
        }
    }
    if (spec.model == Model::exponential && f.converged) {
        try {
            auto d = analytics::doubling_time(f);
            out["doubling_time_months"] = {{"estimate", d.months}, {"lower", d.ci.lower}, {"upper", d.ci.upper}};
        } catch (const std::invalid_argument& e) {
            out["doubling_time_months"] = {{"status", "undefined"}, {"reason", e.what()}};
        }
    }
    if (spec.ci == Ci::delta && spec.model == Model::quadratic && f.converged) {
        auto amc = analytics::average_marginal_change(f, ts.t);
        out["average_marginal_change"] = {{"estimate", amc.estimate}, {"lower", amc.ci.lower}, {"upper", amc.ci.upper}};
        out["average_marginal_change_pp"] = {
            {"estimate", 100 * amc.estimate}, {"lower", 100 * amc.ci.lower}, {"upper", 100 * amc.ci.upper}};
        f.ci_method = analytics::CiMethod::delta;
    }
    out["fit"] = analytics::to_json(f);
    out["status"] = f.converged ? "ok" : "not_converged";
    Json curve = Json::array();
    for (std::size_t i = 0; i < ts.size(); ++i) {
        curve.push_back({{"month", spec.series.months[i].str()},
                         {"fitted", f.predict(ts.t[i])},
                         {"lower", band[i].lower},
                         {"upper", band[i].upper}});
    }
    out["curve"] = std::move(curve);
    return out;
}

Json kappa_json(const fs::path& file) {
    auto t = read_csv(file);
    const auto ci = t.column("item"), cr = t.column("rater"), cl = t.column("label");
    std::map<std::string, std::map<std::string, std::string>> grid;
    std::set<std::string> raters;
    for (const auto& r : t.rows) {
        grid[r[ci]][r[cr]] = r[cl];
        raters.insert(r[cr]);
    }
    std::vector<std::vector<std::string>> rows;
    for (const auto& [item, by_rater] : grid) {
        if (by_rater.size() != raters.size()) throw ConfigError(fmt::format("ratings: item {} lacks a rater", item));
        std::vector<std::string> row;
        for (const auto& [_, label] : by_rater) row.push_back(label);
        rows.push_back(std::move(row));
    }
    auto k = analytics::fleiss_kappa(analytics::RatingsMatrix::from_labels(rows));
    return {{"kappa", k.kappa}, {"p_bar", k.p_bar}, {"p_expected", k.p_expected}, {"degenerate", k.degenerate},
            {"n_items", rows.size()}, {"n_raters", raters.size()}};
}

}  // namespace

Json compute_fits(const Inputs& in, const FitSettings& settings) {
    const auto& u = in.usage;
    std::vector<FitSpec> specs{
        {"downloads_total", "total monthly downloads", downloads_series(u, "total", "all"), Model::exponential,
         Ci::standard},
        {"downloads_ai", "monthly downloads of AI-coauthored servers from first AI evidence",
         downloads_series(u, "ai_coauthored", "ai"), Model::exponential, Ci::standard},
        {"action_share", "action share of tool uses", share_series(u, "direct_impact", "action", true),
         Model::asymptotic, Ci::covariance, true},
        {"official_action_share", "action share of tool uses, official servers",
         share_series(u, "official_direct_impact", "action", true), Model::asymptotic, Ci::covariance, true},
        {"general_purpose_action_share", "general-purpose action share of tool uses",
         share_series(u, "action_space", "general_purpose_action", true), Model::poly_convergence, Ci::wild, true},
        {"medium_stakes_action_share", "medium-stakes action share of tool uses",
         share_series(u, "action_space", "medium_stakes_action", true), Model::asymptotic, Ci::covariance, true},
        {"high_stakes_action_share", "high-stakes action share of tool uses",
         share_series(u, "action_space", "high_stakes_action", true), Model::poly_convergence, Ci::wild, true},
        {"general_purpose_share_downloads", "general-purpose share of server downloads",
         share_series(u, "generality", "general_purpose", false), Model::poly_convergence, Ci::wild, true},
        {"general_purpose_share_servers", "general-purpose share of cumulative published servers",
         cumulative_general_share(in.servers, in.classifications), Model::poly_convergence, Ci::covariance, true},
        {"ai_first_month_share", "share of new servers with first-month AI evidence",
         first_month_ai_share(in.servers, in.verdicts), Model::quadratic, Ci::delta},
    };
    Json out{{"seed", settings.seed}, {"n_boot", settings.n_boot}, {"series_origin", kSeriesOrigin.str()}};
    out["fits"] = Json::object();
    for (const auto& s : specs) {
        out["fits"][s.name] = run_fit(s, settings);
        spdlog::info("fit {}: {}", s.name, out["fits"][s.name].value("status", "?"));
    }

    auto rows = stakes_rows(in.classifications, in.occupations);
    std::vector<analytics::StakesPoint> pts;
    for (const auto& r : rows) pts.push_back({r.score, r.action_tools});
    Json stakes;
    try {
        auto sf = analytics::stakes_fit(pts);
        stakes = analytics::to_json(sf);
        stakes["status"] = "ok";
        Json points = Json::array();
        for (const auto& r : rows) {
            Json p{{"occupation_code", r.occupation_code}, {"score", r.score}, {"action_tools", r.action_tools}};
            p["fitted_log10"] = r.action_tools > 0 ? Json(sf.fit.predict(r.score)) : Json(nullptr);
            points.push_back(std::move(p));
        }
        stakes["points"] = std::move(points);
    } catch (const std::invalid_argument& e) {
        stakes = skipped(e.what());
    }
    out["stakes"] = std::move(stakes);
    if (!settings.ratings_file.empty()) out["kappa"] = kappa_json(settings.ratings_file);
    return out;
}

// ---- reports ----

const std::vector<Kind>& all_kinds() {
    static const std::vector<Kind> k{Kind::domains, Kind::direct_impact, Kind::generality, Kind::geography,
                                     Kind::ai_coauthor, Kind::payments, Kind::stakes, Kind::concentration};
    return k;
}

std::string to_string(Kind k) {
    switch (k) {
        case Kind::domains: return "domains";
        case Kind::direct_impact: return "direct_impact";
        case Kind::generality: return "generality";
        case Kind::geography: return "geography";
        case Kind::ai_coauthor: return "ai_coauthor";
        case Kind::payments: return "payments";
        case Kind::stakes: return "stakes";
        case Kind::concentration: return "concentration";
    }
    return "?";
}

Kind parse_kind(std::string_view name) {
    for (auto k : all_kinds()) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError(fmt::format("unknown report kind '{}'", name));
}

namespace {

struct CurvePoint {
    double fitted = nan(), lower = nan(), upper = nan();
};

std::map<YearMonth, CurvePoint> curve(const Inputs& in, const std::string& fit) {
    std::map<YearMonth, CurvePoint> out;
    if (in.fits.is_null() || !in.fits.contains("fits") || !in.fits["fits"].contains(fit)) return out;
    const auto& f = in.fits["fits"][fit];
    if (!f.contains("curve")) return out;
    auto val = [](const Json& j) { return j.is_number() ? j.get<double>() : nan(); };
    for (const auto& c : f["curve"]) {
        out[YearMonth::parse(c.at("month").get<std::string>())] = {val(c["fitted"]), val(c["lower"]), val(c["upper"])};
    }
    return out;
}

std::string pct(double share) { return num_or_empty(100.0 * share); }

std::string warn_if_empty(const std::string& name, const Table& t) {
    if (t.rows.empty()) spdlog::warn("report {}: empty slice, header only", name);
    return format_csv(t);
}

/// Cumulative servers created by each month end, grouped by a key.
template <class KeyFn>
std::map<YearMonth, std::map<std::string, double>> cumulative_servers(const Inputs& in, KeyFn key) {
    auto cls = by_id(in.classifications);
    std::map<YearMonth, std::map<std::string, double>> out;
    for (auto m : window()) out[m];
    for (const auto& s : in.servers) {
        auto c = cls.find(s.id);
        if (!s.created_at || c == cls.end()) continue;
        auto k = key(*c->second);
        if (!k) continue;
        const auto cm = YearMonth::of(*s.created_at);
        for (auto m : window()) {
            if (cm <= m) out[m][*k] += 1;
        }
    }
    return out;
}

// domains ------------------------------------------------------------------

std::map<std::string, std::string> domains_tables(const Inputs& in) {
    std::map<std::string, double> servers_n, tools_n, server_dl, tool_dl;
    for (const auto& c : in.classifications) {
        if (!c.domain.empty()) servers_n[c.domain] += 1;
        for (const auto& t : c.tools) {
            if (!t.task.l1_id.empty()) tools_n[t.task.l1_id] += 1;
        }
    }
    for (const auto& r : in.usage.rows) {
        if (r.category == kUnclassified) continue;
        if (r.dimension == "server_domain") server_dl[r.category] += r.server_downloads;
        if (r.dimension == "domain") tool_dl[r.category] += r.tool_uses;
    }
    auto total = [](const std::map<std::string, double>& m) {
        return std::accumulate(m.begin(), m.end(), 0.0, [](double a, const auto& kv) { return a + kv.second; });
    };
    const double sn = total(servers_n), tn = total(tools_n), sd = total(server_dl), td = total(tool_dl);
    std::set<std::string> ids;
    for (const auto* m : {&servers_n, &tools_n, &server_dl, &tool_dl}) {
        for (const auto& [k, _] : *m) ids.insert(k);
    }
    struct Row {
        std::string id;
        double sn, sp, sdp, tn, tp, tdp;
    };
    std::vector<Row> rows;
    auto get = [](const std::map<std::string, double>& m, const std::string& k) {
        auto it = m.find(k);
        return it == m.end() ? 0.0 : it->second;
    };
    for (const auto& id : ids) {
        rows.push_back({id, get(servers_n, id), sn > 0 ? get(servers_n, id) / sn : nan(),
                        sd > 0 ? get(server_dl, id) / sd : nan(), get(tools_n, id), tn > 0 ? get(tools_n, id) / tn : nan(),
                        td > 0 ? get(tool_dl, id) / td : nan()});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        auto ka = std::isfinite(a.sdp) ? a.sdp : -1.0, kb = std::isfinite(b.sdp) ? b.sdp : -1.0;
        if (ka != kb) return ka > kb;
        if (a.sn != b.sn) return a.sn > b.sn;
        return a.id < b.id;
    });
    Table t;
    t.header = {"domain", "servers_n", "servers_pct", "server_downloads_pct", "tools_n", "tools_pct", "tool_downloads_pct"};
    for (const auto& r : rows) {
        auto name = in.l1_names.count(r.id) ? in.l1_names.at(r.id) : r.id;
        t.rows.push_back({name, fmt_num(r.sn), pct(r.sp), pct(r.sdp), fmt_num(r.tn), pct(r.tp), pct(r.tdp)});
    }
    return {{"domains.csv", warn_if_empty("domains", t)}};
}

// direct impact ------------------------------------------------------------

std::map<std::string, std::string> direct_impact_tables(const Inputs& in) {
    std::map<std::string, double> overall;
    double overall_total = 0;
    for (const auto& r : in.usage.rows) {
        if (r.dimension == "functionality" && r.category != kUnclassified) {
            overall[r.category] += r.tool_uses;
            overall_total += r.tool_uses;
        }
    }
    std::vector<std::string> codes;
    for (const char* lead : {"3", "2", "1"}) {
        for (const auto& c : functionality_codes()) {
            if (c.starts_with(lead)) codes.push_back(c);
        }
    }
    Table t;
    t.header = {"month", "total_downloads", "category", "code", "functionality", "share", "overall_share"};
    bool any = false;
    for (auto m : window()) {
        auto sh = usage::shares(in.usage, m, "functionality", true);
        if (sh.empty()) continue;
        any = true;
        auto tot = in.usage.total_downloads.find(m);
        for (const auto& c : codes) {
            DirectImpact d{c};
            auto it = sh.find(c);
            t.rows.push_back({m.str(), fmt_num(tot == in.usage.total_downloads.end() ? 0.0 : tot->second),
                              to_string(d.category()), c, functionality_name(c), fmt_num(it == sh.end() ? 0.0 : it->second),
                              overall_total > 0 ? fmt_num(overall[c] / overall_total) : std::string{}});
        }
    }
    if (!any) t.rows.clear();
    Table trend;
    trend.header = {"month", "action_share", "fitted", "lower", "upper"};
    auto obs = share_series(in.usage, "direct_impact", "action", true);
    auto cv = curve(in, "action_share");
    for (std::size_t i = 0; i < obs.months.size(); ++i) {
        auto p = cv.count(obs.months[i]) ? cv.at(obs.months[i]) : CurvePoint{};
        trend.rows.push_back({obs.months[i].str(), fmt_num(obs.ts.y[i]), num_or_empty(p.fitted), num_or_empty(p.lower),
                              num_or_empty(p.upper)});
    }
    return {{"direct_impact.csv", warn_if_empty("direct_impact", t)},
            {"direct_impact_trend.csv", warn_if_empty("direct_impact_trend", trend)}};
}

// generality ---------------------------------------------------------------

std::map<std::string, std::string> generality_tables(const Inputs& in) {
    auto dl = share_series(in.usage, "generality", "general_purpose", false);
    auto cnt = cumulative_general_share(in.servers, in.classifications);
    auto cd = curve(in, "general_purpose_share_downloads"), cc = curve(in, "general_purpose_share_servers");
    Table t;
    t.header = {"month", "downloads_n", "general_share_downloads", "fit_downloads", "fit_downloads_lower",
                "fit_downloads_upper", "cumulative_servers", "general_share_servers", "fit_servers",
                "fit_servers_lower", "fit_servers_upper"};
    for (auto m : window()) {
        auto di = std::find(dl.months.begin(), dl.months.end(), m);
        auto ci = std::find(cnt.months.begin(), cnt.months.end(), m);
        if (di == dl.months.end() && ci == cnt.months.end()) continue;
        std::vector<std::string> row{m.str()};
        if (di != dl.months.end()) {
            auto i = static_cast<std::size_t>(di - dl.months.begin());
            auto p = cd.count(m) ? cd.at(m) : CurvePoint{};
            for (auto s : {fmt_num(dl.ts.weights[i]), fmt_num(dl.ts.y[i]), num_or_empty(p.fitted),
                           num_or_empty(p.lower), num_or_empty(p.upper)}) {
                row.push_back(s);
            }
        } else {
            row.insert(row.end(), 5, "");
        }
        if (ci != cnt.months.end()) {
            auto i = static_cast<std::size_t>(ci - cnt.months.begin());
            auto p = cc.count(m) ? cc.at(m) : CurvePoint{};
            for (auto s : {fmt_num(cnt.ts.weights[i]), fmt_num(cnt.ts.y[i]), num_or_empty(p.fitted),
                           num_or_empty(p.lower), num_or_empty(p.upper)}) {
                row.push_back(s);
            }
        } else {
            row.insert(row.end(), 5, "");
        }
        t.rows.push_back(std::move(row));
    }
    return {{"generality.csv", warn_if_empty("generality", t)}};
}

// geography ----------------------------------------------------------------

std::map<std::string, std::string> geography_tables(const Inputs& in) {
    Table t;
    t.header = {"country", "continent", "action_downloads", "share", "h1_2025_share", "h2_2025_share", "change_pp"};
    Table b;
    b.header = {"breadth", "servers_n", "downloads"};
    if (!in.geo_country.header.empty()) {
        const auto& g = in.geo_country;
        const auto cm = g.column("month"), cc = g.column("country"), cn = g.column("continent"),
                   ca = g.column("action_downloads");
        std::map<std::string, double> all, h1, h2;
        std::map<std::string, std::string> continent;
        double ta = 0, t1 = 0, t2 = 0;
        for (const auto& r : g.rows) {
            const double v = std::stod(r[ca]);
            const auto m = YearMonth::parse(r[cm]);
            all[r[cc]] += v;
            ta += v;
            continent[r[cc]] = r[cn];
            if (m.year == 2025 && m.month <= 6) {
                h1[r[cc]] += v;
                t1 += v;
            } else if (m.year == 2025) {
                h2[r[cc]] += v;
                t2 += v;
            }
        }
        std::vector<std::pair<std::string, double>> order(all.begin(), all.end());
        std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        for (const auto& [c, v] : order) {
            if (v <= 0) continue;
            const double s1 = t1 > 0 ? h1[c] / t1 : nan(), s2 = t2 > 0 ? h2[c] / t2 : nan();
            t.rows.push_back({c, continent[c], fmt_num(v), fmt_num(v / ta), num_or_empty(s1), num_or_empty(s2),
                              num_or_empty(100 * (s2 - s1))});
        }
    }
    if (!in.geo_servers.header.empty()) {
        const auto& g = in.geo_servers;
        const auto cb = g.column("breadth"), cd = g.column("downloads");
        std::map<std::string, std::pair<double, double>> agg;
        for (const auto& r : g.rows) {
            auto& a = agg[r[cb]];
            a.first += 1;
            a.second += std::stod(r[cd]);
        }
        for (const char* k : {"one_country", "one_continent", "worldwide"}) {
            auto it = agg.find(k);
            if (it != agg.end()) b.rows.push_back({k, fmt_num(it->second.first), fmt_num(it->second.second)});
        }
    }
    return {{"geography.csv", warn_if_empty("geography", t)}, {"geography_breadth.csv", warn_if_empty("geography_breadth", b)}};
}

// ai coauthor --------------------------------------------------------------

std::map<std::string, std::string> ai_tables(const Inputs& in) {
    const auto agents = ai::PatternSet::load().agents;
    std::map<std::string, const AiVerdict*> v;
    for (const auto& x : in.verdicts) v[x.server_id] = &x;
    std::map<YearMonth, std::map<std::string, double>> per;  // month -> agent -> servers
    std::map<YearMonth, std::pair<double, double>> totals;
    std::map<std::string, double> agent_total;
    double ai_total = 0;
    for (const auto& s : in.servers) {
        auto it = v.find(s.id);
        if (!s.created_at || it == v.end() || !it->second->first_month) continue;
        const auto m = YearMonth::of(*s.created_at);
        totals[m].first += 1;
        if (*it->second->first_month) {
            totals[m].second += 1;
            const auto agent = it->second->first_month_agent.value_or(it->second->agent.value_or(""));
            per[m][agent] += 1;
            agent_total[agent] += 1;
            ai_total += 1;
        }
    }
    auto cv = curve(in, "ai_first_month_share");
    Table t;
    t.header = {"month", "new_servers", "ai_servers", "ai_share", "fit", "fit_lower", "fit_upper"};
    for (const auto& a : agents) t.header.push_back("share_" + a);
    for (auto m : window()) {
        auto it = totals.find(m);
        if (it == totals.end() || it->second.first == 0) continue;
        const double n = it->second.first;
        auto p = cv.count(m) ? cv.at(m) : CurvePoint{};
        std::vector<std::string> row{m.str(), fmt_num(n), fmt_num(it->second.second), fmt_num(it->second.second / n),
                                     num_or_empty(p.fitted), num_or_empty(p.lower), num_or_empty(p.upper)};
        for (const auto& a : agents) row.push_back(fmt_num(per[m][a] / n));
        t.rows.push_back(std::move(row));
    }
    Table s;
    s.header = {"agent", "servers_n", "share_of_ai"};
    for (const auto& a : agents) {
        if (agent_total[a] > 0) s.rows.push_back({a, fmt_num(agent_total[a]), fmt_num(agent_total[a] / ai_total)});
    }
    return {{"ai_coauthor.csv", warn_if_empty("ai_coauthor", t)}, {"ai_coauthor_agents.csv", warn_if_empty("ai_coauthor_agents", s)}};
}

// payments -----------------------------------------------------------------

std::map<std::string, std::string> payments_tables(const Inputs& in) {
    auto levels = cumulative_servers(in, [](const ServerClassification& c) -> std::optional<std::string> {
        if (c.payments.autonomy <= 0) return std::nullopt;
        return std::to_string(c.payments.autonomy);
    });
    Table t;
    t.header = {"month", "servers_autonomy_ge2", "autonomy_1", "autonomy_2", "autonomy_3", "autonomy_4"};
    bool any = false;
    for (const auto& [m, by] : levels) {
        auto g = [&](const char* k) {
            auto it = by.find(k);
            return it == by.end() ? 0.0 : it->second;
        };
        const double ge2 = g("2") + g("3") + g("4");
        any = any || ge2 + g("1") > 0;
        t.rows.push_back({m.str(), fmt_num(ge2), fmt_num(g("1")), fmt_num(g("2")), fmt_num(g("3")), fmt_num(g("4"))});
    }
    if (!any) t.rows.clear();
    return {{"payments.csv", warn_if_empty("payments", t)}};
}

// stakes -------------------------------------------------------------------

std::map<std::string, std::string> stakes_tables(const Inputs& in) {
    Table t;
    t.header = {"occupation_code", "occupation", "stakes_score", "stakes_bucket", "action_tools", "log10_action_tools",
                "fitted_log10"};
    std::map<std::string, double> fitted;
    Table s;
    s.header = {"r_squared", "f_statistic", "p_value", "n_used"};
    if (!in.fits.is_null() && in.fits.contains("stakes") && in.fits["stakes"].value("status", "") == "ok") {
        const auto& st = in.fits["stakes"];
        for (const auto& p : st["points"]) {
            if (p["fitted_log10"].is_number()) fitted[p["occupation_code"].get<std::string>()] = p["fitted_log10"].get<double>();
        }
        auto fs_ = st["f_statistic"];
        s.rows.push_back({fmt_num(st["r_squared"].get<double>()),
                          fs_.is_number() ? fmt_num(fs_.get<double>()) : fs_.get<std::string>(),
                          fmt_num(st["p_value"].get<double>()), fmt_num(st["n_used"].get<double>())});
    }
    for (const auto& r : stakes_rows(in.classifications, in.occupations)) {
        if (r.action_tools <= 0) continue;
        const auto bucket = to_string(taxonomy::stakes_bucket(r.score));
        auto f = fitted.find(r.occupation_code);
        t.rows.push_back({r.occupation_code, r.occupation_title, fmt_num(r.score), bucket, fmt_num(r.action_tools),
                          fmt_num(std::log10(r.action_tools)), f == fitted.end() ? "" : fmt_num(f->second)});
    }
    return {{"stakes.csv", warn_if_empty("stakes", t)}, {"stakes_fit.csv", warn_if_empty("stakes_fit", s)}};
}

// concentration ------------------------------------------------------------

std::map<std::string, std::string> concentration_tables(const Inputs& in) {
    Table c = in.concentration, s = in.concentration_summary;
    if (c.header.empty()) c.header = {"scope", "rank", "server_id", "downloads", "cumulative_share"};
    if (s.header.empty()) {
        s.header = {"scope", "servers_n", "top_1pct_n", "top_1pct_share", "top_10pct_n", "top_10pct_share"};
    }
    return {{"concentration.csv", warn_if_empty("concentration", c)},
            {"concentration_summary.csv", warn_if_empty("concentration_summary", s)}};
}

// charts -------------------------------------------------------------------

std::vector<double> col(const Table& t, const std::string& name) {
    std::vector<double> out;
    if (!t.has_column(name)) return out;
    auto c = t.column(name);
    for (const auto& r : t.rows) out.push_back(r[c].empty() ? nan() : std::stod(r[c]));
    return out;
}

std::vector<std::string> strcol(const Table& t, const std::string& name) {
    std::vector<std::string> out;
    if (!t.has_column(name)) return out;
    auto c = t.column(name);
    for (const auto& r : t.rows) out.push_back(r[c]);
    return out;
}

Table parse(const std::string& csv) { return parse_delimited(csv, ','); }

svg::Axes month_axes(const std::string& title, const std::string& y, const std::vector<std::string>& months) {
    svg::Axes a;
    a.title = title;
    a.x_label = "month";
    a.y_label = y;
    for (std::size_t i = 0; i < months.size(); ++i) {
        a.x.push_back(static_cast<double>(YearMonth::parse(months[i]).index_from(kSeriesOrigin)));
        a.x_ticks.push_back(months[i]);
    }
    return a;
}

std::string chart(const Inputs& in, Kind k, const std::map<std::string, std::string>& csv) {
    switch (k) {
        case Kind::domains: {
            auto t = parse(csv.at("domains.csv"));
            auto v = col(t, "tools_pct");
            for (auto& x : v) x /= 100;
            return svg::bars("Tools by task domain", strcol(t, "domain"), v);
        }
        case Kind::direct_impact: {
            auto t = parse(csv.at("direct_impact.csv"));
            std::vector<std::string> months;
            std::map<std::string, std::vector<double>> by_code;
            std::vector<std::string> codes;
            const auto cm = t.rows.empty() ? 0 : t.column("month"), cc = t.rows.empty() ? 0 : t.column("code"),
                       cs = t.rows.empty() ? 0 : t.column("share");
            for (const auto& r : t.rows) {
                if (months.empty() || months.back() != r[cm]) months.push_back(r[cm]);
                if (!by_code.count(r[cc])) codes.push_back(r[cc]);
                by_code[r[cc]].push_back(std::stod(r[cs]));
            }
            auto a = month_axes("Tool uses by functionality", "share of tool uses", months);
            a.percent_y = true;
            a.y_max = 1.0;
            std::vector<svg::Series> areas;
            for (std::size_t i = 0; i < codes.size(); ++i) {
                areas.push_back({codes[i] + " " + functionality_name(codes[i]), by_code[codes[i]], svg::palette(i)});
            }
            auto tr = parse(csv.at("direct_impact_trend.csv"));
            std::vector<svg::Series> overlay;
            if (!tr.rows.empty() && tr.rows.size() == months.size()) {
                overlay.push_back({"action trend", col(tr, "fitted"), "#000000", false, false, true, col(tr, "lower"),
                                   col(tr, "upper")});
            }
            return svg::stacked(a, areas, overlay);
        }
        case Kind::generality: {
            auto t = parse(csv.at("generality.csv"));
            auto a = month_axes("General-purpose share", "share", strcol(t, "month"));
            a.percent_y = true;
            return svg::lines(a, {{"downloads (observed)", col(t, "general_share_downloads"), "#b2182b", false, true, false},
                                  {"downloads (fit)", col(t, "fit_downloads"), "#b2182b", false, false, true,
                                   col(t, "fit_downloads_lower"), col(t, "fit_downloads_upper")},
                                  {"servers (observed)", col(t, "general_share_servers"), "#2166ac", false, true, false},
                                  {"servers (fit)", col(t, "fit_servers"), "#2166ac", true, false, true,
                                   col(t, "fit_servers_lower"), col(t, "fit_servers_upper")}});
        }
        case Kind::geography: {
            auto t = parse(csv.at("geography.csv"));
            auto labels = strcol(t, "country");
            auto v = col(t, "share");
            if (labels.size() > 15) {
                labels.resize(15);
                v.resize(15);
            }
            return svg::bars("Action-server downloads by country", labels, v);
        }
        case Kind::ai_coauthor: {
            auto t = parse(csv.at("ai_coauthor.csv"));
            auto a = month_axes("New servers with first-month AI assistance", "share of new servers", strcol(t, "month"));
            a.percent_y = true;
            std::vector<svg::Series> areas;
            std::size_t i = 0;
            for (const auto& h : t.header) {
                if (!h.starts_with("share_")) continue;
                auto y = col(t, h);
                if (std::all_of(y.begin(), y.end(), [](double x) { return !(x > 0); })) continue;
                areas.push_back({h.substr(6), y, svg::palette(i++)});
            }
            return svg::stacked(a, areas,
                                {{"quadratic fit", col(t, "fit"), "#000000", false, false, true, col(t, "fit_lower"),
                                  col(t, "fit_upper")}});
        }
        case Kind::payments: {
            auto t = parse(csv.at("payments.csv"));
            auto a = month_axes("Servers with payment tools", "servers", strcol(t, "month"));
            std::vector<svg::Series> areas;
            for (int lv = 1; lv <= 4; ++lv) {
                areas.push_back({fmt::format("autonomy {}", lv), col(t, fmt::format("autonomy_{}", lv)),
                                 svg::palette(static_cast<std::size_t>(7 + lv))});
            }
            return svg::stacked(a, areas, {{"autonomy >= 2", col(t, "servers_autonomy_ge2"), "#000000", true}});
        }
        case Kind::stakes: {
            auto t = parse(csv.at("stakes.csv"));
            std::vector<std::size_t> idx(t.rows.size());
            std::iota(idx.begin(), idx.end(), 0);
            auto score = col(t, "stakes_score"), cnt = col(t, "action_tools"), fit = col(t, "fitted_log10");
            std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return score[a] < score[b]; });
            svg::Axes a;
            a.title = "Action tools by occupation stakes";
            a.x_label = "stakes";
            a.y_label = "action tools";
            a.log_y = true;
            std::vector<double> y, f;
            for (auto i : idx) {
                a.x.push_back(score[i]);
                y.push_back(cnt[i]);
                f.push_back(std::isfinite(fit[i]) ? std::pow(10.0, fit[i]) : nan());
            }
            return svg::lines(a, {{"occupations", y, "#2166ac", false, true, false}, {"quadratic fit", f, "#000000", true}});
        }
        case Kind::concentration: {
            auto t = in.concentration;
            svg::Axes a;
            a.title = "Cumulative download share by ranked servers";
            a.x_label = "top servers (%)";
            a.y_label = "cumulative share";
            a.percent_y = true;
            for (int p = 1; p <= 100; ++p) {
                a.x.push_back(p);
                a.x_ticks.push_back(p % 10 == 0 ? fmt::format("{}%", p) : "");
            }
            std::vector<svg::Series> series;
            if (!t.header.empty()) {
                const auto cs = t.column("scope"), cc = t.column("cumulative_share");
                std::map<std::string, std::vector<double>> cum;
                for (const auto& r : t.rows) cum[r[cs]].push_back(std::stod(r[cc]));
                std::size_t i = 0;
                for (const auto& [scope, v] : cum) {
                    std::vector<double> y;
                    for (int p = 1; p <= 100; ++p) {
                        auto k = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size()) - 1e-9));
                        y.push_back(v[std::clamp<std::size_t>(k, 1, v.size()) - 1]);
                    }
                    series.push_back({scope, y, svg::palette(i++ * 4)});
                }
            }
            return svg::lines(a, series);
        }
    }
    return {};
}

}  // namespace

std::map<std::string, std::string> tables(const Inputs& in, Kind k) {
    switch (k) {
        case Kind::domains: return domains_tables(in);
        case Kind::direct_impact: return direct_impact_tables(in);
        case Kind::generality: return generality_tables(in);
        case Kind::geography: return geography_tables(in);
        case Kind::ai_coauthor: return ai_tables(in);
        case Kind::payments: return payments_tables(in);
        case Kind::stakes: return stakes_tables(in);
        case Kind::concentration: return concentration_tables(in);
    }
    return {};
}

std::vector<fs::path> emit_report(const Inputs& in, Kind k, const fs::path& out_dir) {
    auto t = tables(in, k);
    std::vector<fs::path> out;
    for (const auto& [name, body] : t) {
        write_file(out_dir / name, body);
        out.push_back(out_dir / name);
    }
    auto svg_path = out_dir / (to_string(k) + ".svg");
    write_file(svg_path, chart(in, k, t));
    out.push_back(svg_path);
    return out;
}

}  // namespace mcpscope::report
