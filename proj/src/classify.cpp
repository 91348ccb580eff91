#include "mcpscope/classify.hpp"

#include <algorithm>
#include <regex>
#include <set>

#include <fmt/format.h>

#include "mcpscope/common/text.hpp"

namespace mcpscope::classify {

namespace {

bool in(const std::vector<std::string>& list, const std::string& w) {
    return std::find(list.begin(), list.end(), w) != list.end();
}

std::vector<std::string> hits(std::string_view normalized, const std::vector<std::string>& phrases) {
    std::vector<std::string> out;
    for (const auto& p : phrases) {
        if (text::contains_word_normalized(normalized, p)) out.push_back(p);
    }
    return out;
}

std::optional<std::string> verb_class(const std::string& word, const ImpactLexicon& lex) {
    std::vector<std::string> forms{word};
    if (word.size() > 3 && word.ends_with("es")) forms.push_back(word.substr(0, word.size() - 2));
    if (word.size() > 2 && word.ends_with("s")) forms.push_back(word.substr(0, word.size() - 1));
    for (const auto& f : forms) {
        for (const char* code : {"2.3", "1.1", "2.1", "2.2", "3"}) {
            auto it = lex.verbs.find(code);
            if (it != lex.verbs.end() && in(it->second, f)) return std::string(code);
        }
    }
    return std::nullopt;
}

std::optional<std::string> action_subcode(const std::vector<std::string>& words, const ImpactLexicon& lex) {
    for (const auto& code : lex.action_noun_order) {
        const auto& nouns = lex.action_nouns.at(code);
        for (const auto& w : words) {
            if (in(nouns, w)) return code;
        }
    }
    return std::nullopt;
}

std::string server_block(const ServerRecord& s) {
    std::string out = fmt::format("Name: {}\nDescription: {}\nSummary: {}\nTools:\n", s.repo.name, s.description,
                                  s.extraction.summary);
    for (const auto& t : s.extraction.tools) {
        out += fmt::format("- {}: {}\n", t.name, t.description);
        if (t.input_schema) out += "  inputs: " + text::replace_all(*t.input_schema, "\n", "; ") + "\n";
    }
    return out;
}

std::string server_context(const ServerRecord& s) {
    return fmt::format("{}: {} {}", s.repo.name, s.description, s.extraction.summary);
}

std::optional<int> as_flag(const Json& j, const char* key, int max) {
    if (!j.contains(key)) return std::nullopt;
    const auto& v = j[key];
    int value = 0;
    if (v.is_boolean()) {
        value = v.get<bool>() ? 1 : 0;
    } else if (v.is_number_integer()) {
        value = v.get<int>();
    } else if (v.is_string() && v.get<std::string>().size() == 1 && std::isdigit(v.get<std::string>()[0])) {
        value = v.get<std::string>()[0] - '0';
    } else {
        return std::nullopt;
    }
    if (value < 0 || value > max) return std::nullopt;
    return value;
}

std::string options_block(const std::vector<std::pair<std::string, std::string>>& options) {
    std::string out;
    for (const auto& [id, name] : options) out += fmt::format("{}: {}\n", id, name);
    return out;
}

std::optional<std::string> parse_choice(const std::string& reply, const std::set<std::string>& valid) {
    static const std::regex token(R"([A-Za-z0-9_.\-]+)");
    auto t = std::string(text::trim(reply));
    for (auto it = std::sregex_iterator(t.begin(), t.end(), token); it != std::sregex_iterator(); ++it) {
        auto tok = it->str();
        while (!tok.empty() && tok.back() == '.') tok.pop_back();
        if (valid.count(tok)) return tok;
    }
    return std::nullopt;
}

struct Choice {
    std::size_t index = 0;
    bool by_provider = false;
};

// Provider pick among options, else the highest score (ties to the earlier option).
Choice choose(const std::string& task, const std::vector<std::pair<std::string, std::string>>& options,
              const std::vector<double>& scores, const std::vector<bool>& allowed, const ToolRecord& tool,
              const ServerRecord& server, const Context& ctx) {
    if (ctx.provider != nullptr && ctx.prompts != nullptr) {
        std::set<std::string> valid;
        for (std::size_t i = 0; i < options.size(); ++i) {
            if (allowed[i]) valid.insert(options[i].first);
        }
        AnalysisRequest req{task,
                            ctx.prompts->render(task, {{"name", tool.name},
                                                       {"description", tool.description},
                                                       {"summary", server_context(server)},
                                                       {"options", options_block(options)}}),
                            ""};
        auto pick = ask<std::string>(
            ctx.provider, req, [&](const std::string& r) { return parse_choice(r, valid); },
            fmt::format("{}/{}", server.repo.url, tool.name));
        if (pick) {
            for (std::size_t i = 0; i < options.size(); ++i) {
                if (options[i].first == *pick) return {i, true};
            }
        }
    }
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!allowed[i]) continue;
        if (!best || scores[i] > scores[*best]) best = i;
    }
    if (!best) throw std::logic_error(fmt::format("{}: no selectable option", task));
    return {*best, false};
}

}  // namespace

Lexicons Lexicons::load(const fs::path& asset_root) {
    const auto dir = asset_root / "lexicons";
    Lexicons l;
    Json di = read_json(dir / "direct_impact.json");
    l.impact.verbs = di.at("verbs").get<std::map<std::string, std::vector<std::string>>>();
    l.impact.memory_nouns = di.at("memory_nouns").get<std::vector<std::string>>();
    l.impact.action_nouns = di.at("action_nouns").get<std::map<std::string, std::vector<std::string>>>();
    l.impact.action_noun_order = di.at("action_noun_order").get<std::vector<std::string>>();
    l.impact.action_default = di.value("action_default", std::string("3.4"));
    for (const auto& code : l.impact.action_noun_order) {
        if (!is_functionality_code(code) || code[0] != '3' || !l.impact.action_nouns.count(code)) {
            throw ConfigError(fmt::format("direct_impact lexicon: bad action code '{}'", code));
        }
    }
    if (!is_functionality_code(l.impact.action_default)) {
        throw ConfigError("direct_impact lexicon: bad default code");
    }
    Json g = read_json(dir / "generality.json");
    l.generality.environment_general = g.at("environment_general").get<std::vector<std::string>>();
    l.generality.industry_specific = g.at("industry_specific").get<std::vector<std::string>>();
    Json p = read_json(dir / "payments.json");
    auto list = [&](const char* k) { return p.at(k).get<std::vector<std::string>>(); };
    l.payments = {list("level1"),     list("level1_ambiguous"),  list("finance_context"), list("level2"),
                  list("processors"), list("processor_actions"), list("signing"),         list("sending")};
    return l;
}

DirectImpact fallback_direct_impact(const ToolRecord& tool, const ImpactLexicon& lex) {
    const auto name = text::identifier_parts(tool.name);
    const auto desc = text::words(tool.description);
    for (const auto& w : name) {
        if (in(lex.memory_nouns, w)) return {"2.3"};
    }
    std::optional<std::string> cls;
    for (const auto* words : {&name, &desc}) {
        for (const auto& w : *words) {
            if ((cls = verb_class(w, lex))) break;
        }
        if (cls) break;
    }
    if (!cls) return {};
    if (*cls != "3") return {*cls};
    if (auto sub = action_subcode(name, lex)) return {*sub};
    if (auto sub = action_subcode(desc, lex)) return {*sub};
    return {lex.action_default};
}

std::optional<DirectImpact> parse_direct_impact(const std::string& reply) {
    static const std::regex code(R"(^(\d\.\d)(?:$|[^0-9]))");
    auto t = std::string(text::trim(reply));
    while (!t.empty() && (t.front() == '"' || t.front() == '\'' || t.front() == '`')) t.erase(t.begin());
    while (!t.empty() && (t.back() == '"' || t.back() == '\'' || t.back() == '`' || t.back() == '.')) t.pop_back();
    if (text::to_lower(t) == "none") return DirectImpact{};
    std::smatch m;
    if (std::regex_search(t, m, code) && is_functionality_code(m[1].str())) return DirectImpact{m[1].str()};
    return std::nullopt;
}

Labeled classify_direct_impact(const ToolRecord& tool, const ServerRecord& server, const Context& ctx) {
    if (ctx.provider != nullptr && ctx.prompts != nullptr) {
        AnalysisRequest req{"direct_impact",
                            ctx.prompts->render("direct_impact",
                                                {{"name", tool.name},
                                                 {"description", tool.description},
                                                 {"schema", tool.input_schema.value_or("none")},
                                                 {"server", server_context(server)}}),
                            ""};
        if (auto got = ask<DirectImpact>(ctx.provider, req, parse_direct_impact,
                                         fmt::format("{}/{}", server.repo.url, tool.name))) {
            return {*got, "provider"};
        }
    }
    return {fallback_direct_impact(tool, ctx.lexicons->impact), "fallback"};
}

GeneralityLabel fallback_generality(const ServerRecord& server, const GeneralityLexicon& lex) {
    bool documented = false;
    std::string body = server.description + " " + server.extraction.summary;
    for (const auto& t : server.extraction.tools) {
        if (!text::trim(t.description).empty()) documented = true;
        body += " " + text::join(text::identifier_parts(t.name), " ") + " " + t.description;
        if (t.input_schema) body += " " + *t.input_schema;
    }
    GeneralityLabel g;
    if (!documented) {
        g.industry_general = true;
        g.environment_general = true;
        g.action_space_description = "insufficient documentation";
        return g;
    }
    const auto norm = text::word_normal_form(body);
    auto env = hits(norm, lex.environment_general);
    auto ind = hits(norm, lex.industry_specific);
    g.environment_general = !env.empty();
    g.industry_general = ind.empty();
    g.action_space_description =
        fmt::format("environment terms: [{}]; industry terms: [{}]", text::join(env, ", "), text::join(ind, ", "));
    return g;
}

PaymentsLabel fallback_payments(const ServerRecord& server, const PaymentsLexicon& lex) {
    std::string body = server.description + " " + server.extraction.summary + " " + server.readme_text;
    for (const auto& t : server.extraction.tools) {
        body += " " + t.name + " " + t.description;
        if (t.input_schema) body += " " + *t.input_schema;
    }
    const auto norm = text::word_normal_form(body);
    auto signing = hits(norm, lex.signing);
    auto sending = hits(norm, lex.sending);
    auto processors = hits(norm, lex.processors);
    auto proc_actions = hits(norm, lex.processor_actions);
    auto requests = hits(norm, lex.level2);
    auto info = hits(norm, lex.level1);
    auto ambiguous = hits(norm, lex.level1_ambiguous);
    auto context = hits(norm, lex.finance_context);

    PaymentsLabel p;
    std::vector<std::string> evidence;
    auto note = [&](const std::vector<std::string>& v) { evidence.insert(evidence.end(), v.begin(), v.end()); };
    if (!signing.empty() && !sending.empty()) {
        p.autonomy = 4;
        note(signing);
        note(sending);
    } else if (!processors.empty() && !proc_actions.empty()) {
        p.autonomy = 3;
        note(processors);
        note(proc_actions);
    } else if (!requests.empty()) {
        p.autonomy = 2;
        note(requests);
    } else if (!info.empty() || !processors.empty() || (!ambiguous.empty() && !context.empty())) {
        p.autonomy = 1;
        note(info);
        note(processors);
        if (!context.empty()) note(ambiguous);
    }
    p.analysis = p.autonomy == 0 ? "no payment functionality"
                                 : fmt::format("payment terms: {}", text::join(evidence, ", "));
    return p;
}

std::optional<ServerLabels> parse_server_labels(const std::string& reply) {
    auto doc = extract_json_object(reply);
    if (!doc) return std::nullopt;
    auto ind = as_flag(*doc, "generality_industry", 1);
    auto env = as_flag(*doc, "generality_environment", 1);
    auto pay = as_flag(*doc, "payments_autonomy", 4);
    if (!ind || !env || !pay) return std::nullopt;
    ServerLabels l;
    l.generality.industry_general = *ind == 1;
    l.generality.environment_general = *env == 1;
    auto str = [&](const char* k) {
        return doc->contains(k) && (*doc)[k].is_string() ? (*doc)[k].get<std::string>() : std::string{};
    };
    l.generality.action_space_description = str("action_space_description");
    l.payments.autonomy = *pay;
    l.payments.analysis = str("payments_analysis");
    l.method = "provider";
    return l;
}

ServerLabels classify_server_labels(const ServerRecord& server, const Context& ctx) {
    if (ctx.provider != nullptr && ctx.prompts != nullptr) {
        AnalysisRequest req{"server_classification",
                            ctx.prompts->render("server_classification", {{"server", server.repo.name}}),
                            server_block(server)};
        if (auto got = ask<ServerLabels>(ctx.provider, req, parse_server_labels, server.repo.url)) return *got;
    }
    return {fallback_generality(server, ctx.lexicons->generality),
            fallback_payments(server, ctx.lexicons->payments), "fallback"};
}

GeneralityLabel classify_generality(const ServerRecord& server, const Context& ctx) {
    return classify_server_labels(server, ctx).generality;
}

PaymentsLabel classify_payments(const ServerRecord& server, const Context& ctx) {
    return classify_server_labels(server, ctx).payments;
}

std::string tool_text(const ToolRecord& tool) {
    return text::join(text::identifier_parts(tool.name), " ") + ". " + tool.description;
}

namespace {

TaskAssignment classify_task_impl(const ToolRecord& tool, const ServerRecord& server, const Context& ctx,
                                  bool& all_provider) {
    if (ctx.hierarchy == nullptr || ctx.embedder == nullptr) {
        throw ConfigError("task classification needs a hierarchy and its embedder");
    }
    const auto& h = *ctx.hierarchy;
    const Vector v = ctx.embedder->embed({tool_text(tool)}).at(0);
    TaskAssignment a;

    // Level 1: every category is shown; only those with children can be chosen.
    std::vector<std::pair<std::string, std::string>> l1_opts;
    std::vector<double> l1_scores;
    std::vector<bool> l1_ok;
    for (std::size_t i = 0; i < h.l1.size(); ++i) {
        l1_opts.emplace_back(h.l1[i].id, h.l1[i].name);
        auto kids = h.children(h.l1[i].id);
        double s = cosine(v, h.l1_vectors.at(i));
        for (auto k : kids) s = std::max(s, cosine(v, h.l2[k].centroid));
        l1_scores.push_back(s);
        l1_ok.push_back(!kids.empty());
    }
    auto c1 = choose("onet_l1", l1_opts, l1_scores, l1_ok, tool, server, ctx);
    a.l1_id = h.l1[c1.index].id;
    a.options_presented += static_cast<int>(l1_opts.size());

    auto kids = h.children(a.l1_id);
    std::vector<std::pair<std::string, std::string>> l2_opts;
    std::vector<double> l2_scores;
    for (auto k : kids) {
        l2_opts.emplace_back(h.l2[k].id, h.l2[k].name);
        l2_scores.push_back(std::max(cosine(v, h.l2_vectors.at(k)), cosine(v, h.l2[k].centroid)));
    }
    auto c2 = choose("onet_l2", l2_opts, l2_scores, std::vector<bool>(kids.size(), true), tool, server, ctx);
    const auto& l2 = h.l2[kids[c2.index]];
    a.l2_id = l2.id;
    a.options_presented += static_cast<int>(l2_opts.size());

    std::vector<std::pair<std::string, std::string>> t_opts;
    std::vector<double> t_scores;
    for (const auto& m : l2.members) {
        auto idx = h.task_index(m);
        t_opts.emplace_back(m, h.tasks[idx].text);
        t_scores.push_back(cosine(v, h.task_vectors.at(idx)));
    }
    auto c3 = choose("onet_task", t_opts, t_scores, std::vector<bool>(t_opts.size(), true), tool, server, ctx);
    const auto& task = h.tasks[h.task_index(l2.members[c3.index])];
    a.task_id = task.task_id;
    a.options_presented += static_cast<int>(t_opts.size());

    a.soc_distribution = task.soc_distribution;
    a.impact_score = task.impact_score;
    if (task.impact_score) a.stakes_bucket = taxonomy::stakes_bucket(*task.impact_score);
    a.low_confidence = true;
    all_provider = c1.by_provider && c2.by_provider && c3.by_provider;
    return a;
}

}  // namespace

TaskAssignment classify_task(const ToolRecord& tool, const ServerRecord& server, const Context& ctx) {
    bool all_provider = false;
    return classify_task_impl(tool, server, ctx, all_provider);
}

ServerAggregate aggregate_server(const std::vector<ToolClassification>& tools) {
    if (tools.empty()) throw std::invalid_argument("aggregate_server needs at least one tool");
    ServerAggregate out;
    for (const auto& t : tools) {
        if (!t.direct_impact.classified()) continue;
        auto c = t.direct_impact.category();
        if (!out.direct_impact || static_cast<int>(c) > static_cast<int>(*out.direct_impact)) out.direct_impact = c;
    }
    std::map<std::string, double> domain_count, soc_weight;
    for (const auto& t : tools) {
        if (!t.task.l1_id.empty()) domain_count[t.task.l1_id] += 1;
        for (const auto& [code, w] : t.task.soc_distribution) soc_weight[code] += w;
    }
    auto mode = [&](const std::map<std::string, double>& counts, auto values_of) {
        double best = 0;
        for (const auto& [_, c] : counts) best = std::max(best, c);
        std::set<std::string> tied;
        for (const auto& [k, c] : counts) {
            if (std::abs(c - best) <= 1e-12) tied.insert(k);
        }
        for (const auto& t : tools) {
            for (const auto& k : values_of(t)) {
                if (tied.count(k)) return k;
            }
        }
        return std::string{};
    };
    out.domain = mode(domain_count, [](const ToolClassification& t) {
        return t.task.l1_id.empty() ? std::vector<std::string>{} : std::vector<std::string>{t.task.l1_id};
    });
    out.soc = mode(soc_weight, [](const ToolClassification& t) {
        std::vector<std::pair<double, std::string>> ranked;
        for (const auto& [code, w] : t.task.soc_distribution) ranked.emplace_back(-w, code);
        std::sort(ranked.begin(), ranked.end());
        std::vector<std::string> codes;
        for (const auto& [_, c] : ranked) codes.push_back(c);
        return codes;
    });
    return out;
}

ServerClassification classify_server(const ServerRecord& server, const Context& ctx) {
    if (ctx.lexicons == nullptr) throw ConfigError("classification needs lexicons");
    ServerClassification sc;
    sc.server_id = server.id;
    auto labels = classify_server_labels(server, ctx);
    sc.generality = labels.generality;
    sc.payments = labels.payments;
    sc.method = labels.method;
    for (const auto& tool : server.extraction.tools) {
        ToolClassification tc;
        tc.tool_name = tool.name;
        auto impact = classify_direct_impact(tool, server, ctx);
        tc.direct_impact = impact.impact;
        bool task_by_provider = false;
        if (ctx.hierarchy != nullptr) tc.task = classify_task_impl(tool, server, ctx, task_by_provider);
        bool impact_by_provider = impact.method == "provider";
        if (ctx.hierarchy == nullptr) task_by_provider = impact_by_provider;
        tc.method = impact_by_provider && task_by_provider    ? "provider"
                    : !impact_by_provider && !task_by_provider ? "fallback"
                                                               : "mixed";
        sc.tools.push_back(std::move(tc));
    }
    if (!sc.tools.empty()) {
        auto agg = aggregate_server(sc.tools);
        sc.direct_impact = agg.direct_impact;
        sc.domain = agg.domain;
        sc.soc = agg.soc;
    }
    return sc;
}

}  // namespace mcpscope::classify
