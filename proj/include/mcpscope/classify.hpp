#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcpscope/embedding.hpp"
#include "mcpscope/model.hpp"
#include "mcpscope/provider.hpp"
#include "mcpscope/taxonomy.hpp"

namespace mcpscope::classify {

struct ImpactLexicon {
    std::map<std::string, std::vector<std::string>> verbs;         // code (or "3") -> verbs
    std::vector<std::string> memory_nouns;
    std::map<std::string, std::vector<std::string>> action_nouns;  // 3.x -> nouns
    std::vector<std::string> action_noun_order;
    std::string action_default = "3.4";
};

struct GeneralityLexicon {
    std::vector<std::string> environment_general;
    std::vector<std::string> industry_specific;
};

struct PaymentsLexicon {
    std::vector<std::string> level1, level1_ambiguous, finance_context, level2;
    std::vector<std::string> processors, processor_actions, signing, sending;
};

struct Lexicons {
    ImpactLexicon impact;
    GeneralityLexicon generality;
    PaymentsLexicon payments;

    static Lexicons load(const fs::path& asset_root = asset_dir());
};

/// Shared context for one classification pass. provider == nullptr selects the rule path.
struct Context {
    TextAnalysisProvider* provider = nullptr;
    const PromptLibrary* prompts = nullptr;
    const Lexicons* lexicons = nullptr;
    const taxonomy::Hierarchy* hierarchy = nullptr;
    EmbeddingProvider* embedder = nullptr;  // same embedder (and state) the hierarchy was built with
};

// ---- direct impact ----

/// Verb lexicon on the tool name parts (then the description): perception, planning,
/// analysis, memory; action verbs pick their 3.x subcode by noun, default software extension.
DirectImpact fallback_direct_impact(const ToolRecord& tool, const ImpactLexicon& lex);

/// "d.d" from the code list, or "None". Anything else is a schema failure.
std::optional<DirectImpact> parse_direct_impact(const std::string& reply);

struct Labeled {
    DirectImpact impact;
    std::string method;
};
Labeled classify_direct_impact(const ToolRecord& tool, const ServerRecord& server, const Context& ctx);

// ---- server labels ----

/// Servers whose tools carry no descriptions default to general on both axes.
GeneralityLabel fallback_generality(const ServerRecord& server, const GeneralityLexicon& lex);
PaymentsLabel fallback_payments(const ServerRecord& server, const PaymentsLexicon& lex);

struct ServerLabels {
    GeneralityLabel generality;
    PaymentsLabel payments;
    std::string method;
};

std::optional<ServerLabels> parse_server_labels(const std::string& reply);

/// One provider request answers both generality and payments.
ServerLabels classify_server_labels(const ServerRecord& server, const Context& ctx);
GeneralityLabel classify_generality(const ServerRecord& server, const Context& ctx);
PaymentsLabel classify_payments(const ServerRecord& server, const Context& ctx);

// ---- task domain ----

/// Text embedded for a tool: identifier words of the name plus the description.
std::string tool_text(const ToolRecord& tool);

/// Three sequential choices: L1 among those with children, L2 among its children, task
/// among the L2's members. Each level asks the provider and falls back to cosine ranking.
TaskAssignment classify_task(const ToolRecord& tool, const ServerRecord& server, const Context& ctx);

// ---- aggregation ----

struct ServerAggregate {
    std::optional<ImpactCategory> direct_impact;
    std::string domain;
    std::string soc;
};

/// Max direct impact (perception < reasoning < action); mode domain and weighted-mode SOC,
/// ties going to whichever tied value the earliest tool carries.
ServerAggregate aggregate_server(const std::vector<ToolClassification>& tools);

ServerClassification classify_server(const ServerRecord& server, const Context& ctx);

}  // namespace mcpscope::classify
