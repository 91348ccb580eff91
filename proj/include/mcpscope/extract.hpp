#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mcpscope/model.hpp"
#include "mcpscope/provider.hpp"

namespace mcpscope::extract {

struct ExtractLexicon {
    std::vector<std::string> tool_headings;     // heading substrings that open a tool section
    std::vector<std::string> removed_sections;  // heading substrings whose sections are dropped
    std::string mcp_marker = "mcp";

    static ExtractLexicon load(const fs::path& asset_root = asset_dir());
};

/// README with unwanted sections removed, links collapsed to their text, images and
/// bare URLs dropped. Never contains a URL.
std::string filter_content(std::string_view readme, const ExtractLexicon& lex);

/// Rule-based extraction: tables and definition-style lines under tool headings.
ExtractionResult fallback_extract(const RawServerDoc& doc, const ExtractLexicon& lex);

/// Schema check for a provider reply. Tool names are trimmed and deduplicated (first
/// description wins); filtered_content is URL-stripped.
std::optional<ExtractionResult> parse_extraction(const std::string& reply);

/// Splits at paragraph boundaries into chunks of at most `limit` characters.
std::vector<std::string> chunk_readme(std::string_view readme, std::size_t limit = 50000);

struct ProcessOutcome {
    ExtractionResult result;
    std::string method;  // provider | fallback
};

/// Provider path with per-chunk validation; any chunk that fails after its retry sends
/// the whole document to the fallback.
ProcessOutcome process_readme(const RawServerDoc& doc, TextAnalysisProvider* provider,
                              const PromptLibrary& prompts, const ExtractLexicon& lex);

bool validate_server(const ExtractionResult& result);

ServerRecord make_server_record(const ServerCandidate& candidate, const RawServerDoc& doc,
                                ProcessOutcome outcome);

}  // namespace mcpscope::extract
