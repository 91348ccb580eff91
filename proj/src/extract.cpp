#include "mcpscope/extract.hpp"

#include <regex>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "mcpscope/common/text.hpp"

namespace mcpscope::extract {

namespace {

const std::string kEmDash = "\xE2\x80\x94";
const std::string kEnDash = "\xE2\x80\x93";

struct Heading {
    int level = 0;
    std::string text;
};

std::optional<Heading> parse_heading(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && i < 4 && line[i] == ' ') ++i;
    std::size_t hashes = 0;
    while (i + hashes < line.size() && line[i + hashes] == '#') ++hashes;
    if (hashes == 0 || hashes > 6) return std::nullopt;
    std::size_t rest = i + hashes;
    if (rest < line.size() && line[rest] != ' ' && line[rest] != '\t') return std::nullopt;
    auto text = std::string(text::trim(line.substr(rest)));
    while (!text.empty() && text.back() == '#') text.pop_back();
    return Heading{static_cast<int>(hashes), std::string(text::trim(text))};
}

std::string clean_inline(std::string_view s);

std::string heading_label(const Heading& h) {
    return std::string(text::trim(clean_inline(h.text)));
}

bool is_fence(std::string_view line) {
    auto t = text::trim(line);
    return t.starts_with("```") || t.starts_with("~~~");
}

bool matches_any(std::string_view heading, const std::vector<std::string>& needles) {
    for (const auto& n : needles) {
        if (text::contains_ci(heading, n)) return true;
    }
    return false;
}

std::size_t indent_of(std::string_view line) {
    std::size_t n = 0;
    for (char c : line) {
        if (c == ' ') {
            ++n;
        } else if (c == '\t') {
            n += 4;
        } else {
            break;
        }
    }
    return n;
}

std::string strip_emphasis(std::string s) {
    s = std::string(text::trim(s));
    for (const char* wrap : {"**", "__", "`", "*", "_"}) {
        std::string w = wrap;
        if (s.size() > 2 * w.size() && s.starts_with(w) && s.ends_with(w)) {
            s = s.substr(w.size(), s.size() - 2 * w.size());
        }
    }
    auto paren = s.find('(');
    if (paren != std::string::npos && paren > 0 && s.back() == ')') s = s.substr(0, paren);
    return std::string(text::trim(s));
}

bool is_identifier(std::string_view s) {
    static const std::regex re(R"(^[A-Za-z][A-Za-z0-9_.\-/:]{0,79}$)");
    return std::regex_match(s.begin(), s.end(), re) && s.back() != ':';
}

// Unformatted names need a visible identifier shape to separate them from prose labels.
bool looks_like_code_name(std::string_view s) {
    if (!is_identifier(s)) return false;
    if (s.find('_') != std::string_view::npos) return true;
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (std::islower(static_cast<unsigned char>(s[i - 1])) &&
            std::isupper(static_cast<unsigned char>(s[i]))) {
            return true;
        }
    }
    return false;
}

std::string normalize_dashes(std::string s) {
    s = text::replace_all(std::move(s), kEmDash, " - ");
    return text::replace_all(std::move(s), kEnDash, " - ");
}

std::string clean_inline(std::string_view s) {
    static const std::regex image(R"(!\[[^\]]*\]\([^)]*\))");
    static const std::regex link(R"(\[([^\]]*)\]\([^)]*\))");
    static const std::regex tag(R"(<[^>]+>)");
    std::string out = std::regex_replace(std::string(s), image, "");
    out = std::regex_replace(out, link, "$1");
    out = std::regex_replace(out, tag, "");
    return text::strip_urls(out);
}

struct Definition {
    std::string name;
    std::string description;
};

std::optional<Definition> parse_definition(const std::string& raw) {
    static const std::regex backticked(R"(^\s*(?:[-*+]\s+|\d+\.\s+)?(?:\*\*)?`([^`]+)`(?:\*\*)?\s*(?:[:\-]\s*)?(.*)$)");
    static const std::regex bold(R"(^\s*(?:[-*+]\s+|\d+\.\s+)?\*\*([^*]+?)\*\*\s*(?:[:\-]\s*)?(.*)$)");
    static const std::regex plain(R"(^\s*(?:[-*+]\s+|\d+\.\s+)?([A-Za-z][A-Za-z0-9_.\-/]*)\s*(?::|\s-)\s+(.+)$)");
    std::string line = normalize_dashes(raw);
    std::smatch m;
    if (std::regex_match(line, m, backticked) || std::regex_match(line, m, bold)) {
        auto name = strip_emphasis(m[1].str());
        if (!name.empty() && name.back() == ':') name.pop_back();
        if (!is_identifier(name)) return std::nullopt;
        return Definition{name, std::string(text::trim(clean_inline(m[2].str())))};
    }
    if (std::regex_match(line, m, plain)) {
        auto name = m[1].str();
        if (!looks_like_code_name(name)) return std::nullopt;
        return Definition{name, std::string(text::trim(clean_inline(m[2].str())))};
    }
    return std::nullopt;
}

std::vector<std::string> table_cells(std::string_view line) {
    auto t = std::string(text::trim(line));
    if (t.starts_with("|")) t.erase(0, 1);
    if (t.ends_with("|")) t.pop_back();
    std::vector<std::string> cells;
    for (auto& c : text::split(t, '|')) cells.emplace_back(text::trim(c));
    return cells;
}

bool is_table_separator(std::string_view line) {
    static const std::regex re(R"(^\s*\|?\s*:?-{2,}:?\s*(\|\s*:?-{2,}:?\s*)*\|?\s*$)");
    return std::regex_match(line.begin(), line.end(), re);
}

class ToolCollector {
public:
    void add(std::string name, std::string description) {
        if (name.empty() || !seen_.insert(name).second) return;
        tools_.push_back(ToolRecord{std::move(name), std::move(description), std::nullopt});
    }
    void attach_schema(const std::string& line) {
        if (tools_.empty() || !open_) return;
        auto& s = tools_.back().input_schema;
        s = s ? *s + "\n" + line : line;
    }
    void open(bool v) { open_ = v; }
    bool is_open() const { return open_; }
    bool last_added_is(const std::string& name) const {
        return !tools_.empty() && tools_.back().name == name;
    }
    std::vector<ToolRecord> take() { return std::move(tools_); }

private:
    std::vector<ToolRecord> tools_;
    std::set<std::string> seen_;
    bool open_ = false;
};

std::vector<ToolRecord> harvest_tools(const std::vector<std::string>& lines, const ExtractLexicon& lex) {
    ToolCollector tools;
    int tool_level = 0;
    bool in_code = false;
    std::size_t bullet_indent = 0;
    std::optional<std::string> heading_tool;  // awaiting a description line
    bool in_heading_tool = false;            // body of a tool that has its own heading
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& line = lines[i];
        if (is_fence(line)) {
            in_code = !in_code;
            tools.open(false);
            continue;
        }
        if (in_code) continue;
        if (auto h = parse_heading(line)) {
            tools.open(false);
            heading_tool.reset();
            in_heading_tool = false;
            if (tool_level > 0 && h->level <= tool_level) tool_level = 0;
            if (tool_level > 0) {
                auto name = strip_emphasis(h->text);
                bool ticked = h->text.find('`') != std::string::npos;
                if ((ticked && is_identifier(name)) || looks_like_code_name(name)) {
                    heading_tool = name;
                    continue;
                }
            }
            if (tool_level == 0 && matches_any(heading_label(*h), lex.tool_headings)) tool_level = h->level;
            continue;
        }
        if (tool_level == 0) continue;
        auto trimmed = text::trim(line);
        if (trimmed.empty()) {
            if (!in_heading_tool) tools.open(false);
            continue;
        }
        if (heading_tool) {
            if (trimmed.starts_with("|")) {
                tools.add(*heading_tool, "");
                heading_tool.reset();
            } else {
                auto desc = std::string(trimmed);
                if (desc.starts_with("- ") || desc.starts_with("* ")) desc = desc.substr(2);
                tools.add(*heading_tool, std::string(text::trim(clean_inline(desc))));
                tools.open(tools.last_added_is(*heading_tool));
                heading_tool.reset();
                in_heading_tool = true;
                continue;
            }
        }
        if (trimmed.starts_with("|") && i + 1 < lines.size() && is_table_separator(lines[i + 1])) {
            auto header = table_cells(line);
            int name_col = -1, desc_col = -1;
            for (std::size_t c = 0; c < header.size(); ++c) {
                auto h = text::to_lower(header[c]);
                if (name_col < 0 && (h.find("name") != std::string::npos || h.find("tool") != std::string::npos)) {
                    name_col = static_cast<int>(c);
                } else if (desc_col < 0 && h.find("desc") != std::string::npos) {
                    desc_col = static_cast<int>(c);
                }
            }
            if (name_col < 0) name_col = 0;
            if (desc_col < 0) desc_col = name_col + 1;
            i += 2;
            for (; i < lines.size() && text::trim(lines[i]).starts_with("|"); ++i) {
                auto cells = table_cells(lines[i]);
                if (static_cast<int>(cells.size()) <= name_col) continue;
                auto name = strip_emphasis(cells[name_col]);
                if (!is_identifier(name)) continue;
                std::string desc = static_cast<int>(cells.size()) > desc_col ? cells[desc_col] : "";
                tools.add(name, std::string(text::trim(clean_inline(desc))));
            }
            --i;
            tools.open(false);
            continue;
        }
        auto indent = indent_of(line);
        if (in_heading_tool) {
            tools.attach_schema(std::string(trimmed));
            continue;
        }
        // Continuation lines under a tool bullet hold its parameters.
        if (tools.is_open() && indent > bullet_indent) {
            tools.attach_schema(std::string(trimmed));
            continue;
        }
        if (auto d = parse_definition(line)) {
            tools.add(d->name, d->description);
            tools.open(tools.last_added_is(d->name));
            bullet_indent = indent;
            continue;
        }
        tools.open(false);
    }
    return tools.take();
}

std::string first_sentence(const std::vector<std::string>& lines) {
    bool in_code = false;
    for (const auto& line : lines) {
        if (is_fence(line)) {
            in_code = !in_code;
            continue;
        }
        if (in_code || parse_heading(line)) continue;
        auto t = std::string(text::trim(line));
        if (t.empty() || t.starts_with("|") || t.starts_with("<") || t.starts_with("[![") ||
            t.starts_with("![") || t.starts_with(">") || t.starts_with("-") || t.starts_with("*")) {
            continue;
        }
        auto c = std::string(text::trim(clean_inline(t)));
        if (c.size() < 12) continue;
        auto stop = c.find(". ");
        if (stop != std::string::npos) c = c.substr(0, stop + 1);
        if (c.size() > 300) c = c.substr(0, 300);
        return c;
    }
    return "";
}

}  // namespace

ExtractLexicon ExtractLexicon::load(const fs::path& asset_root) {
    Json doc = read_json(asset_root / "lexicons" / "extract.json");
    ExtractLexicon lex;
    lex.tool_headings = doc.at("tool_headings").get<std::vector<std::string>>();
    lex.removed_sections = doc.at("removed_sections").get<std::vector<std::string>>();
    lex.mcp_marker = doc.value("mcp_marker", std::string("mcp"));
    return lex;
}

std::string filter_content(std::string_view readme, const ExtractLexicon& lex) {
    static const std::regex ref_def(R"(^\s*\[[^\]]+\]:\s*\S+.*$)");
    std::string out;
    int removed_level = 0;
    bool in_code = false;
    for (const auto& line : text::split_lines(readme)) {
        if (!in_code) {
            if (auto h = parse_heading(line)) {
                if (removed_level > 0 && h->level <= removed_level) removed_level = 0;
                if (removed_level == 0 && matches_any(heading_label(*h), lex.removed_sections) &&
                    !matches_any(heading_label(*h), lex.tool_headings)) {
                    removed_level = h->level;
                }
            }
        }
        if (is_fence(line)) in_code = !in_code;
        if (removed_level > 0) continue;
        if (!in_code && std::regex_match(line, ref_def)) continue;
        auto cleaned = clean_inline(line);
        auto t = text::trim(cleaned);
        if (t.empty() && !line.empty() && !text::trim(line).empty()) continue;  // badge-only lines
        out += std::string(cleaned);
        out += '\n';
    }
    static const std::regex blank_runs(R"(\n{3,})");
    out = std::regex_replace(out, blank_runs, "\n\n");
    return std::string(text::trim(out));
}

ExtractionResult fallback_extract(const RawServerDoc& doc, const ExtractLexicon& lex) {
    auto lines = text::split_lines(doc.readme_text);
    ExtractionResult r;
    r.tools = harvest_tools(lines, lex);
    r.summary = first_sentence(lines);
    if (r.summary.empty()) r.summary = std::string(text::trim(text::strip_urls(doc.description)));
    r.filtered_content = filter_content(doc.readme_text, lex);
    r.is_mcp_server = !r.tools.empty() && text::contains_ci(doc.readme_text, lex.mcp_marker);
    return r;
}

std::optional<ExtractionResult> parse_extraction(const std::string& reply) {
    auto doc = extract_json_object(reply);
    if (!doc) return std::nullopt;
    const Json& j = *doc;
    if (!j.contains("summary") || !j["summary"].is_string()) return std::nullopt;
    if (!j.contains("filtered_content") || !j["filtered_content"].is_string()) return std::nullopt;
    if (!j.contains("tools") || !j["tools"].is_array()) return std::nullopt;
    ExtractionResult r;
    const auto& flag = j.value("is_mcp_server", Json());
    if (flag.is_boolean()) {
        r.is_mcp_server = flag.get<bool>();
    } else if (flag.is_number_integer() && (flag.get<int>() == 0 || flag.get<int>() == 1)) {
        r.is_mcp_server = flag.get<int>() == 1;
    } else {
        return std::nullopt;
    }
    r.summary = j["summary"].get<std::string>();
    r.filtered_content = std::string(text::trim(text::strip_urls(j["filtered_content"].get<std::string>())));
    std::set<std::string> seen;
    for (const auto& t : j["tools"]) {
        if (!t.is_object() || !t.contains("name") || !t["name"].is_string()) return std::nullopt;
        auto name = std::string(text::trim(t["name"].get<std::string>()));
        if (name.empty()) return std::nullopt;
        if (!seen.insert(name).second) continue;
        ToolRecord tool{name, t.value("description", std::string{}), std::nullopt};
        if (t.contains("input_schema") && !t["input_schema"].is_null()) {
            tool.input_schema = t["input_schema"].is_string() ? t["input_schema"].get<std::string>()
                                                              : t["input_schema"].dump();
        }
        r.tools.push_back(std::move(tool));
    }
    return r;
}

std::vector<std::string> chunk_readme(std::string_view readme, std::size_t limit) {
    if (limit == 0) throw std::invalid_argument("chunk limit must be positive");
    std::vector<std::string> out;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) out.push_back(std::move(current));
        current.clear();
    };
    std::size_t pos = 0;
    while (pos < readme.size()) {
        auto next = readme.find("\n\n", pos);
        auto end = next == std::string_view::npos ? readme.size() : next + 2;
        auto para = readme.substr(pos, end - pos);
        pos = end;
        if (current.size() + para.size() <= limit) {
            current += para;
            continue;
        }
        flush();
        while (para.size() > limit) {
            std::size_t cut = limit;
            while (cut > 0 && (static_cast<unsigned char>(para[cut]) & 0xC0) == 0x80) --cut;
            if (cut == 0) cut = limit;
            out.emplace_back(para.substr(0, cut));
            para.remove_prefix(cut);
        }
        current = std::string(para);
    }
    flush();
    return out;
}

ProcessOutcome process_readme(const RawServerDoc& doc, TextAnalysisProvider* provider,
                              const PromptLibrary& prompts, const ExtractLexicon& lex) {
    if (text::trim(doc.readme_text).empty()) {
        throw std::invalid_argument(fmt::format("empty README for {}", doc.repo.url));
    }
    if (provider != nullptr) {
        auto chunks = chunk_readme(doc.readme_text);
        const auto instruction = prompts.render("readme_extraction", {});
        ExtractionResult merged;
        std::set<std::string> seen;
        bool ok = true;
        for (std::size_t c = 0; c < chunks.size(); ++c) {
            AnalysisRequest req{"readme_extraction", instruction, chunks[c]};
            auto part = ask<ExtractionResult>(provider, req, parse_extraction,
                                              fmt::format("{} chunk {}", doc.repo.url, c + 1));
            if (!part) {
                ok = false;
                break;
            }
            if (merged.summary.empty()) merged.summary = part->summary;
            merged.is_mcp_server = merged.is_mcp_server || part->is_mcp_server;
            if (!part->filtered_content.empty()) {
                if (!merged.filtered_content.empty()) merged.filtered_content += "\n\n";
                merged.filtered_content += part->filtered_content;
            }
            for (auto& t : part->tools) {
                if (seen.insert(t.name).second) merged.tools.push_back(std::move(t));
            }
        }
        if (ok) return {std::move(merged), "provider"};
        spdlog::warn("readme_extraction: rule-based extraction for {}", doc.repo.url);
    }
    return {fallback_extract(doc, lex), "fallback"};
}

bool validate_server(const ExtractionResult& result) {
    return result.is_mcp_server && !result.tools.empty();
}

ServerRecord make_server_record(const ServerCandidate& candidate, const RawServerDoc& doc,
                                ProcessOutcome outcome) {
    ServerRecord s;
    s.repo = candidate.repo;
    s.id = server_id_for(candidate.repo);
    s.extraction = std::move(outcome.result);
    s.extraction_method = std::move(outcome.method);
    s.is_official = candidate.is_official;
    s.created_at = candidate.created_at;
    s.stars = candidate.stars;
    s.description = doc.description.empty() ? candidate.description : doc.description;
    s.readme_text = doc.readme_text;
    s.snapshot_date = doc.snapshot_date;
    return s;
}

}  // namespace mcpscope::extract
