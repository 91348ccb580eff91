#include "mcpscope/common/text.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

namespace mcpscope::text {

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

const std::regex& url_regex() {
    static const std::regex re(R"([A-Za-z][A-Za-z0-9+.\-]*://[^\s)>\]"'`]*|www\.[^\s)>\]"'`]*)",
                               std::regex::icase | std::regex::optimize);
    return re;
}

}  // namespace

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            break;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::vector<std::string> split_lines(std::string_view s) {
    auto lines = split(s, '\n');
    for (auto& line : lines) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
    }
    return lines;
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return true;
    auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end(),
                          [](char a, char b) {
                              return std::tolower(static_cast<unsigned char>(a)) ==
                                     std::tolower(static_cast<unsigned char>(b));
                          });
    return it != haystack.end();
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && contains_ci(s.substr(0, prefix.size()), prefix);
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    if (from.empty()) return s;
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

std::vector<std::string> words(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (is_alnum(c)) {
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<std::string> identifier_parts(std::string_view name) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(to_lower(cur));
            cur.clear();
        }
    };
    for (std::size_t i = 0; i < name.size(); ++i) {
        char c = name[i];
        if (!is_alnum(c)) {
            flush();
            continue;
        }
        bool upper = std::isupper(static_cast<unsigned char>(c)) != 0;
        if (upper && !cur.empty()) {
            bool prev_lower = std::islower(static_cast<unsigned char>(cur.back())) != 0 ||
                              std::isdigit(static_cast<unsigned char>(cur.back())) != 0;
            bool next_lower = i + 1 < name.size() &&
                              std::islower(static_cast<unsigned char>(name[i + 1])) != 0;
            // "getHTTPResponse" -> get, http, response
            if (prev_lower || next_lower) flush();
        }
        cur += c;
    }
    flush();
    return out;
}

bool contains_url(std::string_view s) {
    return std::regex_search(s.begin(), s.end(), url_regex());
}

std::string strip_urls(std::string_view s) {
    return std::regex_replace(std::string(s), url_regex(), "");
}

std::string word_normal_form(std::string_view s) {
    std::string out = " ";
    for (char c : s) {
        if (is_alnum(c)) {
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (out.back() != ' ') {
            out += ' ';
        }
    }
    if (out.back() != ' ') out += ' ';
    return out;
}

bool contains_word_normalized(std::string_view normalized_haystack, std::string_view phrase) {
    std::string needle = word_normal_form(phrase);
    if (needle == " ") return false;
    return normalized_haystack.find(needle) != std::string_view::npos;
}

bool contains_word(std::string_view haystack, std::string_view phrase) {
    return contains_word_normalized(word_normal_form(haystack), phrase);
}

}  // namespace mcpscope::text
