#include "mcpscope/github.hpp"

#include <cstdlib>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "mcpscope/common/errors.hpp"

namespace mcpscope {

GithubApi::GithubApi(http::Client& client, std::string api_base, std::string token_env)
    : client_(client), base_(std::move(api_base)), token_env_(std::move(token_env)) {
    while (!base_.empty() && base_.back() == '/') base_.pop_back();
}

http::Headers GithubApi::headers(bool raw) const {
    http::Headers h{{"Accept", raw ? "application/vnd.github.raw" : "application/vnd.github+json"},
                    {"User-Agent", "mcp-scope"},
                    {"X-GitHub-Api-Version", "2022-11-28"}};
    if (const char* tok = std::getenv(token_env_.c_str()); tok && *tok) {
        h["Authorization"] = fmt::format("Bearer {}", tok);
    }
    return h;
}

namespace {

bool gone(int status) { return status == 404 || status == 410 || status == 451; }

}  // namespace

std::optional<Json> GithubApi::repo(const RepoRef& r) {
    auto resp = client_.get(fmt::format("{}/repos/{}/{}", base_, r.owner, r.name), headers());
    if (gone(resp.status)) return std::nullopt;
    if (!resp.ok()) {
        throw RemoteError(fmt::format("repository metadata for {}: status {}", r.url, resp.status),
                          resp.status, resp.status == 0 || resp.status >= 500);
    }
    return Json::parse(resp.body);
}

std::optional<std::string> GithubApi::readme(const RepoRef& r, const std::string& ref) {
    auto url = fmt::format("{}/repos/{}/{}/readme", base_, r.owner, r.name);
    if (!ref.empty()) url += "?ref=" + http::url_encode(ref);
    auto resp = client_.get(url, headers(true));
    if (gone(resp.status)) return std::nullopt;
    if (!resp.ok()) {
        throw RemoteError(fmt::format("readme for {}: status {}", r.url, resp.status), resp.status,
                          resp.status == 0 || resp.status >= 500);
    }
    // The raw media type returns the file itself; tolerate the JSON envelope as well.
    if (!resp.body.empty() && resp.body.front() == '{') {
        auto j = Json::parse(resp.body, nullptr, false);
        if (j.is_object() && j.contains("content") && j.value("encoding", "") == "base64") {
            return base64_decode(j["content"].get<std::string>());
        }
    }
    return resp.body;
}

std::optional<std::string> GithubApi::commit_before(const RepoRef& r, Timestamp until) {
    auto url = fmt::format("{}/repos/{}/{}/commits?until={}&per_page=1", base_, r.owner, r.name,
                           http::url_encode(format_timestamp(until)));
    auto resp = client_.get(url, headers());
    if (gone(resp.status) || resp.status == 409) return std::nullopt;  // 409: empty repository
    if (!resp.ok()) {
        throw RemoteError(fmt::format("commits for {}: status {}", r.url, resp.status), resp.status,
                          resp.status == 0 || resp.status >= 500);
    }
    auto j = Json::parse(resp.body);
    if (!j.is_array() || j.empty()) return std::nullopt;
    return j[0].value("sha", std::string{});
}

std::vector<Json> GithubApi::list(const std::string& url, int max_pages, int per_page) {
    std::vector<Json> out;
    const char sep = url.find('?') == std::string::npos ? '?' : '&';
    for (int page = 1; page <= max_pages; ++page) {
        auto resp = client_.get(fmt::format("{}{}per_page={}&page={}", url, sep, per_page, page), headers());
        if (!resp.ok()) {
            if (page == 1) {
                throw RemoteError(fmt::format("GET {}: status {}", url, resp.status), resp.status,
                                  resp.status == 0 || resp.status >= 500);
            }
            break;
        }
        auto j = Json::parse(resp.body);
        if (!j.is_array()) throw RemoteError(fmt::format("GET {}: expected an array", url), resp.status, false);
        for (auto& row : j) out.push_back(std::move(row));
        if (static_cast<int>(j.size()) < per_page) break;
    }
    return out;
}

Json GithubApi::get_json(const std::string& path_and_query) {
    return Json::parse(client_.get_ok(base_ + path_and_query, headers()).body);
}

std::string base64_decode(std::string_view in) {
    std::string clean;
    clean.reserve(in.size());
    for (char c : in) {
        if (c != '\n' && c != '\r' && c != ' ') clean += c;
    }
    if (clean.size() % 4 != 0) throw std::invalid_argument("base64 input length is not a multiple of 4");
    std::string out(clean.size() / 4 * 3, '\0');
    int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                            reinterpret_cast<const unsigned char*>(clean.data()), static_cast<int>(clean.size()));
    if (n < 0) throw std::invalid_argument("malformed base64");
    std::size_t pad = 0;
    if (!clean.empty() && clean.back() == '=') ++pad;
    if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

}  // namespace mcpscope
