#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mcpscope/common/http.hpp"
#include "mcpscope/common/io.hpp"
#include "mcpscope/model.hpp"

namespace mcpscope {

/// Thin client over the code host's REST interface. The token is read from the
/// environment variable named by `token_env` and never stored elsewhere.
class GithubApi {
public:
    GithubApi(http::Client& client, std::string api_base = "https://api.github.com",
              std::string token_env = "GITHUB_TOKEN");

    [[nodiscard]] const std::string& base() const { return base_; }
    [[nodiscard]] http::Headers headers(bool raw = false) const;

    /// Repository metadata, or nullopt when the repository is gone (404/410/451).
    std::optional<Json> repo(const RepoRef& r);

    /// README text at `ref` (default branch when empty); nullopt when there is none.
    std::optional<std::string> readme(const RepoRef& r, const std::string& ref = "");

    /// Newest commit sha on the default branch at or before `until`; nullopt for none.
    std::optional<std::string> commit_before(const RepoRef& r, Timestamp until);

    /// Every page of a list endpoint ("<base>/repos/o/n/commits?..."), up to `max_pages`.
    std::vector<Json> list(const std::string& url, int max_pages = 10, int per_page = 100);

    /// Raw GET relative to the api base; throws RemoteError on non-2xx.
    Json get_json(const std::string& path_and_query);

    http::Client& client() { return client_; }

private:
    http::Client& client_;
    std::string base_;
    std::string token_env_;
};

/// Decodes standard base64, ignoring embedded newlines.
std::string base64_decode(std::string_view in);

}  // namespace mcpscope
