// cpp-httplib is compiled in this translation unit only.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <algorithm>
#include <cctype>

#include "mcpscope/common/http.hpp"

namespace mcpscope::http {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // /path?query
};

SplitUrl split_url(const std::string& url) {
    auto scheme = url.find("://");
    auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

Response convert(const httplib::Result& res) {
    Response out;
    if (!res) return out;
    out.status = res->status;
    out.body = res->body;
    for (const auto& [k, v] : res->headers) {
        std::string key = k;
        std::transform(key.begin(), key.end(), key.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        out.headers[key] = v;
    }
    return out;
}

class LiveTransport final : public Transport {
public:
    explicit LiveTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

    Response get(const std::string& url, const Headers& headers) override {
        auto [origin, path] = split_url(url);
        httplib::Client cli(origin);
        configure(cli);
        return convert(cli.Get(path, to_httplib(headers)));
    }

    Response post(const std::string& url, const std::string& body,
                  const Headers& headers) override {
        auto [origin, path] = split_url(url);
        httplib::Client cli(origin);
        configure(cli);
        auto it = headers.find("Content-Type");
        std::string content_type = it == headers.end() ? "application/json" : it->second;
        return convert(cli.Post(path, to_httplib(headers), body, content_type));
    }

private:
    void configure(httplib::Client& cli) const {
        cli.set_follow_location(true);
        cli.set_connection_timeout(timeout_);
        cli.set_read_timeout(timeout_);
    }

    static httplib::Headers to_httplib(const Headers& headers) {
        httplib::Headers out;
        for (const auto& [k, v] : headers) {
            if (k != "Content-Type") out.emplace(k, v);
        }
        return out;
    }

    std::chrono::seconds timeout_;
};

}  // namespace

std::unique_ptr<Transport> make_live_transport(std::chrono::seconds timeout) {
    return std::make_unique<LiveTransport>(timeout);
}

}  // namespace mcpscope::http
