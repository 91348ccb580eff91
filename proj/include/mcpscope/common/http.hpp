#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

namespace mcpscope::http {

using Headers = std::map<std::string, std::string>;

struct Response {
    int status = 0;  // 0 means the host could not be reached
    std::string body;
    Headers headers;

    [[nodiscard]] bool ok() const { return status >= 200 && status < 300; }
};

/// One request/response hop. Implementations must be safe to call from several threads.
class Transport {
public:
    virtual ~Transport() = default;
    virtual Response get(const std::string& url, const Headers& headers) = 0;
    virtual Response post(const std::string& url, const std::string& body,
                          const Headers& headers) = 0;
};

/// cpp-httplib backed transport for live runs.
std::unique_ptr<Transport> make_live_transport(std::chrono::seconds timeout = std::chrono::seconds{30});

/// Offline transport answering from `<dir>/index.json`:
///   { "<url>": {"status": 200, "file": "relative/path"} | {"body": "..."} | {"json": {...}} }
/// Unlisted URLs answer 404. POST requests are looked up under "POST <url>".
class FixtureTransport final : public Transport {
public:
    explicit FixtureTransport(std::filesystem::path dir);
    Response get(const std::string& url, const Headers& headers) override;
    Response post(const std::string& url, const std::string& body, const Headers& headers) override;
    [[nodiscard]] std::size_t requests_served() const;

private:
    Response lookup(const std::string& key);

    std::filesystem::path dir_;
    nlohmann::json index_;
    mutable std::mutex mu_;
    std::size_t served_ = 0;
};

/// Token bucket per remote host.
class RateLimiter {
public:
    explicit RateLimiter(double requests_per_second, double burst = 1.0);
    void acquire(const std::string& host);
    [[nodiscard]] double rate() const { return rate_; }

private:
    struct Bucket {
        double tokens;
        std::chrono::steady_clock::time_point last;
    };
    double rate_;
    double burst_;
    std::mutex mu_;
    std::map<std::string, Bucket> buckets_;
};

struct RetryPolicy {
    int max_retries = 5;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{30000};
};

/// Rate-limited client with bounded exponential back-off. Retries transport failures,
/// 429, 5xx and 403 responses that carry an exhausted rate-limit header; any other
/// status is returned to the caller untouched.
class Client {
public:
    Client(Transport& transport, RateLimiter& limiter, RetryPolicy policy = {});

    Response get(const std::string& url, const Headers& headers = {});
    Response post(const std::string& url, const std::string& body, const Headers& headers = {});

    /// GET that throws RemoteError unless the final status is 2xx.
    Response get_ok(const std::string& url, const Headers& headers = {});

    /// Replaces the sleep used between retries (tests).
    void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper);

private:
    Response with_retry(const std::string& url, const std::function<Response()>& call);

    Transport& transport_;
    RateLimiter& limiter_;
    RetryPolicy policy_;
    std::function<void(std::chrono::milliseconds)> sleep_;
};

std::string host_of(const std::string& url);
std::string url_encode(const std::string& s);

}  // namespace mcpscope::http
