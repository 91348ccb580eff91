#include "mcpscope/common/http.hpp"

#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "mcpscope/common/errors.hpp"
#include "mcpscope/common/io.hpp"

namespace mcpscope::http {

std::string host_of(const std::string& url) {
    auto scheme = url.find("://");
    std::size_t start = scheme == std::string::npos ? 0 : scheme + 3;
    auto end = url.find_first_of("/?#", start);
    return url.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

std::string url_encode(const std::string& s) {
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out += static_cast<char>(c);
        } else {
            out += fmt::format("%{:02X}", c);
        }
    }
    return out;
}

FixtureTransport::FixtureTransport(std::filesystem::path dir) : dir_(std::move(dir)) {
    auto index_path = dir_ / "index.json";
    index_ = std::filesystem::exists(index_path) ? read_json(index_path) : Json::object();
}

Response FixtureTransport::lookup(const std::string& key) {
    std::lock_guard lock(mu_);
    ++served_;
    auto it = index_.find(key);
    if (it == index_.end()) return Response{404, "{\"message\":\"Not Found\"}", {}};
    const Json& entry = *it;
    Response resp;
    resp.status = entry.value("status", 200);
    if (entry.contains("file")) {
        resp.body = read_file(dir_ / entry["file"].get<std::string>());
    } else if (entry.contains("json")) {
        resp.body = entry["json"].dump();
    } else {
        resp.body = entry.value("body", std::string{});
    }
    if (entry.contains("headers")) {
        for (auto& [k, v] : entry["headers"].items()) resp.headers[k] = v.get<std::string>();
    }
    return resp;
}

Response FixtureTransport::get(const std::string& url, const Headers&) { return lookup(url); }

Response FixtureTransport::post(const std::string& url, const std::string&, const Headers&) {
    return lookup("POST " + url);
}

std::size_t FixtureTransport::requests_served() const {
    std::lock_guard lock(mu_);
    return served_;
}

RateLimiter::RateLimiter(double requests_per_second, double burst)
    : rate_(requests_per_second), burst_(std::max(1.0, burst)) {}

void RateLimiter::acquire(const std::string& host) {
    if (rate_ <= 0) return;  // unlimited
    using clock = std::chrono::steady_clock;
    std::chrono::duration<double> wait{0};
    {
        std::lock_guard lock(mu_);
        auto now = clock::now();
        auto [it, inserted] = buckets_.try_emplace(host, Bucket{burst_, now});
        Bucket& b = it->second;
        double elapsed = std::chrono::duration<double>(now - b.last).count();
        b.tokens = std::min(burst_, b.tokens + elapsed * rate_);
        b.last = now;
        b.tokens -= 1.0;
        if (b.tokens < 0) wait = std::chrono::duration<double>(-b.tokens / rate_);
    }
    if (wait.count() > 0) std::this_thread::sleep_for(wait);
}

Client::Client(Transport& transport, RateLimiter& limiter, RetryPolicy policy)
    : transport_(transport), limiter_(limiter), policy_(policy),
      sleep_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {}

void Client::set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) {
    sleep_ = std::move(sleeper);
}

namespace {

bool should_retry(const Response& r) {
    if (r.status == 0 || r.status == 429 || r.status >= 500) return true;
    if (r.status == 403) {
        auto it = r.headers.find("x-ratelimit-remaining");
        return it != r.headers.end() && it->second == "0";
    }
    return false;
}

}  // namespace

Response Client::with_retry(const std::string& url, const std::function<Response()>& call) {
    auto host = host_of(url);
    auto backoff = policy_.initial_backoff;
    Response resp;
    for (int attempt = 0;; ++attempt) {
        limiter_.acquire(host);
        resp = call();
        if (!should_retry(resp)) return resp;
        if (attempt >= policy_.max_retries) break;
        auto retry_after = resp.headers.find("retry-after");
        auto delay = backoff;
        if (retry_after != resp.headers.end()) {
            try {
                delay = std::max(delay, std::chrono::milliseconds(
                                            std::stoll(retry_after->second) * 1000));
            } catch (const std::exception&) {
            }
        }
        spdlog::debug("retrying {} after status {} (attempt {})", url, resp.status, attempt + 1);
        sleep_(std::min(delay, policy_.max_backoff));
        backoff = std::chrono::milliseconds(
            static_cast<long long>(static_cast<double>(backoff.count()) * policy_.multiplier));
    }
    spdlog::warn("giving up on {} after {} retries (status {})", url, policy_.max_retries,
                 resp.status);
    return resp;
}

Response Client::get(const std::string& url, const Headers& headers) {
    return with_retry(url, [&] { return transport_.get(url, headers); });
}

Response Client::post(const std::string& url, const std::string& body, const Headers& headers) {
    return with_retry(url, [&] { return transport_.post(url, body, headers); });
}

Response Client::get_ok(const std::string& url, const Headers& headers) {
    auto resp = get(url, headers);
    if (!resp.ok()) {
        bool retryable = should_retry(resp);
        throw RemoteError(fmt::format("GET {} failed with status {}", url, resp.status),
                          resp.status, retryable);
    }
    return resp;
}

}  // namespace mcpscope::http
