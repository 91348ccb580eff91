#include "mcpscope/provider.hpp"

#include <cstdlib>

#include <fmt/format.h>

#include "mcpscope/common/text.hpp"

namespace mcpscope {

HttpChatProvider::HttpChatProvider(http::Client& client, ChatEndpoint endpoint)
    : client_(client), ep_(std::move(endpoint)) {
    if (ep_.format != "anthropic" && ep_.format != "openai") {
        throw ConfigError(fmt::format("unknown provider format '{}'", ep_.format));
    }
    if (ep_.url.empty() || ep_.model.empty()) {
        throw ConfigError("provider endpoint needs url and model");
    }
}

std::string HttpChatProvider::id() const { return fmt::format("{}:{}", ep_.format, ep_.model); }

std::string HttpChatProvider::send(const std::string& prompt, int max_tokens) {
    Json body{{"model", ep_.model}, {"max_tokens", max_tokens}, {"temperature", 0}};
    body["messages"] = Json::array({Json{{"role", "user"}, {"content", prompt}}});
    http::Headers headers{{"Content-Type", "application/json"}};
    if (ep_.format == "anthropic") {
        headers["x-api-key"] = ep_.api_key;
        headers["anthropic-version"] = "2023-06-01";
    } else {
        headers["Authorization"] = "Bearer " + ep_.api_key;
    }
    auto resp = client_.post(ep_.url, body.dump(), headers);
    if (resp.status == 401 || resp.status == 403) {
        throw ProviderAuthError(fmt::format("{} rejected credentials (status {})", id(), resp.status));
    }
    if (!resp.ok()) {
        throw ProviderUnavailable(fmt::format("{} answered status {}", id(), resp.status));
    }
    Json doc = Json::parse(resp.body, nullptr, false);
    if (doc.is_discarded()) throw ProviderUnavailable("provider reply is not JSON");
    try {
        if (ep_.format == "anthropic") {
            std::string out;
            for (const auto& block : doc.at("content")) {
                if (block.value("type", "") == "text") out += block.at("text").get<std::string>();
            }
            return out;
        }
        return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const Json::exception& e) {
        throw ProviderUnavailable(fmt::format("unexpected provider reply shape: {}", e.what()));
    }
}

std::string HttpChatProvider::complete(const AnalysisRequest& request) {
    std::string prompt = request.instruction;
    if (!request.document.empty()) prompt += "\n\n" + request.document;
    return send(prompt, ep_.max_tokens);
}

void HttpChatProvider::preflight() { send("Reply with OK.", 1); }

PromptLibrary::PromptLibrary(fs::path dir, int version) : dir_(std::move(dir)), version_(version) {}

const std::string& PromptLibrary::load(const std::string& name) const {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    auto path = dir_ / fmt::format("{}.v{}.txt", name, version_);
    if (!fs::exists(path)) throw ConfigError(fmt::format("missing prompt asset {}", path.string()));
    return cache_.emplace(name, read_file(path)).first->second;
}

std::string PromptLibrary::render(const std::string& name,
                                  const std::map<std::string, std::string>& vars) const {
    std::string out = load(name);
    for (const auto& [k, v] : vars) out = text::replace_all(out, "{{" + k + "}}", v);
    return out;
}

std::string PromptLibrary::digest(const std::string& name) const { return sha256_hex(load(name)); }

fs::path asset_dir() {
    if (const char* env = std::getenv("MCPSCOPE_ASSETS"); env && *env) return env;
#ifdef MCPSCOPE_ASSET_DIR
    return MCPSCOPE_ASSET_DIR;
#else
    return "assets";
#endif
}

std::optional<Json> extract_json_object(const std::string& reply) {
    auto start = reply.find('{');
    auto end = reply.rfind('}');
    if (start == std::string::npos || end == std::string::npos || end < start) return std::nullopt;
    Json doc = Json::parse(reply.substr(start, end - start + 1), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
    return doc;
}

}  // namespace mcpscope
