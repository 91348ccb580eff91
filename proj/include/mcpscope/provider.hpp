#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <spdlog/spdlog.h>

#include "mcpscope/common/errors.hpp"
#include "mcpscope/common/http.hpp"
#include "mcpscope/common/io.hpp"

namespace mcpscope {

struct AnalysisRequest {
    std::string task;         // readme_extraction, server_classification, direct_impact, onet_l1, ...
    std::string instruction;  // rendered prompt text
    std::string document;     // payload appended after the instruction
};

/// Instruction + document in, free text out. Throws ProviderUnavailable when the request
/// cannot be served and ProviderAuthError when credentials are rejected.
class TextAnalysisProvider {
public:
    virtual ~TextAnalysisProvider() = default;
    [[nodiscard]] virtual std::string id() const = 0;
    [[nodiscard]] virtual bool deterministic() const = 0;
    virtual std::string complete(const AnalysisRequest& request) = 0;
    /// Cheap authenticated call made before a run starts.
    virtual void preflight() {}
};

struct ChatEndpoint {
    std::string format = "anthropic";  // anthropic | openai
    std::string url;
    std::string model;
    std::string api_key;
    int max_tokens = 4096;
};

/// Remote language-model endpoint speaking the Anthropic messages or OpenAI chat format.
class HttpChatProvider final : public TextAnalysisProvider {
public:
    HttpChatProvider(http::Client& client, ChatEndpoint endpoint);
    [[nodiscard]] std::string id() const override;
    [[nodiscard]] bool deterministic() const override { return false; }
    std::string complete(const AnalysisRequest& request) override;
    void preflight() override;

private:
    std::string send(const std::string& prompt, int max_tokens);
    http::Client& client_;
    ChatEndpoint ep_;
};

/// Versioned prompt templates under <assets>/prompts/<name>.v<N>.txt.
/// Placeholders are written {{key}}.
class PromptLibrary {
public:
    explicit PromptLibrary(fs::path dir, int version = 1);
    [[nodiscard]] std::string render(const std::string& name,
                                     const std::map<std::string, std::string>& vars) const;
    [[nodiscard]] std::string digest(const std::string& name) const;

private:
    [[nodiscard]] const std::string& load(const std::string& name) const;
    fs::path dir_;
    int version_;
    mutable std::map<std::string, std::string> cache_;
};

/// Root of the shipped asset tree: $MCPSCOPE_ASSETS if set, else the source checkout.
fs::path asset_dir();

/// Asks the provider, validating with `parse`; one retry on a schema failure, then nullopt
/// so the caller can take its deterministic fallback. Auth failures propagate.
template <class T>
std::optional<T> ask(TextAnalysisProvider* provider, const AnalysisRequest& request,
                     const std::function<std::optional<T>(const std::string&)>& parse,
                     const std::string& subject) {
    if (provider == nullptr) return std::nullopt;
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::string reply;
        try {
            reply = provider->complete(request);
        } catch (const ProviderUnavailable& e) {
            spdlog::warn("{}: provider unavailable for {} ({}); using fallback", request.task,
                         subject, e.what());
            return std::nullopt;
        }
        if (auto parsed = parse(reply)) return parsed;
        spdlog::warn("{}: invalid provider reply for {} (attempt {})", request.task, subject,
                     attempt + 1);
    }
    spdlog::warn("{}: falling back for {}", request.task, subject);
    return std::nullopt;
}

/// Pulls the first JSON object out of a reply that may be wrapped in prose or fences.
std::optional<Json> extract_json_object(const std::string& reply);

}  // namespace mcpscope
