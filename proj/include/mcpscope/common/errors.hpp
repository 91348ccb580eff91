#pragma once

#include <stdexcept>
#include <string>

namespace mcpscope {

/// Invalid configuration or precondition violation that the operator can fix.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A requested pipeline stage needs an artifact that no stage produced.
class MissingStageError : public std::runtime_error {
public:
    MissingStageError(std::string stage, const std::string& what)
        : std::runtime_error(what), stage_(std::move(stage)) {}
    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Remote host did not answer usefully after the retry budget was spent.
class RemoteError : public std::runtime_error {
public:
    RemoteError(const std::string& what, int status, bool retryable)
        : std::runtime_error(what), status_(status), retryable_(retryable) {}
    [[nodiscard]] int status() const noexcept { return status_; }
    [[nodiscard]] bool retryable() const noexcept { return retryable_; }

private:
    int status_;
    bool retryable_;
};

/// Text-analysis or embedding provider could not serve a request.
class ProviderUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Provider rejected our credentials; fatal for a run.
class ProviderAuthError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mcpscope
