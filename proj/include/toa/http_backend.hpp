#pragma once

#include "toa/backend.hpp"

#include <memory>
#include <string>

namespace toa {

struct ParsedUrl {
    std::string scheme; // "http" or "https"
    std::string host;
    int port = 0;
    std::string base_path; // without trailing slash, e.g. "/v1"
};

ParsedUrl parse_url(const std::string& url);

/// OpenAI chat-completions client: one system + one user message per call,
/// exponential backoff on transport errors, HTTP 429 and 5xx, and a token
/// bucket shared by every call made through this instance.
class OpenAiBackend final : public Backend {
  public:
    explicit OpenAiBackend(BackendConfig config);
    ~OpenAiBackend() override;

    Completion complete(const CallRequest& request) override;
    bool deterministic() const override { return false; }
    std::string name() const override;

    const BackendConfig& config() const noexcept { return config_; }

    static std::string build_request_body(const BackendConfig& config, const CallRequest& request);

  private:
    BackendConfig config_;
    ParsedUrl url_;
    RateLimiter limiter_;
};

} // namespace toa
