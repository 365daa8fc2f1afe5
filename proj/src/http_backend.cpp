#include "toa/http_backend.hpp"

#include "httplib.h"
#include "json.hpp"

#include <thread>

namespace toa {

using nlohmann::json;

ParsedUrl parse_url(const std::string& url) {
    ParsedUrl out;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(Errc::InvalidConfig, "endpoint lacks scheme: " + url);
    out.scheme = url.substr(0, scheme_end);
    if (out.scheme != "http" && out.scheme != "https")
        throw Error(Errc::InvalidConfig, "unsupported scheme: " + out.scheme);
    auto rest = url.substr(scheme_end + 3);
    auto slash = rest.find('/');
    std::string authority = rest.substr(0, slash);
    out.base_path = slash == std::string::npos ? "" : rest.substr(slash);
    while (!out.base_path.empty() && out.base_path.back() == '/') out.base_path.pop_back();
    auto colon = authority.rfind(':');
    if (colon != std::string::npos && authority.find(']') == std::string::npos) {
        out.host = authority.substr(0, colon);
        try {
            out.port = std::stoi(authority.substr(colon + 1));
        } catch (const std::exception&) {
            throw Error(Errc::InvalidConfig, "bad port in endpoint: " + url);
        }
    } else {
        out.host = authority;
        out.port = out.scheme == "https" ? 443 : 80;
    }
    if (out.host.empty()) throw Error(Errc::InvalidConfig, "endpoint lacks host: " + url);
    return out;
}

OpenAiBackend::OpenAiBackend(BackendConfig config)
    : config_(std::move(config)), url_(parse_url(config_.endpoint)), limiter_(config_.rate_limit) {
    config_.validate();
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (url_.scheme == "https")
        throw Error(Errc::InvalidConfig, "built without TLS support; use an http:// endpoint");
#endif
}

OpenAiBackend::~OpenAiBackend() = default;

std::string OpenAiBackend::name() const { return "openai:" + config_.model + "@" + config_.endpoint; }

std::string OpenAiBackend::build_request_body(const BackendConfig& config, const CallRequest& request) {
    json messages = json::array();
    if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
    messages.push_back({{"role", "user"}, {"content", request.prompt}});
    return json{{"model", config.model},
                {"messages", messages},
                {"temperature", config.temperature},
                {"max_tokens", config.max_output_tokens},
                {"stream", false}}
        .dump();
}

namespace {

struct AttemptResult {
    enum class Kind { Ok, Retryable, Fatal } kind = Kind::Fatal;
    bool timed_out = false;
    std::string body;
    std::string message;
};

std::unique_ptr<httplib::Client> make_client(const ParsedUrl& url, const BackendConfig& cfg) {
    std::string origin = url.scheme + "://" + url.host + ":" + std::to_string(url.port);
    auto cli = std::make_unique<httplib::Client>(origin);
    const auto us = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout).count();
    const time_t sec = static_cast<time_t>(us / 1'000'000);
    const time_t usec = static_cast<time_t>(us % 1'000'000);
    cli->set_connection_timeout(sec, usec);
    cli->set_read_timeout(sec, usec);
    cli->set_write_timeout(sec, usec);
    cli->set_keep_alive(false);
    return cli;
}

} // namespace

Completion OpenAiBackend::complete(const CallRequest& request) {
    const std::string body = build_request_body(config_, request);
    const std::string path = url_.base_path + "/chat/completions";
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    const auto started = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();
    };

    AttemptResult last;
    int attempts = 0;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(config_.backoff_base * (1 << (attempt - 1)));
        limiter_.acquire();
        ++attempts;

        auto cli = make_client(url_, config_);
        const auto t0 = std::chrono::steady_clock::now();
        auto res = cli->Post(path, headers, body, "application/json");
        const auto took = std::chrono::steady_clock::now() - t0;

        last = {};
        if (!res) {
            last.kind = AttemptResult::Kind::Retryable;
            last.timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                             ((res.error() == httplib::Error::Read || res.error() == httplib::Error::Write ||
                               res.error() == httplib::Error::Connection) &&
                              took >= config_.timeout);
            last.message = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last.kind = AttemptResult::Kind::Retryable;
            last.message = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last.kind = AttemptResult::Kind::Fatal;
            last.message = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
            break;
        }
        last.kind = AttemptResult::Kind::Ok;
        last.body = res->body;
        break;
    }

    if (last.kind != AttemptResult::Kind::Ok) {
        Errc code = last.timed_out ? Errc::Timeout : Errc::BackendUnavailable;
        throw CallFailure(code, last.message + " after " + std::to_string(attempts) + " attempt(s)",
                          attempts, elapsed_ms());
    }

    auto parsed = json::parse(last.body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty())
        throw CallFailure(Errc::BackendUnavailable, "malformed chat-completions response", attempts,
                          elapsed_ms());
    const auto& first = parsed["choices"][0];
    if (!first.is_object() || !first.contains("message") || !first["message"].is_object() ||
        !first["message"].contains("content") || !first["message"]["content"].is_string())
        throw CallFailure(Errc::BackendUnavailable, "chat-completions response has no message content",
                          attempts, elapsed_ms());
    Completion out;
    out.text = first["message"]["content"].get<std::string>();
    out.attempts = attempts;
    out.latency_ms = elapsed_ms();
    if (parsed.contains("usage") && parsed["usage"].is_object()) {
        const auto& u = parsed["usage"];
        if (u.contains("prompt_tokens") && u["prompt_tokens"].is_number_unsigned())
            out.provider_prompt_tokens = u["prompt_tokens"].get<std::size_t>();
        if (u.contains("completion_tokens") && u["completion_tokens"].is_number_unsigned())
            out.provider_completion_tokens = u["completion_tokens"].get<std::size_t>();
    }
    return out;
}

} // namespace toa
