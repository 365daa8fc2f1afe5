#include "toa/backend.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace toa {

using nlohmann::json;

void BackendConfig::validate() const {
    if (!(temperature >= 0.0)) throw Error(Errc::InvalidConfig, "temperature must be >= 0");
    if (max_output_tokens < 1) throw Error(Errc::InvalidConfig, "max_output_tokens must be >= 1");
    if (max_retries < 0) throw Error(Errc::InvalidConfig, "max_retries must be >= 0");
    if (timeout.count() <= 0) throw Error(Errc::InvalidConfig, "timeout must be positive");
    if (endpoint.empty()) throw Error(Errc::InvalidConfig, "endpoint is empty");
}

void BackendConfig::apply_environment() {
    if (const char* key = std::getenv("TOA_API_KEY"); key && *key) api_key = key;
    else if (const char* okey = std::getenv("OPENAI_API_KEY"); okey && *okey) api_key = okey;
    if (const char* ep = std::getenv("TOA_ENDPOINT"); ep && *ep) endpoint = ep;
}

std::string_view to_string(CallOutcome o) noexcept {
    switch (o) {
    case CallOutcome::Ok: return "ok";
    case CallOutcome::Retried: return "retried";
    case CallOutcome::Failed: return "failed";
    }
    return "unknown";
}

std::string to_json_line(const CallRecord& r) {
    json j{{"phase", std::string(to_string(r.phase))},
           {"agent", r.agent},
           {"ordinal", r.ordinal},
           {"sequence", r.sequence},
           {"prompt_tokens", r.prompt_tokens},
           {"completion_tokens", r.completion_tokens},
           {"latency_ms", r.latency_ms},
           {"attempts", r.attempts},
           {"outcome", std::string(to_string(r.outcome))}};
    if (r.provider_prompt_tokens) j["provider_prompt_tokens"] = *r.provider_prompt_tokens;
    if (r.provider_completion_tokens) j["provider_completion_tokens"] = *r.provider_completion_tokens;
    return j.dump();
}

void Telemetry::append(CallRecord record) {
    std::lock_guard lock(mu_);
    records_.push_back(std::move(record));
}

std::size_t Telemetry::size() const {
    std::lock_guard lock(mu_);
    return records_.size();
}

void Telemetry::clear() {
    std::lock_guard lock(mu_);
    records_.clear();
}

std::vector<CallRecord> Telemetry::records() const {
    std::vector<CallRecord> out;
    {
        std::lock_guard lock(mu_);
        out = records_;
    }
    std::stable_sort(out.begin(), out.end(), [](const CallRecord& a, const CallRecord& b) {
        return std::tie(a.phase, a.agent, a.ordinal) < std::tie(b.phase, b.agent, b.ordinal);
    });
    return out;
}

std::string Telemetry::to_jsonl() const {
    std::string out;
    for (const auto& r : records()) {
        out += to_json_line(r);
        out += '\n';
    }
    return out;
}

PhaseTally& PhaseTally::operator+=(const PhaseTally& o) {
    calls += o.calls;
    prompt_tokens += o.prompt_tokens;
    completion_tokens += o.completion_tokens;
    return *this;
}

PhaseTally CallCounts::group(PhaseGroup g) const {
    PhaseTally out;
    for (const auto& [phase, tally] : by_phase)
        if (group_of(phase) == g) out += tally;
    return out;
}

CallCounts call_counts(const std::vector<CallRecord>& records) {
    CallCounts out;
    for (Phase p : kAllPhases) out.by_phase[p] = {};
    for (const auto& r : records) {
        PhaseTally t{1, r.prompt_tokens, r.completion_tokens};
        out.by_phase[r.phase] += t;
        out.total += t;
    }
    return out;
}

RateLimiter::RateLimiter(double per_second, double burst)
    : rate_(per_second), capacity_(std::max(1.0, burst)), tokens_(capacity_), last_(Clock::now()) {}

void RateLimiter::acquire() {
    if (rate_ <= 0.0) return;
    std::unique_lock lock(mu_);
    for (;;) {
        const auto now = Clock::now();
        const double elapsed = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        tokens_ = std::min(capacity_, tokens_ + elapsed * rate_);
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        const auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
        std::this_thread::sleep_for(wait);
    }
}

Invoker::Result Invoker::complete(const CallRequest& request, std::size_t ordinal) {
    CallRecord rec;
    rec.phase = request.phase;
    rec.agent = request.agent;
    rec.ordinal = ordinal;
    rec.sequence = request.sequence;
    rec.prompt_tokens = tokenizer_.count(request.system) + tokenizer_.count(request.prompt);
    try {
        Completion c = backend_.complete(request);
        rec.completion_tokens = tokenizer_.count(c.text);
        rec.provider_prompt_tokens = c.provider_prompt_tokens;
        rec.provider_completion_tokens = c.provider_completion_tokens;
        rec.latency_ms = c.latency_ms;
        rec.attempts = c.attempts;
        rec.outcome = c.attempts > 1 ? CallOutcome::Retried : CallOutcome::Ok;
        telemetry_.append(rec);
        return {std::move(c.text), std::move(rec)};
    } catch (const CallFailure& f) {
        rec.attempts = f.attempts();
        rec.latency_ms = f.latency_ms();
        rec.outcome = CallOutcome::Failed;
        telemetry_.append(rec);
        throw;
    } catch (const Error&) {
        rec.outcome = CallOutcome::Failed;
        telemetry_.append(rec);
        throw;
    }
}

Completion ScriptedBackend::complete(const CallRequest& request) {
    auto key = std::make_tuple(request.phase, request.agent, request.sequence);
    if (auto it = spec_.raw_overrides.find(key); it != spec_.raw_overrides.end()) {
        std::size_t idx;
        {
            std::lock_guard lock(mu_);
            idx = consumed_[key]++;
        }
        if (idx < it->second.size()) {
            const auto& raw = it->second[idx];
            if (raw == ScriptedAgentSpec::kFail)
                throw CallFailure(Errc::BackendUnavailable, "scripted transport failure", 1);
            return {raw};
        }
    }
    return {respond(request)};
}

std::string ScriptedBackend::respond(const CallRequest& request) const {
    auto agent_script = [&]() -> const ScriptedAgentSpec::AgentScript& {
        if (request.agent < 0 || static_cast<std::size_t>(request.agent) >= spec_.agents.size())
            throw Error(Errc::InvalidConfig, "no script for agent " + std::to_string(request.agent));
        return spec_.agents[static_cast<std::size_t>(request.agent)];
    };

    switch (request.phase) {
    case Phase::Perceive: return serialize(agent_script().perceive);
    case Phase::SelectChunks:
        return json{{"explanation", "scripted selection"}, {"id", agent_script().select_ids}}.dump();
    case Phase::UpdateCognition: {
        const auto& a = agent_script();
        if (auto it = a.updates.find(request.sequence); it != a.updates.end())
            return serialize(it->second);
        if (a.default_utility) {
            UpdateResponse r{*a.default_utility, "facts after " + format_sequence(request.sequence),
                             "None"};
            return serialize(r);
        }
        throw Error(Errc::InvalidConfig, "no update rule for agent " + std::to_string(request.agent) +
                                             " at " + format_sequence(request.sequence));
    }
    case Phase::Finalize: {
        const auto& a = agent_script();
        std::string result;
        if (auto it = a.finals.find(request.sequence); it != a.finals.end()) result = it->second;
        else if (a.default_final) result = *a.default_final;
        else
            throw Error(Errc::InvalidConfig, "no finalize rule for agent " +
                                                 std::to_string(request.agent) + " at " +
                                                 format_sequence(request.sequence));
        return json{{"explanation", "scripted final answer"}, {"result", result}}.dump();
    }
    case Phase::TieBreak: {
        const auto& tied = request.tied_labels;
        std::string pick = tied.empty() ? std::string("None") : tied.front();
        for (const auto& label : spec_.tie_break_preference) {
            if (std::find(tied.begin(), tied.end(), label) != tied.end()) {
                pick = label;
                break;
            }
        }
        return json{{"explanation", "scripted tie-break"}, {"result", pick}}.dump();
    }
    }
    throw Error(Errc::InvalidArgument, "unknown phase");
}

} // namespace toa
