#pragma once

#include "toa/core.hpp"
#include "toa/phase.hpp"
#include "toa/prompts.hpp"

#include <chrono>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace toa {

struct BackendConfig {
    std::string endpoint = "https://api.openai.com/v1";
    std::string model = "gpt-4o-mini";
    std::string api_key;
    double temperature = 0.01;
    int max_output_tokens = 2048;
    std::chrono::milliseconds timeout{120'000};
    int max_retries = 3;
    double rate_limit = 5.0; // requests per second; <= 0 disables limiting
    std::chrono::milliseconds backoff_base{500};

    void validate() const;

    /// Applies TOA_API_KEY / OPENAI_API_KEY and TOA_ENDPOINT when set.
    void apply_environment();
};

enum class CallOutcome { Ok, Retried, Failed };
std::string_view to_string(CallOutcome o) noexcept;

/// One logical backend invocation. `attempts` counts transport attempts made
/// inside that invocation; a parse retry is a separate record.
struct CallRecord {
    Phase phase = Phase::Perceive;
    AgentId agent = 0;
    std::size_t ordinal = 0; // position within the agent's own call sequence
    ChunkSequence sequence;  // path the call concerns (empty when not path-bound)
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
    std::optional<std::size_t> provider_prompt_tokens;
    std::optional<std::size_t> provider_completion_tokens;
    double latency_ms = 0.0;
    int attempts = 1;
    CallOutcome outcome = CallOutcome::Ok;

    bool operator==(const CallRecord&) const = default;
};

std::string to_json_line(const CallRecord& r);

struct CallRequest {
    Phase phase = Phase::Perceive;
    AgentId agent = 0;
    ChunkSequence sequence;
    std::vector<std::string> tied_labels; // TieBreak only
    std::string system;
    std::string prompt;
};

struct Completion {
    std::string text;
    int attempts = 1;
    double latency_ms = 0.0;
    std::optional<std::size_t> provider_prompt_tokens = std::nullopt;
    std::optional<std::size_t> provider_completion_tokens = std::nullopt;
};

/// Thrown by backends when a call cannot be completed.
class CallFailure : public Error {
  public:
    CallFailure(Errc code, const std::string& what, int attempts, double latency_ms = 0.0)
        : Error(code, what), attempts_(attempts), latency_ms_(latency_ms) {}
    int attempts() const noexcept { return attempts_; }
    double latency_ms() const noexcept { return latency_ms_; }

  private:
    int attempts_;
    double latency_ms_;
};

class Backend {
  public:
    virtual ~Backend() = default;
    virtual Completion complete(const CallRequest& request) = 0;
    /// True when identical request streams produce identical completions.
    virtual bool deterministic() const = 0;
    virtual std::string name() const = 0;
};

/// Append-only, internally synchronized CallRecord log.
class Telemetry {
  public:
    void append(CallRecord record);
    std::size_t size() const;
    void clear();

    /// Records in canonical order: phase, then agent, then ordinal. Agents run
    /// concurrently, so arrival order is not reproducible but this order is.
    std::vector<CallRecord> records() const;

    std::string to_jsonl() const;

  private:
    mutable std::mutex mu_;
    std::vector<CallRecord> records_;
};

struct PhaseTally {
    std::size_t calls = 0;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
    bool operator==(const PhaseTally&) const = default;
    PhaseTally& operator+=(const PhaseTally& o);
};

struct CallCounts {
    std::map<Phase, PhaseTally> by_phase; // every phase present, zero when unused
    PhaseTally total;
    PhaseTally group(PhaseGroup g) const;
    bool operator==(const CallCounts&) const = default;
};

CallCounts call_counts(const std::vector<CallRecord>& records);

/// Token bucket; `acquire` blocks until a token is available.
class RateLimiter {
  public:
    using Clock = std::chrono::steady_clock;
    explicit RateLimiter(double per_second, double burst = 1.0);
    void acquire();

  private:
    std::mutex mu_;
    double rate_;
    double capacity_;
    double tokens_;
    Clock::time_point last_;
};

/// Issues one backend call, counts tokens with the core tokenizer, and appends
/// the resulting CallRecord to the telemetry sink. Failures are recorded with
/// outcome Failed and rethrown.
class Invoker {
  public:
    Invoker(Backend& backend, Telemetry& telemetry, const Tokenizer& tokenizer = default_tokenizer())
        : backend_(backend), telemetry_(telemetry), tokenizer_(tokenizer) {}

    struct Result {
        std::string text;
        CallRecord record;
    };

    Result complete(const CallRequest& request, std::size_t ordinal);

    Backend& backend() const noexcept { return backend_; }
    Telemetry& telemetry() const noexcept { return telemetry_; }

  private:
    Backend& backend_;
    Telemetry& telemetry_;
    const Tokenizer& tokenizer_;
};

// ---------------------------------------------------------------------------
// Scripted backend: deterministic responses looked up by (agent, phase, path).

struct ScriptedAgentSpec {
    struct AgentScript {
        PerceiveResponse perceive{"None", "None"};
        std::string select_ids = "None"; // raw "id" field, e.g. "2,3,4"
        std::map<ChunkSequence, UpdateResponse> updates;
        std::optional<Utility> default_utility; // used when `updates` lacks the path
        std::map<ChunkSequence, std::string> finals; // raw "result" field per sigma*
        std::optional<std::string> default_final;
    };

    std::vector<AgentScript> agents;
    std::vector<std::string> tie_break_preference; // first tied label in this order wins

    /// Raw text served instead of the structured rule, consumed in order for
    /// repeated calls with the same key. `kFail` simulates a transport failure.
    std::map<std::tuple<Phase, AgentId, ChunkSequence>, std::vector<std::string>> raw_overrides;

    static constexpr std::string_view kFail = "\x01<transport-failure>";
};

class ScriptedBackend final : public Backend {
  public:
    explicit ScriptedBackend(ScriptedAgentSpec spec) : spec_(std::move(spec)) {}

    Completion complete(const CallRequest& request) override;
    bool deterministic() const override { return true; }
    std::string name() const override { return "scripted"; }

    const ScriptedAgentSpec& spec() const noexcept { return spec_; }

  private:
    std::string respond(const CallRequest& request) const;

    ScriptedAgentSpec spec_;
    std::mutex mu_;
    std::map<std::tuple<Phase, AgentId, ChunkSequence>, std::size_t> consumed_;
};

} // namespace toa
