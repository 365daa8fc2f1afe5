#pragma once

#include "toa/backend.hpp"
#include "toa/consensus.hpp"
#include "toa/core.hpp"
#include "toa/explorer.hpp"
#include "toa/prompts.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace toa {

enum class Mode { TOA, Sequential, Vote };
std::string_view to_string(Mode m) noexcept;
std::optional<Mode> mode_from_string(std::string_view s) noexcept;

struct RunConfig {
    int agents = 5;
    std::size_t context_budget = 32768; // tokens per chunk
    BackendConfig backend;
    PromptSet prompts;
    bool cache = true;
    bool prune = true;
    std::size_t interest_cap = 5;
    Mode mode = Mode::TOA;
    std::uint64_t seed = 0;
    int concurrency = 0; // 0 means one worker per agent
    int parse_retries = 2;
    SplitOptions split;

    void validate() const;
};

struct AgentReport {
    AgentId agent = 0;
    std::pair<std::size_t, std::size_t> token_span;
    CognitiveState initial;
    std::vector<int> interests;
    std::vector<ChunkSequence> cache_keys;
    std::map<ChunkSequence, Utility> usefulness;
    std::vector<TraceEvent> trace;
    TraverseStats stats;
    AgentVerdict verdict;
    std::optional<std::string> error; // set when the agent failed outright
};

struct RunReport {
    Mode mode = Mode::TOA;
    std::optional<std::string> final_answer;
    std::vector<AgentReport> agents;
    int chunk_count = 0;
    std::size_t document_tokens = 0;
    VoteOutcome vote;
    std::vector<CallRecord> calls; // canonical order
    CallCounts counts;
    std::size_t cache_hits = 0;
    std::size_t prunes = 0; // useless marks
    std::size_t skips = 0;
    double wall_clock_ms = 0.0;
    bool deterministic = false;
    std::string backend_name;
    std::string config_echo; // JSON

    /// Wall-clock time is left out when the backend is deterministic so that
    /// reruns serialize identically.
    std::string to_json(int indent = 2) const;
    std::string to_text() const;
    std::string trace_jsonl() const;
};

std::string config_to_json(const RunConfig& config);

/// split -> perceive (per agent) -> select + traverse (per agent) -> finalize
/// (per agent) -> vote. Agents run concurrently up to `config.concurrency`.
/// An agent that fails outright contributes a None verdict; the run goes on.
RunReport run(const RunConfig& config, const Document& doc, const Query& query, Backend& backend);

// ---------------------------------------------------------------------------
// Cache / prune ablations

struct AblationRow {
    std::string strategy;
    bool cache = false;
    bool prune = false;
    std::size_t phase2_calls = 0;
    std::size_t phase13_calls = 0;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
};

struct AblationReport {
    std::vector<AblationRow> rows; // no cache/no prune, cache only, cache + prune
    std::vector<RunReport> runs;
    std::string to_text() const;
    std::string to_json(int indent = 2) const;
};

/// Percentage of `baseline` saved by `value`; 0 when baseline is 0.
double saving_rate(std::size_t baseline, std::size_t value);
std::string format_percent(double pct); // one decimal, e.g. "13.0%"

/// Renders the phase-2 strategy rows plus the phase-1&3 and all-phase totals
/// in the layout of a call-savings table.
std::string format_call_table(std::size_t none, std::size_t cache_only, std::size_t cache_prune,
                              std::size_t phase13);

using BackendFactory = std::function<std::unique_ptr<Backend>()>;

AblationReport compare_ablations(const RunConfig& config, const Document& doc, const Query& query,
                                 const BackendFactory& make_backend);

} // namespace toa
