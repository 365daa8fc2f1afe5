#pragma once

#include "toa/agent.hpp"
#include "toa/explorer.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace toa {

struct AgentVerdict {
    AgentId agent = 0;
    ChunkSequence sigma;               // the sequence whose state produced the answer
    std::optional<std::string> answer; // nullopt is "None"
    CognitiveState state;              // state at sigma
    bool degraded = false;             // no usable finalize reply
};

struct VoteOutcome {
    std::map<std::string, int> tallies;
    int none_count = 0;
    std::optional<std::string> winner;
    bool tie_broken = false;
    bool tie_break_degraded = false; // tie-break failed; smallest tied label used
    std::vector<std::string> tied;   // labels sharing the top tally, when tied
};

/// Longest key of the cache; among equally long keys the lexicographically
/// smallest index tuple. Throws EmptyCache.
ChunkSequence select_longest(const CognitionCache& cache);

/// One finalize call on the state at sigma*. A result outside the query's
/// labels (or any failure) becomes None.
AgentVerdict finalize_agent(AgentChannel& channel, const Query& query, const CognitiveState& state);

/// Plurality over non-None answers. A tie at the top is settled by exactly one
/// tie-break call through `tie_breaker`; if that call fails, or no channel is
/// given, the lexicographically smallest tied label wins and the outcome is
/// flagged.
VoteOutcome majority_vote(const std::vector<AgentVerdict>& verdicts, const Query& query,
                          AgentChannel* tie_breaker);

} // namespace toa
