#include "toa/consensus.hpp"

#include <algorithm>

namespace toa {

ChunkSequence select_longest(const CognitionCache& cache) {
    if (cache.empty()) throw Error(Errc::EmptyCache, "agent " + std::to_string(cache.owner()) + " has no states");
    const ChunkSequence* best = nullptr;
    for (const auto& [key, _] : cache.entries()) {
        // std::map iterates keys in ascending order, so the first key of
        // maximal length is also the lexicographically smallest one.
        if (!best || key.size() > best->size()) best = &key;
    }
    return *best;
}

AgentVerdict finalize_agent(AgentChannel& channel, const Query& query, const CognitiveState& state) {
    AgentVerdict v;
    v.agent = channel.id();
    v.sigma = state.path;
    v.state = state;
    auto reply = channel.finalize(query, state);
    if (!reply) {
        v.degraded = true;
        return v;
    }
    if (reply->result && (query.free_form() || query.has_label(*reply->result))) v.answer = reply->result;
    return v;
}

VoteOutcome majority_vote(const std::vector<AgentVerdict>& verdicts, const Query& query,
                          AgentChannel* tie_breaker) {
    VoteOutcome out;
    for (const auto& v : verdicts) {
        if (v.answer) ++out.tallies[*v.answer];
        else ++out.none_count;
    }
    if (out.tallies.empty()) return out;

    int top = 0;
    for (const auto& [_, count] : out.tallies) top = std::max(top, count);
    std::vector<std::string> tied;
    for (const auto& [label, count] : out.tallies)
        if (count == top) tied.push_back(label);

    if (tied.size() == 1) {
        out.winner = tied.front();
        return out;
    }

    out.tied = tied;
    out.tie_broken = true;
    std::optional<std::string> pick;
    if (tie_breaker) {
        std::vector<AgentVerdict> sorted = verdicts;
        std::sort(sorted.begin(), sorted.end(),
                  [](const AgentVerdict& a, const AgentVerdict& b) { return a.agent < b.agent; });
        std::vector<CognitiveState> states;
        for (const auto& v : sorted)
            if (v.answer && std::find(tied.begin(), tied.end(), *v.answer) != tied.end())
                states.push_back(v.state);
        auto reply = tie_breaker->tie_break(query, tied, states, verdicts.size());
        if (reply && reply->result && std::find(tied.begin(), tied.end(), *reply->result) != tied.end())
            pick = reply->result;
    }
    if (!pick) {
        out.tie_break_degraded = true;
        pick = tied.front();
    }
    out.winner = pick;
    return out;
}

} // namespace toa
