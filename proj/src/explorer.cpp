#include "toa/explorer.hpp"

#include "json.hpp"

#include <algorithm>

namespace toa {

const CognitiveState& CognitionCache::at(const ChunkSequence& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end())
        throw Error(Errc::InvalidArgument, "no cached state for " + format_sequence(key));
    return it->second;
}

void CognitionCache::put(const ChunkSequence& key, CognitiveState state) {
    if (key.empty() || key.front() != owner_)
        throw Error(Errc::InvalidArgument, "cache key " + format_sequence(key) +
                                               " does not start at owner " + std::to_string(owner_));
    state.path = key;
    entries_.insert_or_assign(key, std::move(state));
}

std::vector<ChunkSequence> CognitionCache::keys() const {
    std::vector<ChunkSequence> out;
    out.reserve(entries_.size());
    for (const auto& [k, _] : entries_) out.push_back(k);
    return out;
}

std::optional<Utility> UsefulnessMap::find(const ChunkSequence& key) const {
    auto it = verdicts_.find(key);
    if (it == verdicts_.end()) return std::nullopt;
    return it->second;
}

void UsefulnessMap::set(const ChunkSequence& key, Utility verdict) {
    if (key.size() < 2 || key.front() != owner_)
        throw Error(Errc::InvalidArgument, "usefulness key " + format_sequence(key) + " is not an extension");
    verdicts_.insert_or_assign(key, verdict);
}

std::string_view to_string(TraceKind k) noexcept {
    switch (k) {
    case TraceKind::BeginSequence: return "begin_sequence";
    case TraceKind::CacheLoad: return "cache_load";
    case TraceKind::FreshCall: return "fresh_call";
    case TraceKind::MarkUseless: return "mark_useless";
    case TraceKind::Skip: return "skip";
    }
    return "unknown";
}

std::string to_json_line(const TraceEvent& e) {
    nlohmann::json j{{"event", std::string(to_string(e.kind))},
                     {"owner", e.owner},
                     {"sequence", e.sequence}};
    if (e.verdict) j["verdict"] = std::string(to_string(*e.verdict));
    if (e.reason) j["reason"] = *e.reason == SkipReason::PrunedHere ? "pruned_here" : "known_useless";
    if (e.degraded) j["degraded"] = true;
    return j.dump();
}

std::string format_trace_line(const TraceEvent& e) {
    auto last = [&] { return e.sequence.empty() ? std::string("?") : std::to_string(e.sequence.back()); };
    switch (e.kind) {
    case TraceKind::BeginSequence: return "Begin sequence " + render_agent_list(e.sequence) + ".";
    case TraceKind::CacheLoad: return "---Load cache " + format_sequence(e.sequence) + ".";
    case TraceKind::FreshCall: {
        std::string line = "---Saw Agent [" + last() + "]'s chunk - " +
                           std::string(to_string(e.verdict.value_or(Utility::Useless))) + ".";
        if (e.degraded) line += " (no usable reply)";
        if (e.verdict == Utility::Useful) line += " New cognition added: " + format_sequence(e.sequence) + ".";
        return line;
    }
    case TraceKind::MarkUseless: return "---Marked " + format_sequence(e.sequence) + " as useless.";
    case TraceKind::Skip:
        if (e.reason == SkipReason::KnownUseless)
            return "---" + format_sequence(e.sequence) + " is already proved useless, skip the rest of the sequence.";
        return "------Because [" + last() + "] is useless, skip the rest of the sequence.";
    }
    return {};
}

InterestSet gather_interests(AgentChannel& channel, const CognitiveState& own,
                             const std::vector<CognitiveState>& peers, const Query& query, int n) {
    InterestSet out{channel.id(), {}};
    auto resp = channel.select(query, own, peers);
    if (!resp) return out;
    out.members = filter_selection(std::move(*resp), channel.id(), n).selected_ids;
    return out;
}

namespace {

void permute(std::vector<int>& pool, std::vector<bool>& used, std::vector<int>& current,
             std::vector<std::vector<int>>& out) {
    if (current.size() == pool.size()) {
        out.push_back(current);
        return;
    }
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (used[i]) continue;
        used[i] = true;
        current.push_back(pool[i]);
        permute(pool, used, current, out);
        current.pop_back();
        used[i] = false;
    }
}

} // namespace

PathPlan enumerate_paths(const InterestSet& interests, std::size_t cap) {
    if (interests.members.size() > cap)
        throw Error(Errc::PathExplosion, "agent " + std::to_string(interests.owner) + " requested " +
                                             std::to_string(interests.members.size()) +
                                             " chunks; interest cap is " + std::to_string(cap));
    PathPlan plan{interests.owner, {}};
    if (interests.members.empty()) return plan;
    std::vector<int> pool = interests.members;
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    std::vector<bool> used(pool.size(), false);
    std::vector<int> current;
    permute(pool, used, current, plan.permutations);
    return plan;
}

TraverseStats traverse(AgentChannel& channel, const Query& query, const std::vector<Chunk>& chunks,
                       const PathPlan& plan, CognitionCache& cache, UsefulnessMap& useful,
                       TraverseOptions options, std::vector<TraceEvent>* trace) {
    const AgentId owner = plan.owner;
    const ChunkSequence root{owner};
    if (!cache.contains(root))
        throw Error(Errc::InvalidArgument, "cache lacks root state for agent " + std::to_string(owner));

    TraverseStats stats;
    auto emit = [&](TraceEvent e) {
        e.owner = owner;
        if (trace) trace->push_back(std::move(e));
    };

    for (const auto& perm : plan.permutations) {
        emit({TraceKind::BeginSequence, owner, perm, {}, {}, false});
        CognitiveState state = cache.at(root);
        ChunkSequence prefix = root;

        for (std::size_t r = 0; r < perm.size(); ++r) {
            const int next = perm[r];
            ChunkSequence seq = prefix;
            seq.push_back(next);
            const bool last_step = r + 1 == perm.size();

            const auto known = useful.find(seq);
            if (options.prune && known == Utility::Useless) {
                ++stats.skips;
                emit({TraceKind::Skip, owner, seq, {}, SkipReason::KnownUseless, false});
                break;
            }
            if (options.cache && cache.contains(seq)) {
                state = cache.at(seq);
                prefix = std::move(seq);
                ++stats.cache_loads;
                emit({TraceKind::CacheLoad, owner, prefix, {}, {}, false});
                continue;
            }

            if (next < 0 || static_cast<std::size_t>(next) >= chunks.size())
                throw Error(Errc::InvalidArgument, "chunk index " + std::to_string(next) + " out of range");
            auto reply = channel.update(query, state, chunks[static_cast<std::size_t>(next)], seq);
            ++stats.fresh_calls;
            const bool degraded = !reply.has_value();
            if (degraded) ++stats.degraded;
            const Utility verdict = reply ? reply->utility : Utility::Useless;
            emit({TraceKind::FreshCall, owner, seq, verdict, {}, degraded});

            useful.set(seq, verdict);
            if (verdict == Utility::Useful) {
                state = CognitiveState{reply->fact, reply->conclusion, seq};
                cache.put(seq, state);
                prefix = std::move(seq);
                continue;
            }

            ++stats.marked_useless;
            emit({TraceKind::MarkUseless, owner, seq, {}, {}, false});
            if (options.prune) {
                if (!last_step) {
                    ++stats.skips;
                    emit({TraceKind::Skip, owner, seq, {}, SkipReason::PrunedHere, false});
                }
                break;
            }
            state.path = seq;
            cache.put(seq, state);
            prefix = std::move(seq);
        }
    }
    return stats;
}

} // namespace toa
