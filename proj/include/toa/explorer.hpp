#pragma once

#include "toa/agent.hpp"
#include "toa/core.hpp"
#include "toa/prompts.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace toa {

/// Chunks an agent asked to read after seeing its peers' initial states.
struct InterestSet {
    AgentId owner = 0;
    std::vector<int> members; // sorted, owner excluded, all in [0, N)
};

/// Every ordering of the owner's interest set, each implicitly prefixed by the
/// owner's own chunk.
struct PathPlan {
    AgentId owner = 0;
    std::vector<std::vector<int>> permutations;
};

/// Prefix-keyed store of cognitive states for one agent.
class CognitionCache {
  public:
    explicit CognitionCache(AgentId owner) : owner_(owner) {}

    AgentId owner() const noexcept { return owner_; }
    bool contains(const ChunkSequence& key) const { return entries_.count(key) != 0; }
    const CognitiveState& at(const ChunkSequence& key) const;
    void put(const ChunkSequence& key, CognitiveState state);
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::vector<ChunkSequence> keys() const;
    const std::map<ChunkSequence, CognitiveState>& entries() const noexcept { return entries_; }

  private:
    AgentId owner_;
    std::map<ChunkSequence, CognitiveState> entries_;
};

/// Usefulness verdict per extended sequence (length >= 2).
class UsefulnessMap {
  public:
    explicit UsefulnessMap(AgentId owner) : owner_(owner) {}

    AgentId owner() const noexcept { return owner_; }
    std::optional<Utility> find(const ChunkSequence& key) const;
    void set(const ChunkSequence& key, Utility verdict);
    std::size_t size() const noexcept { return verdicts_.size(); }
    const std::map<ChunkSequence, Utility>& verdicts() const noexcept { return verdicts_; }

  private:
    AgentId owner_;
    std::map<ChunkSequence, Utility> verdicts_;
};

enum class TraceKind { BeginSequence, CacheLoad, FreshCall, MarkUseless, Skip };
enum class SkipReason { PrunedHere, KnownUseless };

std::string_view to_string(TraceKind k) noexcept;

struct TraceEvent {
    TraceKind kind = TraceKind::BeginSequence;
    AgentId owner = 0;
    ChunkSequence sequence;         // permutation for BeginSequence, full prefix otherwise
    std::optional<Utility> verdict; // FreshCall only
    std::optional<SkipReason> reason; // Skip only
    bool degraded = false;          // FreshCall whose reply could not be obtained

    bool operator==(const TraceEvent&) const = default;
};

std::string to_json_line(const TraceEvent& e);
/// Human-readable line in the style of a traversal log.
std::string format_trace_line(const TraceEvent& e);

struct TraverseOptions {
    bool cache = true; // reuse stored states for already-evaluated prefixes
    bool prune = true; // abandon a permutation at its first useless step
};

struct TraverseStats {
    std::size_t fresh_calls = 0;
    std::size_t cache_loads = 0;
    std::size_t marked_useless = 0;
    std::size_t skips = 0;
    std::size_t degraded = 0;
};

/// Renders the selection prompt with all peer states and filters the reply.
/// A failed or unparseable reply degrades to an empty interest set.
InterestSet gather_interests(AgentChannel& channel, const CognitiveState& own,
                             const std::vector<CognitiveState>& peers, const Query& query, int n);

/// Lexicographically ordered permutations of the interest set.
/// Throws PathExplosion when more than `cap` members are requested.
PathPlan enumerate_paths(const InterestSet& interests, std::size_t cap = 5);

/// Walks every permutation of `plan` from the owner's root state.
///
/// With caching and pruning on this is the usefulness-map algorithm: a prefix
/// known to be useless abandons the permutation with no call, a prefix known
/// to be useful is loaded from the cache, and otherwise one update call is
/// issued whose verdict is recorded. Useless steps are not cached as states.
///
/// Without pruning a useless step repeats the prior state and the walk goes
/// on; that repeated state is cached so later permutations can extend it.
/// Without caching every reachable prefix is re-evaluated.
TraverseStats traverse(AgentChannel& channel, const Query& query, const std::vector<Chunk>& chunks,
                       const PathPlan& plan, CognitionCache& cache, UsefulnessMap& useful,
                       TraverseOptions options = {}, std::vector<TraceEvent>* trace = nullptr);

} // namespace toa
