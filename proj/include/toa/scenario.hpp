#pragma once

#include "toa/backend.hpp"
#include "toa/core.hpp"
#include "toa/explorer.hpp"
#include "toa/orchestrator.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace toa {

/// What a scripted scenario means, independent of the raw strings served by
/// its backend: the interest sets, the verdict of every reachable prefix and
/// the (already validated) answer each cache key would finalize to.
struct ScenarioTruth {
    int agents = 0;
    std::vector<std::string> labels;
    std::vector<std::vector<int>> interests;
    std::vector<std::map<ChunkSequence, Utility>> verdicts;
    std::vector<std::map<ChunkSequence, std::optional<std::string>>> finals;
    std::vector<std::string> tie_break_preference;
};

struct Scenario {
    std::uint64_t seed = 0;
    std::string document;
    Query query;
    ScriptedAgentSpec spec;
    ScenarioTruth truth;
};

/// Random scenario over N <= 5 agents with up to four interests each.
/// `interest_density` is the chance an agent wants a given peer's chunk,
/// `usefulness_density` the chance a prefix is judged useful.
Scenario gen_scripted_scenario(std::uint64_t seed, int agents, double interest_density,
                               double usefulness_density);

/// Draws N in [1, 5] and both densities from `seed`, then generates.
Scenario random_scenario(std::uint64_t seed);

/// The five-agent case study: agent 0 wants chunks {2, 3, 4} and prunes its
/// way to (0, 4, 3, 2); everyone finalizes A.
Scenario case_study_scenario();

struct OracleAgent {
    std::vector<ChunkSequence> cache_keys; // sorted
    std::map<ChunkSequence, Utility> usefulness;
    std::size_t update_calls = 0;
    ChunkSequence sigma;
    std::optional<std::string> answer;
};

struct OracleResult {
    std::vector<OracleAgent> agents;
    std::map<Phase, std::size_t> calls; // every phase present
    std::optional<std::string> final_answer;
    bool tie_broken = false;
};

/// Brute-force prediction for one engine setting. Prefixes are enumerated
/// from every ordering of each interest set and classified directly instead
/// of by replaying the walk step by step.
OracleResult oracle_predict(const ScenarioTruth& truth, TraverseOptions options, Mode mode = Mode::TOA);

struct OracleCheck {
    RunReport report;
    OracleResult expected;
    std::vector<std::string> mismatches; // empty when engine and oracle agree
};

/// Runs the engine on the scenario with a fresh scripted backend and compares
/// interests, cache keys, usefulness maps, per-phase call counts, verdicts and
/// the final answer against oracle_predict.
OracleCheck check_scenario(const Scenario& scenario, TraverseOptions options, Mode mode = Mode::TOA,
                           int concurrency = 0);

/// Closed-form count of distinct non-root prefixes for k interests:
/// sum over r = 1..k of k!/(k-r)!.
std::size_t distinct_prefix_count(std::size_t k);

} // namespace toa
