#pragma once

#include "toa/backend.hpp"
#include "toa/core.hpp"
#include "toa/prompts.hpp"

#include <optional>
#include <string>
#include <vector>

namespace toa {

inline constexpr std::string_view kSystemMessage =
    "You are one agent in a multi-agent reading system. Reply with a single JSON object in "
    "the requested output format.";

/// One agent's view of the backend. Renders the phase prompt, issues the call
/// through the shared Invoker and parses the reply. Malformed replies are
/// re-requested up to `parse_retries` times; a transport failure or exhausted
/// retries yields nullopt and the caller applies the phase's degrade rule.
///
/// Not thread-safe: each agent owns its channel for the whole run, which keeps
/// its call ordinals (and so the canonical telemetry order) reproducible.
class AgentChannel {
  public:
    AgentChannel(Invoker& invoker, const PromptSet& prompts, AgentId id, int parse_retries = 2);

    AgentId id() const noexcept { return id_; }
    std::size_t calls_issued() const noexcept { return ordinal_; }

    std::optional<PerceiveResponse> perceive(const Query& query, const Chunk& chunk);

    /// `peers` are the other agents' initial states; each path()[0] names the peer.
    std::optional<SelectResponse> select(const Query& query, const CognitiveState& own,
                                         const std::vector<CognitiveState>& peers);

    /// `sequence` is the path the new state would be stored under.
    std::optional<UpdateResponse> update(const Query& query, const CognitiveState& current,
                                         const Chunk& chunk, const ChunkSequence& sequence);

    std::optional<FinalizeResponse> finalize(const Query& query, const CognitiveState& state);

    /// `tied_states` are the states of agents whose answer is among `tied_labels`.
    std::optional<TieBreakResponse> tie_break(const Query& query,
                                              const std::vector<std::string>& tied_labels,
                                              const std::vector<CognitiveState>& tied_states,
                                              std::size_t agent_count);

  private:
    template <typename Parse>
    auto ask(CallRequest request, Parse parse) -> std::optional<decltype(parse(std::string_view{}))>;

    Bindings base_bindings(const Query& query) const;

    Invoker& invoker_;
    const PromptSet& prompts_;
    AgentId id_;
    int parse_retries_;
    std::size_t ordinal_ = 0;
};

} // namespace toa
