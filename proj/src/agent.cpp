#include "toa/agent.hpp"

namespace toa {

AgentChannel::AgentChannel(Invoker& invoker, const PromptSet& prompts, AgentId id, int parse_retries)
    : invoker_(invoker), prompts_(prompts), id_(id), parse_retries_(parse_retries) {}

template <typename Parse>
auto AgentChannel::ask(CallRequest request, Parse parse)
    -> std::optional<decltype(parse(std::string_view{}))> {
    request.agent = id_;
    request.system = std::string(kSystemMessage);
    for (int attempt = 0; attempt <= parse_retries_; ++attempt) {
        std::string text;
        try {
            text = invoker_.complete(request, ordinal_++).text;
        } catch (const CallFailure&) {
            return std::nullopt;
        }
        try {
            return parse(text);
        } catch (const Error& e) {
            if (e.code() != Errc::Unparseable) throw;
        } catch (const std::exception&) {
            // nlohmann type errors on odd field shapes count as unparseable
        }
    }
    return std::nullopt;
}

Bindings AgentChannel::base_bindings(const Query& query) const {
    return {{"query", query.question}, {"options", query.render_options()}};
}

std::optional<PerceiveResponse> AgentChannel::perceive(const Query& query, const Chunk& chunk) {
    auto b = base_bindings(query);
    b["chunk"] = chunk.text;
    CallRequest req;
    req.phase = Phase::Perceive;
    req.sequence = {chunk.index};
    req.prompt = render(prompts_.get(Phase::Perceive), b);
    return ask(std::move(req), [](std::string_view raw) { return parse_perceive(raw); });
}

std::optional<SelectResponse> AgentChannel::select(const Query& query, const CognitiveState& own,
                                                   const std::vector<CognitiveState>& peers) {
    auto b = base_bindings(query);
    b["own_cognition"] = render_cognition(own);
    std::string peer_text;
    std::vector<int> ids;
    for (const auto& p : peers) {
        const int pid = p.path.empty() ? -1 : p.path.front();
        ids.push_back(pid);
        peer_text += "Agent " + std::to_string(pid) + ":\n" + render_cognition(p) + "\n\n";
    }
    while (!peer_text.empty() && peer_text.back() == '\n') peer_text.pop_back();
    b["peer_cognitions"] = peer_text;
    b["agent_list"] = render_agent_list(ids);
    CallRequest req;
    req.phase = Phase::SelectChunks;
    req.sequence = own.path;
    req.prompt = render(prompts_.get(Phase::SelectChunks), b);
    return ask(std::move(req), [](std::string_view raw) { return parse_select(raw); });
}

std::optional<UpdateResponse> AgentChannel::update(const Query& query, const CognitiveState& current,
                                                   const Chunk& chunk, const ChunkSequence& sequence) {
    auto b = base_bindings(query);
    b["own_cognition"] = render_cognition(current);
    b["chunk"] = chunk.text;
    CallRequest req;
    req.phase = Phase::UpdateCognition;
    req.sequence = sequence;
    req.prompt = render(prompts_.get(Phase::UpdateCognition), b);
    return ask(std::move(req), [](std::string_view raw) { return parse_update(raw); });
}

std::optional<FinalizeResponse> AgentChannel::finalize(const Query& query, const CognitiveState& state) {
    auto b = base_bindings(query);
    b["own_cognition"] = render_cognition(state);
    CallRequest req;
    req.phase = Phase::Finalize;
    req.sequence = state.path;
    req.prompt = render(prompts_.get(Phase::Finalize), b);
    return ask(std::move(req), [](std::string_view raw) { return parse_finalize(raw); });
}

std::optional<TieBreakResponse> AgentChannel::tie_break(const Query& query,
                                                        const std::vector<std::string>& tied_labels,
                                                        const std::vector<CognitiveState>& tied_states,
                                                        std::size_t agent_count) {
    auto b = base_bindings(query);
    std::string peers;
    for (const auto& s : tied_states) {
        const int pid = s.path.empty() ? -1 : s.path.front();
        peers += "Agent " + std::to_string(pid) + ":\n" + render_cognition(s) + "\n\n";
    }
    while (!peers.empty() && peers.back() == '\n') peers.pop_back();
    std::string labels;
    for (std::size_t i = 0; i < tied_labels.size(); ++i) {
        if (i) labels += ", ";
        labels += tied_labels[i];
    }
    b["peer_cognitions"] = peers;
    b["result"] = labels;
    b["agent_count"] = std::to_string(agent_count);
    CallRequest req;
    req.phase = Phase::TieBreak;
    req.tied_labels = tied_labels;
    req.prompt = render(prompts_.get(Phase::TieBreak), b);
    return ask(std::move(req), [](std::string_view raw) { return parse_finalize(raw); });
}

} // namespace toa
