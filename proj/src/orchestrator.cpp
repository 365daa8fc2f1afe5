#include "toa/orchestrator.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace toa {

using nlohmann::json;

std::string_view to_string(Mode m) noexcept {
    switch (m) {
    case Mode::TOA: return "toa";
    case Mode::Sequential: return "sequential";
    case Mode::Vote: return "vote";
    }
    return "unknown";
}

std::optional<Mode> mode_from_string(std::string_view s) noexcept {
    for (Mode m : {Mode::TOA, Mode::Sequential, Mode::Vote})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

void RunConfig::validate() const {
    if (agents < 1) throw Error(Errc::InvalidConfig, "number of agents must be >= 1");
    if (context_budget < 1) throw Error(Errc::InvalidConfig, "context budget must be >= 1");
    if (parse_retries < 0) throw Error(Errc::InvalidConfig, "parse_retries must be >= 0");
    if (concurrency < 0) throw Error(Errc::InvalidConfig, "concurrency must be >= 0");
    backend.validate();
}

std::string config_to_json(const RunConfig& c) {
    json j{{"agents", c.agents},
           {"context_budget", c.context_budget},
           {"mode", std::string(to_string(c.mode))},
           {"cache", c.cache},
           {"prune", c.prune},
           {"interest_cap", c.interest_cap},
           {"seed", c.seed},
           {"concurrency", c.concurrency},
           {"parse_retries", c.parse_retries},
           {"snap_window", c.split.snap_window},
           {"backend",
            {{"endpoint", c.backend.endpoint},
             {"model", c.backend.model},
             {"temperature", c.backend.temperature},
             {"max_output_tokens", c.backend.max_output_tokens},
             {"timeout_ms", c.backend.timeout.count()},
             {"max_retries", c.backend.max_retries},
             {"rate_limit", c.backend.rate_limit}}}};
    return j.dump();
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t limit, Fn&& fn) {
    if (limit <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    {
        std::vector<std::jthread> workers;
        const std::size_t count = std::min(limit, n);
        workers.reserve(count);
        for (std::size_t w = 0; w < count; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mu);
                        if (!first_error) first_error = std::current_exception();
                    }
                }
            });
        }
    }
    if (first_error) std::rethrow_exception(first_error);
}

json tally_json(const PhaseTally& t) {
    return {{"calls", t.calls}, {"prompt_tokens", t.prompt_tokens}, {"completion_tokens", t.completion_tokens}};
}

json optional_label(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

struct AgentSlot {
    AgentChannel channel;
    CognitionCache cache;
    UsefulnessMap useful;
    AgentReport report;
    bool failed = false;
};

} // namespace

RunReport run(const RunConfig& config, const Document& doc, const Query& query, Backend& backend) {
    config.validate();
    query.validate();
    const auto started = std::chrono::steady_clock::now();

    const auto chunks = split_document(doc, config.agents, config.split);
    for (const auto& c : chunks)
        if (c.length() > config.context_budget)
            throw Error(Errc::InvalidConfig, "chunk " + std::to_string(c.index) + " has " +
                                                 std::to_string(c.length()) + " tokens, over the budget of " +
                                                 std::to_string(config.context_budget));

    Telemetry telemetry;
    Invoker invoker(backend, telemetry);
    const int n = config.agents;
    const int active = config.mode == Mode::Sequential ? 1 : n;
    const std::size_t limit =
        static_cast<std::size_t>(config.concurrency > 0 ? config.concurrency : active);

    std::vector<std::unique_ptr<AgentSlot>> slots;
    for (int i = 0; i < active; ++i) {
        auto slot = std::unique_ptr<AgentSlot>(new AgentSlot{
            AgentChannel(invoker, config.prompts, i, config.parse_retries), CognitionCache(i),
            UsefulnessMap(i), AgentReport{}, false});
        slot->report.agent = i;
        slot->report.token_span = chunks[static_cast<std::size_t>(i)].token_span;
        slots.push_back(std::move(slot));
    }
    auto fail = [](AgentSlot& s, const std::exception& e) {
        s.failed = true;
        if (!s.report.error) s.report.error = e.what();
    };

    // Perception
    parallel_for(slots.size(), limit, [&](std::size_t i) {
        auto& s = *slots[i];
        const int id = static_cast<int>(i);
        CognitiveState initial{"None", "None", {id}};
        try {
            if (auto r = s.channel.perceive(query, chunks[i])) {
                initial = {r->evidence, r->answer, {id}};
            } else {
                s.failed = true;
                s.report.error = "no usable perception reply";
            }
        } catch (const Error& e) {
            fail(s, e);
        }
        s.report.initial = initial;
        s.cache.put({id}, initial);
    });

    // Exploration
    if (config.mode == Mode::Sequential && n > 1) {
        auto& s = *slots[0];
        if (!s.failed) {
            PathPlan plan{0, {{}}};
            for (int j = 1; j < n; ++j) plan.permutations[0].push_back(j);
            try {
                s.report.stats = traverse(s.channel, query, chunks, plan, s.cache, s.useful,
                                          {true, false}, &s.report.trace);
            } catch (const Error& e) {
                fail(s, e);
            }
        }
    } else if (config.mode == Mode::TOA && n > 1) {
        std::vector<CognitiveState> initials;
        for (const auto& s : slots) initials.push_back(s->report.initial);
        parallel_for(slots.size(), limit, [&](std::size_t i) {
            auto& s = *slots[i];
            if (s.failed) return;
            std::vector<CognitiveState> peers;
            for (std::size_t j = 0; j < initials.size(); ++j)
                if (j != i) peers.push_back(initials[j]);
            try {
                auto interests = gather_interests(s.channel, initials[i], peers, query, n);
                s.report.interests = interests.members;
                auto plan = enumerate_paths(interests, config.interest_cap);
                s.report.stats = traverse(s.channel, query, chunks, plan, s.cache, s.useful,
                                          {config.cache, config.prune}, &s.report.trace);
            } catch (const Error& e) {
                fail(s, e);
            }
        });
    }

    // Consensus
    parallel_for(slots.size(), limit, [&](std::size_t i) {
        auto& s = *slots[i];
        s.report.cache_keys = s.cache.keys();
        s.report.usefulness = s.useful.verdicts();
        s.report.verdict.agent = static_cast<int>(i);
        s.report.verdict.sigma = {static_cast<int>(i)};
        if (s.failed) return;
        try {
            const auto sigma = select_longest(s.cache);
            s.report.verdict = finalize_agent(s.channel, query, s.cache.at(sigma));
        } catch (const Error& e) {
            fail(s, e);
        }
    });

    std::vector<AgentVerdict> verdicts;
    for (const auto& s : slots) verdicts.push_back(s->report.verdict);
    AgentChannel tie_channel(invoker, config.prompts, active, config.parse_retries);

    RunReport report;
    report.mode = config.mode;
    report.chunk_count = n;
    report.document_tokens = doc.token_count();
    report.vote = majority_vote(verdicts, query, &tie_channel);
    report.final_answer = report.vote.winner;
    for (auto& s : slots) {
        report.cache_hits += s->report.stats.cache_loads;
        report.prunes += s->report.stats.marked_useless;
        report.skips += s->report.stats.skips;
        report.agents.push_back(std::move(s->report));
    }
    report.calls = telemetry.records();
    report.counts = call_counts(report.calls);
    report.deterministic = backend.deterministic();
    report.backend_name = backend.name();
    report.config_echo = config_to_json(config);
    report.wall_clock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    return report;
}

std::string RunReport::to_json(int indent) const {
    json agents_json = json::array();
    for (const auto& a : agents) {
        json useful = json::array();
        for (const auto& [seq, u] : a.usefulness)
            useful.push_back({{"sequence", seq}, {"verdict", std::string(to_string(u))}});
        json entry{{"agent", a.agent},
                   {"token_span", {a.token_span.first, a.token_span.second}},
                   {"initial", {{"evidence", a.initial.evidence}, {"answer", a.initial.answer}}},
                   {"interests", a.interests},
                   {"cache_keys", a.cache_keys},
                   {"usefulness", useful},
                   {"sigma_star", a.verdict.sigma},
                   {"answer", optional_label(a.verdict.answer)},
                   {"degraded", a.verdict.degraded},
                   {"stats",
                    {{"fresh_calls", a.stats.fresh_calls},
                     {"cache_loads", a.stats.cache_loads},
                     {"marked_useless", a.stats.marked_useless},
                     {"skips", a.stats.skips},
                     {"degraded", a.stats.degraded}}}};
        if (a.error) entry["error"] = *a.error;
        agents_json.push_back(std::move(entry));
    }
    json by_phase = json::object();
    for (const auto& [phase, tally] : counts.by_phase) by_phase[std::string(to_string(phase))] = tally_json(tally);

    json j{{"mode", std::string(to_string(mode))},
           {"chunks", chunk_count},
           {"document_tokens", document_tokens},
           {"final_answer", optional_label(final_answer)},
           {"backend", backend_name},
           {"deterministic", deterministic},
           {"vote",
            {{"tallies", vote.tallies},
             {"none_count", vote.none_count},
             {"winner", optional_label(vote.winner)},
             {"tie_broken", vote.tie_broken},
             {"tie_break_degraded", vote.tie_break_degraded},
             {"tied", vote.tied}}},
           {"agents", agents_json},
           {"calls",
            {{"by_phase", by_phase},
             {"phase_2", tally_json(counts.group(PhaseGroup::Phase2))},
             {"phase_1_3", tally_json(counts.group(PhaseGroup::Phase13))},
             {"total", tally_json(counts.total)}}},
           {"cache_hits", cache_hits},
           {"prunes", prunes},
           {"skips", skips},
           {"config", json::parse(config_echo.empty() ? "{}" : config_echo)}};
    if (!deterministic) j["wall_clock_ms"] = wall_clock_ms;
    return j.dump(indent);
}

std::string RunReport::trace_jsonl() const {
    std::string out;
    for (const auto& a : agents)
        for (const auto& e : a.trace) out += to_json_line(e) + "\n";
    return out;
}

std::string RunReport::to_text() const {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "Assigned to %d agents, length %d*%.1f = %zu", chunk_count, chunk_count,
                  chunk_count == 0 ? 0.0 : double(document_tokens) / double(chunk_count), document_tokens);
    os << "Mode: " << to_string(mode) << "   Backend: " << backend_name << "\n" << buf << "\n\n";

    os << "Chunk perception\n";
    for (const auto& a : agents)
        os << "  Agent " << a.agent << ": " << a.initial.answer << "  | " << a.initial.evidence
           << (a.error ? "  [error: " + *a.error + "]" : "") << "\n";

    if (mode == Mode::TOA && agents.size() > 1) {
        os << "\nInterest selection\n";
        for (const auto& a : agents) {
            std::vector<int> peers;
            for (const auto& b : agents)
                if (b.agent != a.agent) peers.push_back(b.agent);
            os << "  Agent " << a.agent << ": saw " << render_agent_list(peers) << "'s cognition, wants "
               << render_agent_list(a.interests) << "'s chunk\n";
        }
    }
    bool any_trace = false;
    for (const auto& a : agents) any_trace |= !a.trace.empty();
    if (any_trace) {
        os << "\nTraversal\n";
        for (const auto& a : agents) {
            if (a.trace.empty()) continue;
            os << "  Agent " << a.agent << ":\n";
            for (const auto& e : a.trace) os << "    " << format_trace_line(e) << "\n";
        }
    }
    os << "\nCognition summary\n ";
    for (const auto& a : agents) {
        for (const auto& k : a.cache_keys) os << " " << format_sequence(k);
        os << "   ";
    }
    os << "\nLongest cognitions\n ";
    for (const auto& a : agents) os << " " << format_sequence(a.verdict.sigma);
    os << "\n\nConsensus\n ";
    for (const auto& a : agents) os << " Agent " << a.agent << ": " << a.verdict.answer.value_or("None");
    os << "\n  Majority answer: " << final_answer.value_or("None");
    if (vote.tie_broken) os << " (tie-break" << (vote.tie_break_degraded ? ", degraded" : "") << ")";
    os << "\n\nCalls by phase\n";
    for (const auto& [phase, t] : counts.by_phase) {
        std::snprintf(buf, sizeof buf, "  %-17s %6zu calls %10zu prompt tokens %8zu completion tokens\n",
                      std::string(to_string(phase)).c_str(), t.calls, t.prompt_tokens, t.completion_tokens);
        os << buf;
    }
    const auto p2 = counts.group(PhaseGroup::Phase2);
    const auto p13 = counts.group(PhaseGroup::Phase13);
    std::snprintf(buf, sizeof buf, "  phase 2: %zu   phase 1&3: %zu   total: %zu   cache hits: %zu   prunes: %zu\n",
                  p2.calls, p13.calls, counts.total.calls, cache_hits, prunes);
    os << buf;
    if (!deterministic) {
        std::snprintf(buf, sizeof buf, "  wall clock: %.1f ms\n", wall_clock_ms);
        os << buf;
    }
    return os.str();
}

double saving_rate(std::size_t baseline, std::size_t value) {
    if (baseline == 0) return 0.0;
    return 100.0 * (static_cast<double>(baseline) - static_cast<double>(value)) / static_cast<double>(baseline);
}

std::string format_percent(double pct) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", pct);
    return buf;
}

std::string format_call_table(std::size_t none, std::size_t cache_only, std::size_t cache_prune,
                              std::size_t phase13) {
    std::ostringstream os;
    char buf[160];
    auto row = [&](const char* phase, const char* strategy, std::size_t calls, std::string saved,
                   std::string rate) {
        std::snprintf(buf, sizeof buf, "%-12s %-24s %10zu %12s %12s\n", phase, strategy, calls, saved.c_str(),
                      rate.c_str());
        os << buf;
    };
    std::snprintf(buf, sizeof buf, "%-12s %-24s %10s %12s %12s\n", "Phase", "Strategy", "API Calls",
                  "Saved Calls", "Saving Rate");
    os << buf;
    auto saved = [&](std::size_t v) {
        return none >= v ? std::to_string(none - v) : "-" + std::to_string(v - none);
    };
    row("Phase 2", "w/o Caching & Pruning", none, "--", "--");
    row("Phase 2", "w/ Caching Only", cache_only, saved(cache_only), format_percent(saving_rate(none, cache_only)));
    row("Phase 2", "w/ Caching & Pruning", cache_prune, saved(cache_prune),
        format_percent(saving_rate(none, cache_prune)));
    row("Phase 1 & 3", "--", phase13, "--", "--");
    row("All Phases", "w/ Caching & Pruning", cache_prune + phase13, "--", "--");
    return os.str();
}

std::string AblationReport::to_text() const {
    if (rows.size() != 3) return {};
    std::ostringstream os;
    os << format_call_table(rows[0].phase2_calls, rows[1].phase2_calls, rows[2].phase2_calls,
                            rows[2].phase13_calls);
    char buf[200];
    const auto tokens = [](const AblationRow& r) { return r.prompt_tokens + r.completion_tokens; };
    std::snprintf(buf, sizeof buf, "\n%-18s %-18s %-18s %-14s\n", "NO Cache&Prune", "with Cache",
                  "with Cache+Prune", "Token Savings");
    os << buf;
    std::snprintf(buf, sizeof buf, "%-18zu %-18zu %-18zu %-14s\n", tokens(rows[0]), tokens(rows[1]),
                  tokens(rows[2]), format_percent(saving_rate(tokens(rows[0]), tokens(rows[2]))).c_str());
    os << buf;
    return os.str();
}

std::string AblationReport::to_json(int indent) const {
    json out = json::array();
    const std::size_t base = rows.empty() ? 0 : rows[0].phase2_calls;
    for (const auto& r : rows) {
        out.push_back({{"strategy", r.strategy},
                       {"cache", r.cache},
                       {"prune", r.prune},
                       {"phase2_calls", r.phase2_calls},
                       {"phase13_calls", r.phase13_calls},
                       {"prompt_tokens", r.prompt_tokens},
                       {"completion_tokens", r.completion_tokens},
                       {"saving_rate", saving_rate(base, r.phase2_calls)}});
    }
    return json{{"rows", out}}.dump(indent);
}

AblationReport compare_ablations(const RunConfig& config, const Document& doc, const Query& query,
                                 const BackendFactory& make_backend) {
    struct Setting {
        const char* name;
        bool cache;
        bool prune;
    };
    static constexpr Setting settings[] = {
        {"w/o Caching & Pruning", false, false},
        {"w/ Caching Only", true, false},
        {"w/ Caching & Pruning", true, true},
    };
    AblationReport out;
    for (const auto& s : settings) {
        RunConfig cfg = config;
        cfg.mode = Mode::TOA;
        cfg.cache = s.cache;
        cfg.prune = s.prune;
        auto backend = make_backend();
        auto report = run(cfg, doc, query, *backend);
        AblationRow row{s.name,
                        s.cache,
                        s.prune,
                        report.counts.group(PhaseGroup::Phase2).calls,
                        report.counts.group(PhaseGroup::Phase13).calls,
                        report.counts.total.prompt_tokens,
                        report.counts.total.completion_tokens};
        out.rows.push_back(row);
        out.runs.push_back(std::move(report));
    }
    return out;
}

} // namespace toa
