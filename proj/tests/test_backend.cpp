#include "toa/agent.hpp"
#include "toa/backend.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>

using namespace toa;

namespace {

CallRecord record(Phase p, AgentId a, std::size_t ordinal) {
    CallRecord r;
    r.phase = p;
    r.agent = a;
    r.ordinal = ordinal;
    return r;
}

ScriptedAgentSpec one_agent() {
    ScriptedAgentSpec spec;
    spec.agents.resize(1);
    spec.agents[0].perceive = {"saw it", "B"};
    spec.agents[0].default_final = "B";
    spec.agents[0].default_utility = Utility::Useful;
    return spec;
}

Query abcd() { return {"Which?", {{"A", "a"}, {"B", "b"}, {"C", "c"}, {"D", "d"}}}; }

} // namespace

TEST(TelemetryTest, CanonicalOrder) {
    Telemetry t;
    t.append(record(Phase::Finalize, 0, 3));
    t.append(record(Phase::Perceive, 1, 0));
    t.append(record(Phase::UpdateCognition, 0, 2));
    t.append(record(Phase::Perceive, 0, 0));
    t.append(record(Phase::UpdateCognition, 0, 1));
    auto rs = t.records();
    ASSERT_EQ(rs.size(), 5u);
    EXPECT_EQ(rs[0].phase, Phase::Perceive);
    EXPECT_EQ(rs[0].agent, 0);
    EXPECT_EQ(rs[1].agent, 1);
    EXPECT_EQ(rs[2].ordinal, 1u);
    EXPECT_EQ(rs[3].ordinal, 2u);
    EXPECT_EQ(rs[4].phase, Phase::Finalize);
    EXPECT_EQ(t.size(), 5u);
    t.clear();
    EXPECT_EQ(t.size(), 0u);
}

TEST(CallCountsTest, PhaseGroupsReproduceTableArithmetic) {
    // 100 examples x 5 agents x (perceive, select, finalize)
    std::vector<CallRecord> rs;
    for (int i = 0; i < 500; ++i) {
        rs.push_back(record(Phase::Perceive, 0, 0));
        rs.push_back(record(Phase::SelectChunks, 0, 1));
        rs.push_back(record(Phase::Finalize, 0, 2));
    }
    for (int i = 0; i < 1034; ++i) rs.push_back(record(Phase::UpdateCognition, 0, 3));
    auto c = call_counts(rs);
    EXPECT_EQ(c.group(PhaseGroup::Phase13).calls, 1500u);
    EXPECT_EQ(c.group(PhaseGroup::Phase2).calls, 1034u);
    EXPECT_EQ(c.total.calls, 2534u);
    EXPECT_EQ(c.by_phase.size(), kAllPhases.size());
    EXPECT_EQ(c.by_phase.at(Phase::TieBreak).calls, 0u);
}

TEST(RateLimiterTest, SpacesRequests) {
    RateLimiter limiter(50.0);
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < 6; ++i) limiter.acquire();
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    // the first token is immediate, the other five wait 20 ms each
    EXPECT_GE(ms, 90.0);
    EXPECT_LT(ms, 1000.0);
}

TEST(RateLimiterTest, DisabledNeverWaits) {
    RateLimiter limiter(0.0);
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < 1000; ++i) limiter.acquire();
    EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 0.5);
}

TEST(BackendConfigTest, ValidationAndEnvironment) {
    BackendConfig c;
    EXPECT_NO_THROW(c.validate());
    c.temperature = -1;
    EXPECT_THROW(c.validate(), Error);
    BackendConfig e;
    ::setenv("TOA_API_KEY", "sk-test", 1);
    ::setenv("TOA_ENDPOINT", "http://localhost:9/v1", 1);
    e.apply_environment();
    EXPECT_EQ(e.api_key, "sk-test");
    EXPECT_EQ(e.endpoint, "http://localhost:9/v1");
    ::unsetenv("TOA_API_KEY");
    ::unsetenv("TOA_ENDPOINT");
}

TEST(Scripted, ServesRulesAndOverrides) {
    auto spec = one_agent();
    spec.raw_overrides[{Phase::Perceive, 0, {0}}] = {"garbage", std::string(ScriptedAgentSpec::kFail)};
    ScriptedBackend b(spec);
    CallRequest req;
    req.phase = Phase::Perceive;
    req.agent = 0;
    req.sequence = {0};
    EXPECT_EQ(b.complete(req).text, "garbage");
    EXPECT_THROW(b.complete(req), CallFailure);
    EXPECT_EQ(parse_perceive(b.complete(req).text), (PerceiveResponse{"saw it", "B"}));

    req.phase = Phase::UpdateCognition;
    req.sequence = {0, 2};
    auto u = parse_update(b.complete(req).text);
    EXPECT_EQ(u.utility, Utility::Useful);
    EXPECT_EQ(u.fact, "facts after (0, 2)");

    req.phase = Phase::TieBreak;
    req.tied_labels = {"A", "C"};
    EXPECT_EQ(parse_finalize(b.complete(req).text).result, "A");
    EXPECT_TRUE(b.deterministic());
}

TEST(Scripted, MissingRuleIsConfigError) {
    ScriptedAgentSpec spec;
    spec.agents.resize(1);
    ScriptedBackend b(spec);
    CallRequest req;
    req.phase = Phase::UpdateCognition;
    req.sequence = {0, 1};
    try {
        b.complete(req);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InvalidConfig);
    }
}

TEST(InvokerTest, RecordsTokensAndOutcome) {
    ScriptedBackend b(one_agent());
    Telemetry t;
    Invoker inv(b, t);
    CallRequest req;
    req.phase = Phase::Finalize;
    req.system = "sys";
    req.prompt = "one two three";
    auto r = inv.complete(req, 7);
    EXPECT_EQ(r.record.prompt_tokens, 4u);
    EXPECT_EQ(r.record.completion_tokens, default_tokenizer().count(r.text));
    EXPECT_EQ(r.record.ordinal, 7u);
    EXPECT_EQ(r.record.outcome, CallOutcome::Ok);
    EXPECT_EQ(t.size(), 1u);
}

TEST(InvokerTest, FailureRecordedThenRethrown) {
    auto spec = one_agent();
    spec.raw_overrides[{Phase::Perceive, 0, {0}}] = {std::string(ScriptedAgentSpec::kFail)};
    ScriptedBackend b(spec);
    Telemetry t;
    Invoker inv(b, t);
    CallRequest req;
    req.sequence = {0};
    EXPECT_THROW(inv.complete(req, 0), CallFailure);
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t.records()[0].outcome, CallOutcome::Failed);
}

TEST(Channel, ParseRetryThenSuccess) {
    auto spec = one_agent();
    spec.raw_overrides[{Phase::Perceive, 0, {0}}] = {"I think it is B"};
    ScriptedBackend b(spec);
    Telemetry t;
    Invoker inv(b, t);
    PromptSet prompts;
    AgentChannel ch(inv, prompts, 0);
    Chunk chunk{0, "text", {0, 1}};
    auto r = ch.perceive(abcd(), chunk);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->answer, "B");
    EXPECT_EQ(t.size(), 2u);
    EXPECT_EQ(ch.calls_issued(), 2u);
}

TEST(Channel, RetriesExhaustedDegrades) {
    auto spec = one_agent();
    spec.raw_overrides[{Phase::Finalize, 0, {0}}] = {"x", "y", "z", "never reached"};
    ScriptedBackend b(spec);
    Telemetry t;
    Invoker inv(b, t);
    PromptSet prompts;
    AgentChannel ch(inv, prompts, 0, 2);
    EXPECT_FALSE(ch.finalize(abcd(), {"e", "B", {0}}));
    EXPECT_EQ(t.size(), 3u);
}

TEST(Channel, TransportFailureDegradesWithoutRetry) {
    auto spec = one_agent();
    spec.raw_overrides[{Phase::UpdateCognition, 0, {0, 1}}] = {std::string(ScriptedAgentSpec::kFail)};
    ScriptedBackend b(spec);
    Telemetry t;
    Invoker inv(b, t);
    PromptSet prompts;
    AgentChannel ch(inv, prompts, 0);
    Chunk chunk{1, "other", {1, 2}};
    EXPECT_FALSE(ch.update(abcd(), {"e", "B", {0}}, chunk, {0, 1}));
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t.records()[0].outcome, CallOutcome::Failed);
}

TEST(Channel, PromptCarriesQueryAndChunk) {
    struct Capture final : Backend {
        std::vector<CallRequest> seen;
        Completion complete(const CallRequest& r) override {
            seen.push_back(r);
            Completion c;
            c.text = R"({"evidence":"e","answer":"A"})";
            return c;
        }
        bool deterministic() const override { return true; }
        std::string name() const override { return "capture"; }
    } cap;
    Telemetry t;
    Invoker inv(cap, t);
    PromptSet prompts;
    AgentChannel ch(inv, prompts, 3);
    ch.perceive(abcd(), Chunk{3, "the butler did it", {0, 4}});
    ASSERT_EQ(cap.seen.size(), 1u);
    EXPECT_NE(cap.seen[0].prompt.find("the butler did it"), std::string::npos);
    EXPECT_NE(cap.seen[0].prompt.find("Which?"), std::string::npos);
    EXPECT_NE(cap.seen[0].prompt.find("C) c"), std::string::npos);
    EXPECT_EQ(cap.seen[0].agent, 3);
    EXPECT_EQ(cap.seen[0].sequence, (ChunkSequence{3}));
}
