#include "toa/orchestrator.hpp"
#include "toa/scenario.hpp"

#include <gtest/gtest.h>

using namespace toa;

namespace {

RunConfig config_for(const Scenario& s) {
    RunConfig c;
    c.agents = s.truth.agents;
    return c;
}

RunReport run_scenario(const Scenario& s, const RunConfig& c) {
    ScriptedBackend backend(s.spec);
    return run(c, Document(s.document), s.query, backend);
}

std::size_t phase_calls(const RunReport& r, Phase p) { return r.counts.by_phase.at(p).calls; }

} // namespace

TEST(Run, CaseStudy) {
    auto s = case_study_scenario();
    auto r = run_scenario(s, config_for(s));
    EXPECT_EQ(r.final_answer, "A");
    ASSERT_EQ(r.agents.size(), 5u);
    EXPECT_EQ(r.agents[0].interests, (std::vector<int>{2, 3, 4}));
    EXPECT_EQ(r.agents[4].interests, (std::vector<int>{0}));
    EXPECT_EQ(r.agents[0].cache_keys,
              (std::vector<ChunkSequence>{{0}, {0, 3}, {0, 3, 4}, {0, 4}, {0, 4, 3}, {0, 4, 3, 2}}));
    const std::vector<ChunkSequence> longest{{0, 4, 3, 2}, {1, 4}, {2, 4}, {3, 4}, {4, 0}};
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(r.agents[i].verdict.sigma, longest[i]);
        EXPECT_EQ(r.agents[i].verdict.answer, "A");
        EXPECT_EQ(r.agents[i].token_span.second - r.agents[i].token_span.first, 4428u);
    }
    EXPECT_EQ(r.agents[0].initial.answer, "D");
    EXPECT_EQ(r.agents[0].trace.size(), 25u);
    EXPECT_EQ(phase_calls(r, Phase::Perceive), 5u);
    EXPECT_EQ(phase_calls(r, Phase::SelectChunks), 5u);
    EXPECT_EQ(phase_calls(r, Phase::UpdateCognition), 13u);
    EXPECT_EQ(phase_calls(r, Phase::Finalize), 5u);
    EXPECT_EQ(phase_calls(r, Phase::TieBreak), 0u);
    EXPECT_EQ(r.cache_hits, 2u);
    EXPECT_EQ(r.prunes, 4u);
    EXPECT_TRUE(r.deterministic);
    const auto text = r.to_text();
    EXPECT_NE(text.find("Assigned to 5 agents, length 5*4428.0 = 22140"), std::string::npos);
    EXPECT_NE(text.find("Agent 0: saw [1, 2, 3, 4]'s cognition, wants [2, 3, 4]'s chunk"), std::string::npos);
    EXPECT_NE(text.find("Majority answer: A"), std::string::npos);
}

TEST(Run, SingleAgentMakesTwoCalls) {
    auto s = gen_scripted_scenario(3, 1, 1.0, 1.0);
    auto r = run_scenario(s, config_for(s));
    EXPECT_EQ(r.calls.size(), 2u);
    EXPECT_EQ(phase_calls(r, Phase::Perceive), 1u);
    EXPECT_EQ(phase_calls(r, Phase::Finalize), 1u);
}

TEST(Run, ReportsAreByteIdentical) {
    auto s = random_scenario(42);
    auto c = config_for(s);
    const auto a = run_scenario(s, c).to_json();
    const auto b = run_scenario(s, c).to_json();
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.find("wall_clock_ms"), std::string::npos);
}

TEST(Run, ConcurrencyDoesNotChangeResults) {
    auto s = case_study_scenario();
    auto c = config_for(s);
    c.concurrency = 1;
    auto serial = run_scenario(s, c);
    c.concurrency = 5;
    auto parallel = run_scenario(s, c);
    EXPECT_EQ(serial.calls, parallel.calls);
    EXPECT_EQ(serial.final_answer, parallel.final_answer);
    EXPECT_EQ(serial.trace_jsonl(), parallel.trace_jsonl());
}

TEST(Run, TalliesReconcileWithCallStream) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto s = random_scenario(seed);
        auto r = run_scenario(s, config_for(s));
        std::size_t sum = 0;
        for (const auto& [_, t] : r.counts.by_phase) sum += t.calls;
        EXPECT_EQ(sum, r.calls.size());
        EXPECT_EQ(r.counts.total.calls, r.calls.size());
    }
}

TEST(Run, VoteModeEqualsEmptyInterests) {
    auto s = gen_scripted_scenario(9, 5, 0.7, 0.5);
    auto c = config_for(s);
    c.mode = Mode::Vote;
    auto vote = run_scenario(s, c);
    EXPECT_EQ(phase_calls(vote, Phase::SelectChunks), 0u);
    EXPECT_EQ(phase_calls(vote, Phase::UpdateCognition), 0u);

    auto empty = s;
    for (auto& a : empty.spec.agents) a.select_ids = "None";
    auto toa = run_scenario(empty, config_for(empty));
    EXPECT_EQ(vote.vote.tallies, toa.vote.tallies);
    EXPECT_EQ(vote.final_answer, toa.final_answer);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(vote.agents[i].verdict.answer, toa.agents[i].verdict.answer);
}

TEST(Run, SequentialFoldsChunksInOrder) {
    auto s = case_study_scenario();
    s.spec.agents[0].default_utility = Utility::Useful;
    auto c = config_for(s);
    c.mode = Mode::Sequential;
    auto r = run_scenario(s, c);
    ASSERT_EQ(r.agents.size(), 1u);
    EXPECT_EQ(r.chunk_count, 5);
    EXPECT_EQ(r.document_tokens, 22140u);
    EXPECT_EQ(phase_calls(r, Phase::Perceive), 1u);
    EXPECT_EQ(phase_calls(r, Phase::UpdateCognition), 4u);
    EXPECT_EQ(phase_calls(r, Phase::Finalize), 1u);
    EXPECT_EQ(r.agents[0].verdict.sigma, (ChunkSequence{0, 1, 2, 3, 4}));
    EXPECT_EQ(r.final_answer, "A");
}

TEST(Run, BudgetTooSmallRejected) {
    auto s = case_study_scenario();
    auto c = config_for(s);
    c.context_budget = 4000;
    try {
        run_scenario(s, c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InvalidConfig);
    }
}

TEST(Run, InvalidConfigRejected) {
    auto s = case_study_scenario();
    auto c = config_for(s);
    c.agents = 0;
    EXPECT_THROW(run_scenario(s, c), Error);
}

TEST(Run, FailedAgentVotesNone) {
    auto s = case_study_scenario();
    s.spec.raw_overrides[{Phase::Perceive, 2, {2}}] = {std::string(ScriptedAgentSpec::kFail)};
    auto r = run_scenario(s, config_for(s));
    EXPECT_EQ(r.final_answer, "A");
    EXPECT_TRUE(r.agents[2].error);
    EXPECT_FALSE(r.agents[2].verdict.answer);
    EXPECT_EQ(r.vote.none_count, 1);
    EXPECT_EQ(phase_calls(r, Phase::Finalize), 4u);
}

TEST(Run, PathExplosionIsolatedToAgent) {
    auto s = case_study_scenario();
    auto c = config_for(s);
    c.interest_cap = 2;
    auto r = run_scenario(s, c);
    ASSERT_TRUE(r.agents[0].error);
    EXPECT_NE(r.agents[0].error->find("interest cap"), std::string::npos);
    EXPECT_FALSE(r.agents[0].verdict.answer);
    EXPECT_EQ(r.final_answer, "A");
    EXPECT_EQ(r.vote.tallies.at("A"), 4);
}

TEST(Run, JsonReportShape) {
    auto s = case_study_scenario();
    auto r = run_scenario(s, config_for(s));
    const auto j = r.to_json();
    for (const char* key : {"\"final_answer\": \"A\"", "\"phase_2\"", "\"phase_1_3\"", "\"sigma_star\"",
                            "\"cache_hits\": 2", "\"tallies\"", "\"config\""})
        EXPECT_NE(j.find(key), std::string::npos) << key;
}

TEST(Savings, TableFixture) {
    EXPECT_EQ(format_percent(saving_rate(2103, 1830)), "13.0%");
    EXPECT_EQ(format_percent(saving_rate(2103, 1034)), "50.8%");
    EXPECT_EQ(saving_rate(0, 0), 0.0);
    const auto table = format_call_table(2103, 1830, 1034, 1500);
    EXPECT_NE(table.find("13.0%"), std::string::npos);
    EXPECT_NE(table.find("50.8%"), std::string::npos);
    EXPECT_NE(table.find("273"), std::string::npos);
    EXPECT_NE(table.find("1069"), std::string::npos);
    EXPECT_NE(table.find("2534"), std::string::npos);
}

TEST(Ablation, AllUsefulFollowsPrefixLaw) {
    auto s = gen_scripted_scenario(5, 4, 1.0, 1.0);
    auto spec = s.spec;
    auto rep = compare_ablations(config_for(s), Document(s.document), s.query,
                                 [spec] { return std::make_unique<ScriptedBackend>(spec); });
    ASSERT_EQ(rep.rows.size(), 3u);
    EXPECT_EQ(rep.rows[0].phase2_calls, 4u * 3 * 6);
    EXPECT_EQ(rep.rows[1].phase2_calls, 4u * distinct_prefix_count(3));
    EXPECT_EQ(rep.rows[2].phase2_calls, rep.rows[1].phase2_calls);
    EXPECT_EQ(rep.rows[0].phase13_calls, rep.rows[2].phase13_calls);
    EXPECT_NE(rep.to_text().find("16.7%"), std::string::npos);
}

TEST(Ablation, ZeroInterestsSaveNothing) {
    auto s = gen_scripted_scenario(5, 4, 0.0, 0.5);
    auto spec = s.spec;
    auto rep = compare_ablations(config_for(s), Document(s.document), s.query,
                                 [spec] { return std::make_unique<ScriptedBackend>(spec); });
    for (const auto& row : rep.rows) EXPECT_EQ(row.phase2_calls, 0u);
    EXPECT_NE(rep.to_text().find("0.0%"), std::string::npos);
}

TEST(Modes, Names) {
    for (Mode m : {Mode::TOA, Mode::Sequential, Mode::Vote}) EXPECT_EQ(mode_from_string(to_string(m)), m);
    EXPECT_FALSE(mode_from_string("debate"));
}
