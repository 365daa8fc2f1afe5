#include "toa/harness.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace toa;

namespace {

std::filesystem::path write_tmp(const std::string& name, const std::string& content) {
    auto dir = std::filesystem::temp_directory_path() / "toa_harness_tests";
    std::filesystem::create_directories(dir);
    auto p = dir / name;
    std::ofstream(p, std::ios::binary) << content;
    return p;
}

std::size_t occurrences(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
    return n;
}

std::size_t diff(std::size_t a, std::size_t b) { return a > b ? a - b : b - a; }

} // namespace

TEST(Dataset, EmptyFile) { EXPECT_TRUE(load_dataset(write_tmp("empty.jsonl", "")).empty()); }

TEST(Dataset, TwoRecordsInOrder) {
    auto p = write_tmp("two.jsonl",
                       R"({"id":"q1","document":"Ann met Bob.","question":"Who met Bob?","options":[{"label":"A","text":"Ann"},{"label":"B","text":"Cid"}],"gold":"A"})"
                       "\n\n"
                       R"({"id":7,"document_path":"doc.txt","question":"Where?","options":{"A":"here","B":"there"}})"
                       "\n");
    write_tmp("doc.txt", "Somewhere far away.");
    auto rs = load_dataset(p);
    ASSERT_EQ(rs.size(), 2u);
    EXPECT_EQ(rs[0].id, "q1");
    EXPECT_EQ(rs[0].gold, "A");
    EXPECT_EQ(rs[0].options.size(), 2u);
    EXPECT_EQ(rs[0].load_document(), "Ann met Bob.");
    EXPECT_EQ(rs[1].id, "7");
    EXPECT_FALSE(rs[1].gold);
    EXPECT_EQ(rs[1].load_document(), "Somewhere far away.");
    EXPECT_EQ(rs[1].query().labels(), (std::vector<std::string>{"A", "B"}));
}

TEST(Dataset, MissingQuestionNamesLine) {
    auto p = write_tmp("bad.jsonl", R"({"document":"x","question":"q"})"
                                    "\n"
                                    R"({"document":"x"})"
                                    "\n");
    try {
        load_dataset(p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ParseError);
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
    }
}

TEST(Dataset, GoldMustBeAnOption) {
    auto p = write_tmp("gold.jsonl", R"({"document":"x","question":"q","options":{"A":"a"},"gold":"C"})"
                                     "\n");
    EXPECT_THROW(load_dataset(p), Error);
    EXPECT_THROW(load_dataset("/nonexistent/file.jsonl"), Error);
}

TEST(Haystack, DepthZeroLeads) {
    auto spec = single_needle_fixture(1000, 0, synthetic_filler(1200, 1));
    auto h = build_haystack(spec);
    ASSERT_EQ(h.placements.size(), 1u);
    EXPECT_EQ(h.placements[0].byte_offset, 0u);
    EXPECT_EQ(h.text.rfind(spec.needles[0].text, 0), 0u);
    EXPECT_EQ(h.token_count, 1000u);
}

TEST(Haystack, SingleNeedleMidway) {
    auto spec = single_needle_fixture(1000, 50, synthetic_filler(1200, 2));
    auto h = build_haystack(spec);
    EXPECT_EQ(h.token_count, 1000u);
    EXPECT_EQ(occurrences(h.text, spec.needles[0].text), 1u);
    EXPECT_LE(diff(h.placements[0].token_offset, 500), 25u + 16u);
    const auto prefix_tokens = default_tokenizer().count(h.text.substr(0, h.placements[0].byte_offset));
    EXPECT_EQ(prefix_tokens, h.placements[0].token_offset);
}

TEST(Haystack, TwoNeedlesInLongHaystack) {
    const std::size_t len = 128000;
    auto spec = multi_needle_fixture(len, 25, 75, synthetic_filler(len + 100, 3));
    auto h = build_haystack(spec);
    EXPECT_EQ(h.token_count, len);
    const std::size_t needle1 = default_tokenizer().count(spec.needles[0].text);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(occurrences(h.text, spec.needles[i].text), 1u);
        EXPECT_EQ(h.text.find(spec.needles[i].text), h.placements[i].byte_offset);
        EXPECT_LE(diff(h.placements[i].source_token, h.placements[i].target_token), 25u);
    }
    EXPECT_LE(diff(h.placements[0].token_offset, 32000), 25u + 20u);
    EXPECT_LE(diff(h.placements[1].token_offset, 96000 + needle1), 25u + 40u);
}

TEST(Haystack, DepthHundredTrails) {
    auto spec = single_needle_fixture(500, 100, synthetic_filler(600, 4));
    auto h = build_haystack(spec);
    EXPECT_EQ(h.token_count, 500u);
    EXPECT_EQ(h.placements[0].byte_offset + spec.needles[0].text.size(), h.text.size());
}

TEST(Haystack, Errors) {
    try {
        build_haystack(single_needle_fixture(5000, 10, synthetic_filler(100, 5)));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::SourceTooShort);
    }
    auto spec = multi_needle_fixture(1000, 75, 25, synthetic_filler(1200, 5));
    EXPECT_THROW(build_haystack(spec), Error);
}

TEST(Filler, DeterministicPerSeed) {
    EXPECT_EQ(synthetic_filler(300, 9), synthetic_filler(300, 9));
    EXPECT_NE(synthetic_filler(300, 9), synthetic_filler(300, 10));
    EXPECT_GE(default_tokenizer().count(synthetic_filler(300, 9)), 300u);
}

TEST(Needle, KeywordBackendFindsSingleNeedle) {
    auto spec = single_needle_fixture(4000, 30, synthetic_filler(4200, 6));
    auto h = build_haystack(spec);
    Document doc(h.text);
    KeywordBackend backend(split_document(doc, 5), Query{spec.question, {}});
    RunConfig c;
    auto r = run(c, doc, Query{spec.question, {}}, backend);
    ASSERT_TRUE(r.final_answer);
    EXPECT_DOUBLE_EQ(needle_recall(spec, r.final_answer), 1.0);
}

TEST(Needle, BoundaryNeedleNeedsSentenceSnap) {
    // depth 40 with five agents puts the needle on a chunk boundary
    auto spec = single_needle_fixture(4000, 40, synthetic_filler(4200, 6));
    Document doc(build_haystack(spec).text);
    RunConfig c;
    KeywordBackend split(split_document(doc, 5), Query{spec.question, {}});
    auto r = run(c, doc, Query{spec.question, {}}, split);
    EXPECT_DOUBLE_EQ(needle_recall(spec, r.final_answer), 0.0);

    c.split.snap_window = 40;
    KeywordBackend snapped(split_document(doc, 5, c.split), Query{spec.question, {}});
    r = run(c, doc, Query{spec.question, {}}, snapped);
    EXPECT_DOUBLE_EQ(needle_recall(spec, r.final_answer), 1.0);
}

TEST(Needle, KeywordBackendJoinsTwoNeedles) {
    auto spec = multi_needle_fixture(6000, 10, 90, synthetic_filler(6200, 7));
    auto h = build_haystack(spec);
    Document doc(h.text);
    KeywordBackend backend(split_document(doc, 5), Query{spec.question, {}});
    RunConfig c;
    auto r = run(c, doc, Query{spec.question, {}}, backend);
    EXPECT_DOUBLE_EQ(needle_recall(spec, r.final_answer), 1.0);
    EXPECT_DOUBLE_EQ(needle_recall(spec, std::nullopt), 0.0);
    EXPECT_DOUBLE_EQ(needle_recall(spec, std::string("a chess piece")), 0.5);
}

TEST(Evaluate, Examples) {
    auto r = evaluate({"A", "B", std::nullopt}, {"A", "A", "A"});
    EXPECT_DOUBLE_EQ(r.accuracy, 1.0 / 3);
    EXPECT_DOUBLE_EQ(r.none_rate, 1.0 / 3);
    using Answers = std::vector<std::optional<std::string>>;
    auto all = evaluate(Answers{"A", "C"}, Answers{"A", "C"});
    EXPECT_DOUBLE_EQ(all.accuracy, 1.0);
    EXPECT_DOUBLE_EQ(all.none_rate, 0.0);
    try {
        evaluate(Answers{"A"}, Answers{"A", "B"});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::LengthMismatch);
    }
}

TEST(Evaluate, Formatting) {
    EXPECT_EQ(format_mean_std(0.543, 0.009), "0.543 \xC2\xB1 0.009");
    auto m = mean_std({1.0, 2.0, 3.0});
    EXPECT_DOUBLE_EQ(m.mean, 2.0);
    EXPECT_DOUBLE_EQ(m.std, 1.0);
    EXPECT_DOUBLE_EQ(mean_std({4.0}).std, 0.0);
    const auto table = format_results_table({{"TOA", {0.543, 0.009}, {0.017, 0.004}}});
    EXPECT_NE(table.find("0.543 \xC2\xB1 0.009"), std::string::npos);
    EXPECT_NE(table.find("0.017 \xC2\xB1 0.004"), std::string::npos);
}

TEST(Needle, KeywordBackendPicksMentionedOption) {
    std::string text;
    for (int i = 0; i < 60; ++i) text += "The weather was mild that week. ";
    text += "The lighthouse keeper painted the door bright green in spring. ";
    for (int i = 0; i < 60; ++i) text += "Birds sang in the hedges all day. ";
    Document doc(text);
    Query q{"What color did the lighthouse keeper paint the door?",
            {{"A", "red"}, {"B", "green"}, {"C", "blue"}}};
    KeywordBackend backend(split_document(doc, 3), q);
    RunConfig c;
    c.agents = 3;
    auto r = run(c, doc, q, backend);
    EXPECT_EQ(r.final_answer, std::optional<std::string>("B"));
}
