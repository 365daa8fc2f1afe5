#include "toa/prompts.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace toa;

TEST(Placeholders, OnlyBareIdentifiers) {
    EXPECT_EQ(placeholders_in("Q: {query}\n{options} {\"id\": 1} {query}"),
              (std::vector<std::string>{"query", "options"}));
    EXPECT_TRUE(placeholders_in("{ not one } {1abc}").empty());
}

TEST(Templates, DefaultsReferenceRequiredPlaceholders) {
    for (Phase p : kAllPhases) {
        const auto found = placeholders_in(default_template_text(p));
        for (const auto& need : required_placeholders(p))
            EXPECT_NE(std::find(found.begin(), found.end(), need), found.end())
                << to_string(p) << " lacks {" << need << "}";
    }
    EXPECT_NE(default_template_text(Phase::Perceive).find("You are in Phase 1"), std::string::npos);
}

TEST(Templates, MissingRequiredPlaceholderRejected) {
    try {
        PromptTemplate(Phase::Perceive, "Read {chunk} and answer {query}.");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InvalidTemplate);
    }
}

TEST(Render, SinglePassSubstitution) {
    PromptTemplate t(Phase::Finalize, "{query}|{options}|{own_cognition}");
    Bindings b{{"query", "q {options}"}, {"options", "A) x"}, {"own_cognition", "c"}};
    EXPECT_EQ(render(t, b), "q {options}|A) x|c");
}

TEST(Render, MissingBindingNamed) {
    PromptTemplate t(Phase::Finalize, "{query}|{options}|{own_cognition}");
    try {
        render(t, {{"query", "q"}, {"options", "o"}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::MissingBinding);
        EXPECT_NE(std::string(e.what()).find("own_cognition"), std::string::npos);
    }
}

TEST(PromptSetTest, OverridesFromDirectory) {
    auto dir = std::filesystem::temp_directory_path() / "toa_prompt_overrides";
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "finalize.txt") << "FINAL {query} {options} {own_cognition}";
    }
    PromptSet set;
    set.load_overrides(dir);
    EXPECT_EQ(set.get(Phase::Finalize).text(), "FINAL {query} {options} {own_cognition}");
    EXPECT_EQ(set.get(Phase::Perceive).text(), default_template_text(Phase::Perceive));
    {
        std::ofstream(dir / "finalize.txt") << "broken";
    }
    PromptSet bad;
    EXPECT_THROW(bad.load_overrides(dir), Error);
    std::filesystem::remove_all(dir);
}

TEST(Extract, FindsObjectAmidProse) {
    auto obj = extract_json_object("Sure. {\"a\": \"}\"} and {\"b\": 2}");
    ASSERT_TRUE(obj);
    EXPECT_EQ(*obj, "{\"a\": \"}\"}");
    EXPECT_FALSE(extract_json_object("no json {here"));
}

TEST(Parse, Perceive) {
    auto r = parse_perceive("Here you go:\n```json\n{\"Evidence\": \"they met\", \"answer\": \"B\"}\n```");
    EXPECT_EQ(r, (PerceiveResponse{"they met", "B"}));
    EXPECT_THROW(parse_perceive("{\"evidence\": \"x\"}"), Error);
}

TEST(Parse, SelectFormats) {
    EXPECT_EQ(parse_select(R"({"explanation":"e","id":"2, 3"})").selected_ids, (std::vector<int>{2, 3}));
    EXPECT_EQ(parse_select(R"({"id":[4, 1, 4]})").selected_ids, (std::vector<int>{1, 4}));
    EXPECT_EQ(parse_select(R"({"id":"Agent 3 and Agent 0"})").selected_ids, (std::vector<int>{0, 3}));
    EXPECT_TRUE(parse_select(R"({"id":"None"})").selected_ids.empty());
    EXPECT_TRUE(parse_select(R"({"id":null})").selected_ids.empty());
    try {
        parse_select(R"({"id":"several"})");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::Unparseable);
    }
}

TEST(Parse, Update) {
    auto r = parse_update(R"({"utility":"Useful.","fact":"f","conclusion":"C"})");
    EXPECT_EQ(r, (UpdateResponse{Utility::Useful, "f", "C"}));
    EXPECT_EQ(parse_update(R"({"utility":"useless","fact":"","conclusion":""})").utility, Utility::Useless);
    EXPECT_THROW(parse_update(R"({"utility":"somewhat","fact":"","conclusion":""})"), Error);
}

TEST(Parse, FinalizeNormalizesLabels) {
    EXPECT_EQ(parse_finalize(R"({"explanation":"x","result":"Option C"})").result, "C");
    EXPECT_EQ(parse_finalize(R"({"result":"b."})").result, "B");
    EXPECT_EQ(parse_finalize(R"({"result":"none"})").result, std::nullopt);
    EXPECT_EQ(normalize_result("(A)"), "A");
    EXPECT_EQ(normalize_result(""), std::nullopt);
    EXPECT_EQ(normalize_result("  stop-motion animation. "), "stop-motion animation");
}

TEST(Parse, DispatchByPhase) {
    auto any = parse_response(Phase::UpdateCognition, R"({"utility":"useful","fact":"f","conclusion":"c"})");
    EXPECT_TRUE(std::holds_alternative<UpdateResponse>(any));
}

TEST(Selection, FilterDropsOwnerAndOutOfRange) {
    SelectResponse r{"", {0, 1, 3, 7}};
    EXPECT_EQ(filter_selection(r, 1, 5).selected_ids, (std::vector<int>{0, 3}));
}

TEST(Serialize, RoundTrips) {
    PerceiveResponse p{"e \"quoted\"", "A"};
    EXPECT_EQ(parse_perceive(serialize(p)), p);
    SelectResponse s{"why", {2, 4}};
    EXPECT_EQ(parse_select(serialize(s)), s);
    SelectResponse none{"why", {}};
    EXPECT_EQ(parse_select(serialize(none)), none);
    UpdateResponse u{Utility::Useless, "f", "c"};
    EXPECT_EQ(parse_update(serialize(u)), u);
    FinalizeResponse f{"x", "D"};
    EXPECT_EQ(parse_finalize(serialize(f)), f);
}

TEST(Helpers, CognitionAndAgentList) {
    EXPECT_EQ(render_agent_list({1, 2, 3}), "[1, 2, 3]");
    EXPECT_EQ(render_cognition({"ev", "B", {0}}), "Evidence: ev\nAnswer: B");
}

TEST(PhaseNames, RoundTripAndGroups) {
    for (Phase p : kAllPhases) EXPECT_EQ(phase_from_string(to_string(p)), p);
    EXPECT_EQ(group_of(Phase::UpdateCognition), PhaseGroup::Phase2);
    EXPECT_EQ(group_of(Phase::SelectChunks), PhaseGroup::Phase13);
    EXPECT_EQ(group_of(Phase::TieBreak), PhaseGroup::Phase13);
}
