#include <algorithm>
#include <filesystem>
#include <functional>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>

#include "scriptworld/builtin.hpp"
#include "scriptworld/corpus.hpp"
#include "scriptworld/hints.hpp"
#include "support/oracles.hpp"

namespace sw = scriptworld;

namespace {

const std::filesystem::path kData{SCRIPTWORLD_TEST_DATA};

sw::json builtin_json() { return sw::json::parse(sw::kBuiltinScenarioJson); }

std::size_t count_code(const std::vector<sw::Finding>& findings, const std::string& code) {
    return static_cast<std::size_t>(
        std::count_if(findings.begin(), findings.end(), [&](const sw::Finding& f) { return f.code == code; }));
}

std::filesystem::path temp_file(const std::string& name, const std::string& body) {
    auto path = std::filesystem::temp_directory_path() / ("scriptworld_" + name);
    std::ofstream(path) << body;
    return path;
}

} // namespace

TEST(LoadScenario, BundledFixtureHasSixClustersThreeEsds) {
    const sw::Scenario s = sw::load_scenario(kData / "get_medicine.json");
    EXPECT_EQ(s.title, "Get Medicine");
    EXPECT_EQ(s.clusters.size(), 6u);
    EXPECT_EQ(s.esds.size(), 3u);
    EXPECT_EQ(s.neg_distance, 2);
    EXPECT_EQ(s, sw::builtin_scenario());
}

TEST(LoadScenario, EventInTwoClustersIsRejected) {
    auto j = builtin_json();
    j["clusters"][1]["members"].push_back({{"esd", "e1"}, {"pos", 0}});
    EXPECT_THROW(sw::parse_scenario(j.dump()), sw::ValidationError);
}

TEST(LoadScenario, ZeroNegativeDistanceIsRejected) {
    auto j = builtin_json();
    j["neg_distance"] = 0;
    EXPECT_THROW(sw::parse_scenario(j.dump()), sw::ValidationError);
}

TEST(LoadScenario, MalformedInputIsParseError) {
    EXPECT_THROW(sw::parse_scenario("{not json"), sw::ParseError);
    EXPECT_THROW(sw::parse_scenario(R"({"title": "x"})"), sw::ParseError);
    EXPECT_THROW(sw::parse_scenario(R"({"title": "x", "neg_distance": 1, "esds": [{"id": "a", "events": [1]}], "clusters": []})"),
                 sw::ParseError);
    EXPECT_THROW(sw::load_scenario(kData / "does_not_exist.json"), sw::ParseError);
}

TEST(LoadScenario, DanglingMemberAndEmptySequenceAreRejected) {
    auto dangling = builtin_json();
    dangling["clusters"][0]["members"].push_back({{"esd", "e9"}, {"pos", 0}});
    EXPECT_THROW(sw::parse_scenario(dangling.dump()), sw::ValidationError);

    auto empty_seq = builtin_json();
    empty_seq["clusters"][0]["sequences"].push_back(sw::json::array());
    EXPECT_THROW(sw::parse_scenario(empty_seq.dump()), sw::ValidationError);
}

TEST(ValidateScenario, BundledFixtureIsClean) {
    EXPECT_TRUE(sw::validate_scenario(sw::builtin_scenario()).empty());
}

TEST(ValidateScenario, LengthOneEsdGivesOneTooShortFinding) {
    sw::Scenario s = sw::builtin_scenario();
    s.esds.push_back({"e4", {{"e4", 0, "just took a pill"}}});
    s.clusters[5].members.push_back({"e4", 0});
    const auto findings = sw::validate_scenario(s);
    ASSERT_EQ(findings.size(), 1u);
    EXPECT_EQ(findings[0].code, "short-esd");
}

TEST(ValidateScenario, EmptyClusterIsAnError) {
    sw::Scenario s = sw::builtin_scenario();
    s.clusters.push_back({"orphan", "orphan", {}, {{{"stand around"}}}});
    const auto findings = sw::validate_scenario(s);
    ASSERT_EQ(findings.size(), 1u);
    EXPECT_EQ(findings[0].code, "empty-cluster");
    EXPECT_EQ(findings[0].severity, sw::Severity::Error);
}

TEST(ValidateScenario, EmptyTextAndUncoveredEvents) {
    sw::Scenario s = sw::builtin_scenario();
    s.esds[0].events[2].text = "   ";
    s.esds[1].events.push_back({"e2", 4, "went home"});
    const auto findings = sw::validate_scenario(s);
    EXPECT_EQ(count_code(findings, "empty-text"), 1u);
    EXPECT_EQ(count_code(findings, "uncovered-event"), 1u);
}

TEST(ValidateScenario, ConsecutiveEventsInOneClusterOnlyWarn) {
    sw::Scenario s = sw::builtin_scenario();
    s.esds[1].events.insert(s.esds[1].events.begin() + 1, {"e2", 1, "drove to the clinic"});
    for (std::size_t p = 0; p < s.esds[1].events.size(); ++p) s.esds[1].events[p].position = p;
    for (auto& c : s.clusters)
        for (auto& m : c.members)
            if (m.esd == "e2" && m.pos >= 1) ++m.pos;
    s.clusters[1].members.push_back({"e2", 1});
    const auto findings = sw::validate_scenario(s);
    ASSERT_EQ(findings.size(), 1u);
    EXPECT_EQ(findings[0].code, "repeated-cluster");
    EXPECT_FALSE(sw::has_errors(findings));
}

TEST(ValidateScenario, ReservedClusterIds) {
    sw::Scenario s = sw::builtin_scenario();
    s.clusters[0].id = "START";
    EXPECT_EQ(count_code(sw::validate_scenario(s), "reserved-id"), 1u);
    s.clusters[0].id = "a#b";
    EXPECT_EQ(count_code(sw::validate_scenario(s), "reserved-id"), 1u);
}

TEST(ValidateScenario, ErrorFindingsImplyLoadRejects) {
    // Each mutation produces at least one error finding and a load failure.
    std::vector<std::function<void(sw::json&)>> mutations = {
        [](sw::json& j) { j["neg_distance"] = 0; },
        [](sw::json& j) { j["esds"][0]["events"] = {"only one"}; },
        [](sw::json& j) { j["clusters"][2]["members"] = sw::json::array(); },
        [](sw::json& j) { j["clusters"][3]["sequences"][0][0] = sw::json::array(); },
        [](sw::json& j) { j["esds"][1]["events"][0] = ""; },
        [](sw::json& j) { j["clusters"][4]["id"] = "go_doctor"; },
    };
    for (auto& mutate : mutations) {
        auto j = builtin_json();
        mutate(j);
        const sw::Scenario s = sw::scenario_from_json(j);
        EXPECT_TRUE(sw::has_errors(sw::validate_scenario(s))) << j.dump();
        EXPECT_THROW(sw::parse_scenario(j.dump()), sw::ValidationError);
    }
}

TEST(BuiltinScenario, TitleAndParallelSequences) {
    const sw::Scenario s = sw::builtin_scenario();
    EXPECT_EQ(s.title, "Get Medicine");
    EXPECT_TRUE(std::any_of(s.clusters.begin(), s.clusters.end(),
                            [](const sw::EventCluster& c) { return c.sequences.size() == 2; }));
}

TEST(CorpusProperties, SaveLoadRoundTripOnRandomScenarios) {
    sw::Rng rng(11);
    for (int i = 0; i < 25; ++i) {
        const sw::Scenario s = sw::testing::random_scenario(rng);
        const auto path = temp_file("roundtrip.json", "");
        sw::save_scenario(s, path);
        EXPECT_EQ(sw::load_scenario(path), s);
    }
}

TEST(CorpusProperties, MembersPartitionEvents) {
    sw::Rng rng(5);
    for (int i = 0; i < 25; ++i) {
        const sw::Scenario s = sw::testing::random_scenario(rng);
        std::size_t members = 0;
        for (const auto& c : s.clusters) members += c.members.size();
        EXPECT_EQ(members, s.event_count());
        EXPECT_TRUE(sw::validate_scenario(s).empty());
    }
}

TEST(LoadHints, FullFixtureCoversEveryOccupiableNode) {
    const sw::Scenario s = sw::builtin_scenario();
    const sw::HintStore h = sw::load_hints(kData / "get_medicine_hints.jsonl", s);
    const auto g = sw::build_scenario_graph(s);
    EXPECT_EQ(h.hints.size(), g.size() - 1);
    EXPECT_EQ(h, sw::builtin_hints());
}

TEST(LoadHints, MissingNodeNamesIt) {
    std::string body(sw::kBuiltinHintsJsonl);
    const std::string drop = R"({"node": "go_doctor#1.0", "hints": ["find a seat in the waiting room"]})";
    body.erase(body.find(drop), drop.size() + 1);
    try {
        sw::parse_hints(body, sw::builtin_scenario());
        FAIL() << "expected CoverageError";
    } catch (const sw::CoverageError& e) {
        EXPECT_NE(std::string(e.what()).find("go_doctor#1.0"), std::string::npos);
    }
}

TEST(LoadHints, VerbatimActionTextIsRejected) {
    std::string body(sw::kBuiltinHintsJsonl);
    body += R"({"node": "END", "hints": ["  Pay at the Counter "]})" "\n";
    EXPECT_THROW(sw::parse_hints(body, sw::builtin_scenario()), sw::RepeatError);
}

TEST(LoadHints, MalformedLinesAreParseErrors) {
    EXPECT_THROW(sw::parse_hints("{\"node\": \"START\"}\n", sw::builtin_scenario()), sw::ParseError);
    EXPECT_THROW(sw::parse_hints("not json\n", sw::builtin_scenario()), sw::ParseError);
    std::string dup(sw::kBuiltinHintsJsonl);
    dup += R"({"node": "START", "hints": ["again"]})" "\n";
    EXPECT_THROW(sw::parse_hints(dup, sw::builtin_scenario()), sw::ParseError);
}
