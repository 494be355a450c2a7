#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "scriptworld/builtin.hpp"
#include "scriptworld/engine.hpp"
#include "support/oracles.hpp"

namespace sw = scriptworld;

namespace {

std::shared_ptr<const sw::GameAssets> fixture(bool with_hints = true) {
    static const auto with = sw::make_assets(sw::builtin_scenario(), sw::builtin_hints());
    static const auto without = sw::make_assets(sw::builtin_scenario());
    return with_hints ? with : without;
}

sw::Scenario chain_scenario() {
    sw::Scenario s;
    s.title = "chain";
    s.neg_distance = 1;
    s.esds.push_back({"e", {{"e", 0, "a"}, {"e", 1, "b"}, {"e", 2, "c"}}});
    const char* ids[] = {"A", "B", "C"};
    for (std::size_t i = 0; i < 3; ++i)
        s.clusters.push_back({ids[i], ids[i], {{"e", i}}, {{{std::string("do ") + ids[i]}}}});
    return s;
}

/// Runs one game with a policy; returns the final state.
template <class Policy>
sw::GameState play(const sw::Environment& env, std::uint64_t seed, Policy&& policy) {
    auto [st, obs] = env.new_game(seed);
    while (!st.done) {
        auto res = env.step(st, policy(st.last_observation));
        if (!res.done) EXPECT_TRUE(res.next_observation.has_value());
    }
    return std::move(st);
}

std::set<std::string> normalized(const std::vector<std::string>& texts) {
    std::set<std::string> out;
    for (const auto& t : texts) out.insert(sw::text::normalize(t));
    return out;
}

} // namespace

TEST(NewGame, FixtureTwoChoicesSeedSeven) {
    sw::Environment env(fixture(), {.num_choices = 2, .seed = 7});
    auto [st, obs] = env.new_game();
    ASSERT_EQ(obs.choices.size(), 2u);
    EXPECT_NE(obs.choices[0], obs.choices[1]);
    ASSERT_TRUE(obs.correct_index.has_value());
    EXPECT_LT(*obs.correct_index, 2u);
    EXPECT_EQ(obs.quest, "Get Medicine");
    EXPECT_EQ(st.current, env.graph().start);
    EXPECT_FALSE(obs.hint.has_value());
}

TEST(NewGame, HandicapWithoutHintsIsConfigError) {
    EXPECT_THROW(sw::Environment(fixture(false), {.handicap = true}), sw::ConfigError);
}

TEST(NewGame, InvalidKnobsAreConfigErrors) {
    EXPECT_THROW(sw::Environment(fixture(), {.num_choices = 1}), sw::ConfigError);
    EXPECT_THROW(sw::Environment(fixture(), {.back_hop = 0}), sw::ConfigError);
    EXPECT_THROW(sw::Environment(fixture(), {.neg_distance = 0}), sw::ConfigError);
    EXPECT_THROW(sw::Environment(fixture(), {.consecutive_wrong_limit = 0}), sw::ConfigError);
}

TEST(NewGame, TooSmallGraphIsSamplingError) {
    const auto assets = sw::make_assets(chain_scenario());
    // scenario-graph diameter of the chain is 10 hops
    EXPECT_THROW(sw::Environment(assets, {.num_choices = 5, .neg_distance = 10}), sw::SamplingError);
    EXPECT_THROW(sw::Environment(assets, {.num_choices = 5, .neg_distance = 1}), sw::SamplingError);
}

TEST(NewGame, FixtureSupportsUpToFiveChoicesInBothSpaces) {
    for (int k = 2; k <= 5; ++k) {
        EXPECT_NO_THROW(sw::Environment(fixture(), {.num_choices = k}));
        EXPECT_NO_THROW(sw::Environment(
            fixture(), {.num_choices = k, .neg_distance = 1, .distance_space = sw::DistanceSpace::CompactGraph}));
    }
}

TEST(SampleChoices, SingleSuccessorSingleTextPlusOneFarNegative) {
    const auto assets = sw::make_assets(chain_scenario());
    sw::Environment env(assets, {.num_choices = 2});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto [st, obs] = env.new_game(seed);
        ASSERT_EQ(obs.choices.size(), 2u);
        EXPECT_EQ(obs.choices[*obs.correct_index], "do A");
        const auto& neg = obs.choices[1 - *obs.correct_index];
        EXPECT_TRUE(neg == "do B" || neg == "do C");
    }
}

TEST(SampleChoices, RevisitsResample) {
    sw::Environment env(fixture(), {.num_choices = 3, .seed = 1});
    auto [st, first] = env.new_game();
    std::set<std::vector<std::string>> seen{first.choices};
    std::set<std::string> correct{first.choices[*first.correct_index]};
    for (int i = 0; i < 50; ++i) {
        auto obs = env.sample_choices(st);
        EXPECT_EQ(st.current, env.graph().start);
        seen.insert(obs.choices);
        correct.insert(obs.choices[*obs.correct_index]);
    }
    EXPECT_GT(seen.size(), 10u);
    EXPECT_GT(correct.size(), 3u);
}

TEST(SampleChoices, NegativesAreFarByIndependentBfs) {
    const auto assets = fixture();
    const auto& g = assets->graph;
    const auto plain = sw::testing::PlainGraph::from(g.dag, g.start, g.end);
    std::vector<std::vector<int>> dist;
    for (std::size_t i = 0; i < g.size(); ++i) dist.push_back(sw::testing::bfs_undirected(plain, i));

    for (int k : {2, 5}) {
        sw::Environment env(assets, {.num_choices = k, .seed = 3});
        const int d = env.neg_distance();
        sw::Rng walk(k);
        auto [st, obs] = env.new_game();
        for (int n = 0; n < 10'000; ++n) {
            const auto succ = sw::testing::successor_steps(g, st.current.index());
            std::set<std::string> succ_texts;
            for (auto s : succ) for (const auto& t : g.texts(sw::node_at(s))) succ_texts.insert(sw::text::normalize(t));
            std::size_t correct = 0;
            for (std::size_t i = 0; i < obs.choices.size(); ++i) {
                const auto src = obs.choice_nodes[i];
                const auto& texts = g.texts(src);
                ASSERT_NE(std::find(texts.begin(), texts.end(), obs.choices[i]), texts.end());
                if (succ_texts.count(sw::text::normalize(obs.choices[i]))) {
                    ++correct;
                    EXPECT_EQ(i, *obs.correct_index);
                    EXPECT_TRUE(succ.count(src.index()));
                } else {
                    EXPECT_GT(dist[st.current.index()][src.index()], d);
                }
            }
            ASSERT_EQ(correct, 1u);
            EXPECT_EQ(normalized(obs.choices).size(), obs.choices.size());
            auto res = env.step(st, walk.index(obs.choices.size()));
            if (res.done) std::tie(st, obs) = env.new_game(walk.next());
            else obs = *res.next_observation;
        }
    }
}

TEST(SampleChoices, HintComesFromTheCurrentNodesList) {
    const auto assets = fixture();
    sw::Environment env(assets, {.num_choices = 2, .handicap = true, .seed = 4});
    auto st = play(env, 4, [&](const sw::Observation& obs) {
        const auto* hints = assets->hints->find(env.graph().dag.name(*obs.node));
        EXPECT_TRUE(hints && std::find(hints->begin(), hints->end(), *obs.hint) != hints->end());
        return *obs.correct_index;
    });
    EXPECT_EQ(st.reason, sw::EndReason::GoalReached);
}

TEST(Step, PerfectPlayScoresExactlyTen) {
    for (int k = 2; k <= 5; ++k) {
        sw::Environment env(fixture(), {.num_choices = k});
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            auto st = play(env, seed, [](const sw::Observation& o) { return *o.correct_index; });
            EXPECT_EQ(st.cumulative_reward, 10);
            EXPECT_EQ(st.reason, sw::EndReason::GoalReached);
            EXPECT_EQ(st.log.steps.back().reward, 10);
        }
    }
}

TEST(Step, FiveConsecutiveWrongEndsTheGame) {
    sw::Environment env(fixture(), {.num_choices = 2});
    auto [st, obs] = env.new_game(5);
    // one correct step, one wrong, one correct, then five wrong in a row
    env.step(st, *st.last_observation.correct_index);
    env.step(st, 1 - *st.last_observation.correct_index);
    env.step(st, *st.last_observation.correct_index);
    sw::StepResult res;
    for (int i = 0; i < 5; ++i) {
        ASSERT_FALSE(st.done);
        res = env.step(st, 1 - *st.last_observation.correct_index);
        EXPECT_EQ(res.reward, -1);
    }
    EXPECT_TRUE(res.done);
    EXPECT_EQ(res.reason, sw::EndReason::TooManyWrong);
    EXPECT_EQ(st.cumulative_reward, -6);
    EXPECT_FALSE(res.next_observation.has_value());
}

TEST(Step, WrongAtStartStaysButResamples) {
    sw::Environment env(fixture(), {.num_choices = 2});
    bool any_change = false;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto [st, obs] = env.new_game(seed);
        const auto before = st.rng;
        auto res = env.step(st, 1 - *obs.correct_index);
        EXPECT_EQ(st.current, env.graph().start);
        EXPECT_EQ(res.reward, -1);
        ASSERT_TRUE(res.next_observation);
        EXPECT_FALSE(st.rng == before);
        any_change |= res.next_observation->choices != obs.choices;
    }
    EXPECT_TRUE(any_change);
}

TEST(Step, WrongHopsBackAlongIncomingEdges) {
    const auto assets = fixture();
    const auto& g = assets->graph;
    for (int hops : {1, 2, 3}) {
        sw::Environment env(assets, {.num_choices = 2, .back_hop = hops});
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            auto [st, obs] = env.new_game(seed);
            for (int i = 0; i < 4; ++i) env.step(st, *st.last_observation.correct_index);
            if (st.done) continue;
            const auto from = st.current;
            env.step(st, 1 - *st.last_observation.correct_index);
            // landing node must reach `from` in exactly `hops` forward edges, or be START
            std::set<sw::NodeId> frontier{st.current};
            for (int h = 0; h < hops; ++h) {
                std::set<sw::NodeId> next;
                for (auto n : frontier)
                    for (auto m : g.dag.out(n)) next.insert(m);
                frontier = next;
            }
            EXPECT_TRUE(frontier.count(from) || st.current == g.start) << g.dag.name(from);
        }
    }
}

TEST(Step, ErrorsOnBadIndexAndFinishedGame) {
    sw::Environment env(fixture(), {.num_choices = 3});
    auto [st, obs] = env.new_game(1);
    EXPECT_THROW(env.step(st, 3), sw::OutOfRange);
    while (!st.done) env.step(st, *st.last_observation.correct_index);
    EXPECT_THROW(env.step(st, 0), sw::Terminated);
}

TEST(Step, StepCapTerminates) {
    sw::Environment env(fixture(), {.num_choices = 2, .max_steps = 3});
    auto [st, obs] = env.new_game(2);
    sw::StepResult res;
    for (int i = 0; i < 3; ++i) res = env.step(st, *st.last_observation.correct_index);
    EXPECT_TRUE(res.done);
    EXPECT_EQ(res.reason, sw::EndReason::StepCapExceeded);
}

TEST(Step, CompactDistanceSpace) {
    sw::Environment env(fixture(), {.num_choices = 3, .neg_distance = 1,
                                    .distance_space = sw::DistanceSpace::CompactGraph});
    const auto cg = fixture()->compact;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto [st, obs] = env.new_game(seed);
        for (std::size_t i = 0; i < obs.choices.size(); ++i) {
            if (i == *obs.correct_index) continue;
            const auto& info = env.graph().node(obs.choice_nodes[i]);
            const auto cluster = cg.dag.at(fixture()->scenario.clusters[info.cluster].id);
            EXPECT_GT(*sw::hop_distance(cg.dag, cg.start, cluster), 1u);
        }
    }
}

TEST(EngineProperties, AccountingCeilingAndTermination) {
    sw::Environment env(fixture(), {.num_choices = 3, .max_steps = 200});
    sw::Rng policy(77);
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        const double skill = policy.uniform();
        auto st = play(env, seed, [&](const sw::Observation& o) {
            return policy.bernoulli(skill) ? *o.correct_index : policy.index(o.choices.size());
        });
        const bool goal = st.reason == sw::EndReason::GoalReached;
        EXPECT_EQ(st.cumulative_reward, 10 * goal - st.wrong_total);
        EXPECT_LE(st.cumulative_reward, 10);
        EXPECT_EQ(st.cumulative_reward == 10, goal && st.wrong_total == 0);
        EXPECT_NE(st.reason, sw::EndReason::InProgress);
        EXPECT_EQ(transcript(st).total_reward(), st.cumulative_reward);
        for (const auto& r : transcript(st).steps) {
            EXPECT_TRUE(r.reward == -1 || r.reward == 0 || r.reward == 10);
            EXPECT_EQ(r.reward == 10, r.reason == sw::EndReason::GoalReached);
        }
    }
}

TEST(Transcript, DeterministicReplayIsByteIdentical) {
    sw::Environment env(fixture(), {.num_choices = 4, .handicap = true});
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::vector<std::size_t> actions;
        sw::Rng policy(seed);
        auto a = play(env, seed, [&](const sw::Observation& o) {
            actions.push_back(policy.index(o.choices.size()));
            return actions.back();
        });
        std::size_t i = 0;
        auto b = play(env, seed, [&](const sw::Observation&) { return actions[i++]; });
        EXPECT_EQ(sw::to_jsonl(transcript(a)), sw::to_jsonl(transcript(b)));
    }
}

TEST(Transcript, GoalReachedEndsWithTenAndRecordsNodes) {
    sw::Environment env(fixture(), {.num_choices = 2});
    auto st = play(env, 9, [](const sw::Observation& o) { return *o.correct_index; });
    const auto& log = transcript(st);
    ASSERT_FALSE(log.steps.empty());
    EXPECT_EQ(log.steps.back().reward, 10);
    EXPECT_EQ(log.steps.back().reason, sw::EndReason::GoalReached);
    EXPECT_EQ(log.steps.front().node, "START");
    EXPECT_EQ(log.steps.back().next.rfind("take_medicine#0.", 0), 0u);
    for (std::size_t i = 1; i < log.steps.size(); ++i) EXPECT_EQ(log.steps[i].node, log.steps[i - 1].next);
    const auto lines = sw::to_jsonl(log);
    const auto first = sw::json::parse(lines.substr(0, lines.find('\n')));
    EXPECT_EQ(first["header"]["engine_version"], std::string(sw::kEngineVersion));
    EXPECT_EQ(first["header"]["seed"], 9u);
}

TEST(Coverage, PerfectPlayMarksTheTraversedPath) {
    sw::Environment env(fixture(), {.num_choices = 2});
    auto st = play(env, 3, [](const sw::Observation& o) { return *o.correct_index; });
    const auto& g = env.graph();
    EXPECT_TRUE(st.visited[g.start.index()]);
    EXPECT_TRUE(st.visited[g.end.index()]);
    EXPECT_TRUE(st.visited[g.dag.at("take_medicine#entry").index()]);
    EXPECT_TRUE(st.visited[g.dag.at("take_medicine#exit").index()]);
    const auto count = std::count(st.visited.begin(), st.visited.end(), true);
    EXPECT_LT(count, static_cast<long>(g.size()));
    // every visited node except START has a visited predecessor
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!st.visited[i] || sw::node_at(i) == g.start) continue;
        const auto preds = g.dag.in(sw::node_at(i));
        EXPECT_TRUE(std::any_of(preds.begin(), preds.end(), [&](sw::NodeId p) { return st.visited[p.index()]; }))
            << g.dag.name(sw::node_at(i));
    }
}

TEST(GameConfigJson, RoundTripAndRejectsUnknownFields) {
    sw::GameConfig cfg{.num_choices = 4, .back_hop = 2, .handicap = true, .neg_distance = 3,
                       .max_steps = std::nullopt, .seed = 99, .distance_space = sw::DistanceSpace::CompactGraph};
    EXPECT_EQ(sw::config_from_json(sw::to_json(cfg)), cfg);
    EXPECT_THROW(sw::config_from_json({{"choices", 2}}), sw::ConfigError);
    EXPECT_THROW(sw::config_from_json({{"num_choices", "two"}}), sw::ConfigError);
}
