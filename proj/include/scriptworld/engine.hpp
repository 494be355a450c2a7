#pragma once

// Choice-based game over a scenario graph.
//
// State is a scenario-graph node. The choices offered at a node are one
// surface text of a valid successor step node plus negatives drawn from step
// nodes more than neg_distance undirected hops away. A correct pick moves to
// that successor (reward 0, or +10 when nothing follows it); a wrong pick
// costs -1 and hops back along incoming edges. Five wrong picks in a row end
// the game.
//
// RNG draw order, per sample_choices():
//   1. successor index   2. correct text index
//   3. for each negative: candidate index (partial Fisher-Yates), text index
//   4. Fisher-Yates shuffle of the assembled choices
//   5. hint index (handicap only)
// and per wrong step(), one predecessor index per back hop, taken before the
// next sample_choices().

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scriptworld/corpus.hpp"
#include "scriptworld/errors.hpp"
#include "scriptworld/graph.hpp"
#include "scriptworld/hints.hpp"
#include "scriptworld/rng.hpp"
#include "scriptworld/text.hpp"

namespace scriptworld {

inline constexpr std::string_view kEngineVersion = "scriptworld-engine/1";
inline constexpr int kGoalReward = 10;
inline constexpr int kWrongReward = -1;

enum class DistanceSpace { ScenarioGraph, CompactGraph };

inline std::string_view to_string(DistanceSpace d) {
    return d == DistanceSpace::ScenarioGraph ? "scenario-graph" : "compact-graph";
}

inline DistanceSpace distance_space_from_string(std::string_view s) {
    if (s == "scenario-graph") return DistanceSpace::ScenarioGraph;
    if (s == "compact-graph") return DistanceSpace::CompactGraph;
    throw ConfigError("unknown distance_space '" + std::string(s) + "'");
}

struct GameConfig {
    int num_choices = 2;
    int back_hop = 1;
    bool handicap = false;
    /// Falls back to the scenario's own distance when unset.
    std::optional<int> neg_distance;
    int consecutive_wrong_limit = 5;
    std::optional<std::uint64_t> max_steps = 10'000;
    std::uint64_t seed = 0;
    DistanceSpace distance_space = DistanceSpace::ScenarioGraph;

    friend bool operator==(const GameConfig&, const GameConfig&) = default;
};

inline void validate(const GameConfig& cfg) {
    if (cfg.num_choices < 2) throw ConfigError("num_choices must be >= 2, got " + std::to_string(cfg.num_choices));
    if (cfg.back_hop < 1) throw ConfigError("back_hop must be >= 1, got " + std::to_string(cfg.back_hop));
    if (cfg.consecutive_wrong_limit < 1)
        throw ConfigError("consecutive_wrong_limit must be >= 1, got " + std::to_string(cfg.consecutive_wrong_limit));
    if (cfg.neg_distance && *cfg.neg_distance < 1)
        throw ConfigError("neg_distance must be >= 1, got " + std::to_string(*cfg.neg_distance));
    if (cfg.max_steps && *cfg.max_steps == 0) throw ConfigError("max_steps must be positive");
}

inline json to_json(const GameConfig& cfg) {
    return {{"num_choices", cfg.num_choices},
            {"back_hop", cfg.back_hop},
            {"handicap", cfg.handicap},
            {"neg_distance", cfg.neg_distance ? json(*cfg.neg_distance) : json(nullptr)},
            {"consecutive_wrong_limit", cfg.consecutive_wrong_limit},
            {"max_steps", cfg.max_steps ? json(*cfg.max_steps) : json(nullptr)},
            {"seed", cfg.seed},
            {"distance_space", std::string(to_string(cfg.distance_space))}};
}

/// Unknown keys are rejected; missing keys keep their defaults.
inline GameConfig config_from_json(const json& j, GameConfig cfg = {}) {
    if (!j.is_object()) throw ConfigError("config must be an object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "num_choices") cfg.num_choices = value.get<int>();
            else if (key == "back_hop") cfg.back_hop = value.get<int>();
            else if (key == "handicap") cfg.handicap = value.get<bool>();
            else if (key == "neg_distance") cfg.neg_distance = value.is_null() ? std::nullopt : std::optional(value.get<int>());
            else if (key == "consecutive_wrong_limit") cfg.consecutive_wrong_limit = value.get<int>();
            else if (key == "max_steps")
                cfg.max_steps = value.is_null() ? std::nullopt : std::optional(value.get<std::uint64_t>());
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "distance_space") cfg.distance_space = distance_space_from_string(value.get<std::string>());
            else throw ConfigError("unknown config field '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    return cfg;
}

enum class EndReason { InProgress, GoalReached, TooManyWrong, StepCapExceeded };

inline std::string_view to_string(EndReason r) {
    switch (r) {
    case EndReason::InProgress: return "InProgress";
    case EndReason::GoalReached: return "GoalReached";
    case EndReason::TooManyWrong: return "TooManyWrong";
    case EndReason::StepCapExceeded: return "StepCapExceeded";
    }
    return "?";
}

inline EndReason end_reason_from_string(std::string_view s) {
    for (auto r : {EndReason::InProgress, EndReason::GoalReached, EndReason::TooManyWrong, EndReason::StepCapExceeded})
        if (to_string(r) == s) return r;
    throw ParseError("unknown end reason '" + std::string(s) + "'");
}

/// What an agent sees, plus fields the engine keeps for analysis. The hidden
/// fields are never written to the wire.
struct Observation {
    std::string quest;
    std::vector<std::string> choices;
    std::optional<std::string> hint;

    // hidden
    std::optional<std::size_t> correct_index;
    std::vector<NodeId> choice_nodes;
    std::optional<NodeId> node;

    friend bool operator==(const Observation&, const Observation&) = default;
};

/// Agent-visible view only.
inline json observation_to_wire(const Observation& obs) {
    return {{"quest", obs.quest},
            {"choices", obs.choices},
            {"hint", obs.hint ? json(*obs.hint) : json(nullptr)}};
}

inline Observation observation_from_wire(const json& j) {
    Observation obs;
    obs.quest = j.at("quest").get<std::string>();
    obs.choices = j.at("choices").get<std::vector<std::string>>();
    if (j.contains("hint") && !j.at("hint").is_null()) obs.hint = j.at("hint").get<std::string>();
    return obs;
}

struct StepResult {
    int reward = 0;
    bool done = false;
    EndReason reason = EndReason::InProgress;
    std::optional<Observation> next_observation;
};

struct StepRecord {
    std::uint64_t t = 0;
    std::string node;
    std::vector<std::string> choices;
    std::optional<std::string> hint;
    std::size_t action = 0;
    std::size_t correct = 0;
    int reward = 0;
    bool done = false;
    EndReason reason = EndReason::InProgress;
    std::string next;

    friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

inline json to_json(const StepRecord& r) {
    return {{"t", r.t},
            {"node", r.node},
            {"choices", r.choices},
            {"hint", r.hint ? json(*r.hint) : json(nullptr)},
            {"action", r.action},
            {"correct", r.correct},
            {"reward", r.reward},
            {"done", r.done},
            {"reason", std::string(to_string(r.reason))},
            {"next", r.next}};
}

inline StepRecord step_record_from_json(const json& j) {
    StepRecord r;
    try {
        r.t = j.at("t").get<std::uint64_t>();
        r.node = j.at("node").get<std::string>();
        r.choices = j.at("choices").get<std::vector<std::string>>();
        if (!j.at("hint").is_null()) r.hint = j.at("hint").get<std::string>();
        r.action = j.at("action").get<std::size_t>();
        r.correct = j.at("correct").get<std::size_t>();
        r.reward = j.at("reward").get<int>();
        r.done = j.at("done").get<bool>();
        r.reason = end_reason_from_string(j.at("reason").get<std::string>());
        r.next = j.value("next", std::string());
    } catch (const json::exception& e) {
        throw ParseError(std::string("step record: ") + e.what());
    }
    return r;
}

struct EpisodeLog {
    std::string engine_version{kEngineVersion};
    std::string scenario;
    std::uint64_t seed = 0;
    GameConfig config;
    std::vector<StepRecord> steps;

    int total_reward() const {
        int sum = 0;
        for (const auto& s : steps) sum += s.reward;
        return sum;
    }
};

inline json log_header(const EpisodeLog& log) {
    return {{"engine_version", log.engine_version},
            {"scenario", log.scenario},
            {"seed", log.seed},
            {"config", to_json(log.config)}};
}

/// Header line followed by one line per step.
inline std::string to_jsonl(const EpisodeLog& log) {
    std::string out = json{{"header", log_header(log)}}.dump() + "\n";
    for (const auto& r : log.steps) out += to_json(r).dump() + "\n";
    return out;
}

/// Assets shared by every game on one scenario; immutable once built.
struct GameAssets {
    Scenario scenario;
    CompactGraph compact;
    ScenarioGraph graph;
    std::optional<HintStore> hints;
};

inline std::shared_ptr<const GameAssets> make_assets(Scenario s, std::optional<HintStore> hints = std::nullopt) {
    auto a = std::make_shared<GameAssets>();
    a->compact = build_compact(s);
    a->graph = expand(a->compact, s);
    if (hints) check_hints(*hints, a->graph);
    a->scenario = std::move(s);
    a->hints = std::move(hints);
    return a;
}

struct GameState {
    NodeId current;
    int consecutive_wrong = 0;
    int cumulative_reward = 0;
    int wrong_total = 0;
    std::uint64_t step_index = 0;
    Rng rng;
    bool done = false;
    EndReason reason = EndReason::InProgress;
    Observation last_observation;
    /// Scenario-graph nodes occupied or passed through during this game.
    std::vector<bool> visited;
    EpisodeLog log;
};

inline const EpisodeLog& transcript(const GameState& state) { return state.log; }

/// Precomputed successor, predecessor and negative-candidate tables for one
/// (assets, config) pair. Cheap to copy; safe to share across threads.
class Environment {
public:
    Environment(std::shared_ptr<const GameAssets> assets, GameConfig cfg)
        : assets_(std::move(assets)), cfg_(std::move(cfg)) {
        validate(cfg_);
        if (!cfg_.neg_distance) cfg_.neg_distance = assets_->scenario.neg_distance;
        if (cfg_.handicap && !assets_->hints) throw ConfigError("handicap mode needs a hint store");
        build_tables();
    }

    const GameAssets& assets() const noexcept { return *assets_; }
    std::shared_ptr<const GameAssets> shared_assets() const noexcept { return assets_; }
    const GameConfig& config() const noexcept { return cfg_; }
    const ScenarioGraph& graph() const noexcept { return assets_->graph; }
    int neg_distance() const noexcept { return *cfg_.neg_distance; }

    /// Step nodes reachable from n through entry/exit nodes only.
    const std::vector<NodeId>& successors(NodeId n) const { return successors_.at(n.index()); }
    /// Hop distance used for negative sampling in the configured space.
    std::size_t distance(NodeId a, NodeId b) const { return distances_.at(a.index()).at(b.index()); }
    const std::vector<NodeId>& negative_candidates(NodeId n) const { return negatives_.at(n.index()); }

    std::pair<GameState, Observation> new_game() const { return new_game(cfg_.seed); }

    std::pair<GameState, Observation> new_game(std::uint64_t seed) const {
        GameState st;
        st.current = graph().start;
        st.rng = Rng(seed);
        st.visited.assign(graph().size(), false);
        st.visited[st.current.index()] = true;
        st.log.scenario = assets_->scenario.title;
        st.log.seed = seed;
        st.log.config = cfg_;
        st.log.config.seed = seed;
        Observation obs = sample_choices(st);
        return {std::move(st), std::move(obs)};
    }

    Observation sample_choices(GameState& st) const {
        if (st.done) throw Terminated("game is over");
        const ScenarioGraph& g = graph();
        const auto& succ = successors(st.current);
        if (succ.empty()) throw SamplingError("node '" + g.dag.name(st.current) + "' has no successor");

        const NodeId target = succ[st.rng.index(succ.size())];
        const auto& target_texts = g.texts(target);
        const std::string correct = target_texts[st.rng.index(target_texts.size())];

        std::vector<std::string> choices{correct};
        std::vector<NodeId> sources{target};
        std::set<std::string> used{text::normalize(correct)};
        const auto& blocked = successor_texts_.at(st.current.index());
        std::vector<NodeId> pool = negatives_.at(st.current.index());
        const auto need = static_cast<std::size_t>(cfg_.num_choices - 1);
        for (std::size_t i = 0; i < pool.size() && choices.size() <= need; ++i) {
            std::swap(pool[i], pool[i + st.rng.index(pool.size() - i)]);
            std::vector<const std::string*> usable;
            for (const auto& t : g.texts(pool[i])) {
                const std::string key = text::normalize(t);
                if (!blocked.count(key) && !used.count(key)) usable.push_back(&t);
            }
            if (usable.empty()) continue;
            const std::string& pick = *usable[st.rng.index(usable.size())];
            used.insert(text::normalize(pick));
            choices.push_back(pick);
            sources.push_back(pool[i]);
        }
        if (choices.size() <= need)
            throw SamplingError("not enough distinct negatives beyond distance " + std::to_string(neg_distance()) +
                                " at node '" + g.dag.name(st.current) + "'");

        std::vector<std::size_t> perm(choices.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        st.rng.shuffle(std::span<std::size_t>(perm));

        Observation obs;
        obs.quest = assets_->scenario.title;
        obs.node = st.current;
        for (std::size_t i = 0; i < perm.size(); ++i) {
            obs.choices.push_back(choices[perm[i]]);
            obs.choice_nodes.push_back(sources[perm[i]]);
            if (perm[i] == 0) obs.correct_index = i;
        }
        if (cfg_.handicap) {
            const auto* hints = assets_->hints->find(g.dag.name(st.current));
            if (!hints || hints->empty()) throw CoverageError("no hint for node '" + g.dag.name(st.current) + "'");
            obs.hint = (*hints)[st.rng.index(hints->size())];
        }
        st.last_observation = obs;
        return obs;
    }

    StepResult step(GameState& st, std::size_t action) const {
        if (st.done) throw Terminated("step on a finished game");
        const Observation& obs = st.last_observation;
        if (action >= obs.choices.size())
            throw OutOfRange("action " + std::to_string(action) + " outside [0, " +
                             std::to_string(obs.choices.size()) + ")");
        const ScenarioGraph& g = graph();

        StepRecord rec;
        rec.t = st.step_index;
        rec.node = g.dag.name(st.current);
        rec.choices = obs.choices;
        rec.hint = obs.hint;
        rec.action = action;
        rec.correct = *obs.correct_index;

        StepResult res;
        if (action == *obs.correct_index) {
            const NodeId to = obs.choice_nodes[action];
            mark_passage(st, st.current, to);
            st.current = to;
            st.consecutive_wrong = 0;
            if (successors(to).empty()) {
                mark_passage(st, to, g.end);
                res.reward = kGoalReward;
                res.done = true;
                res.reason = EndReason::GoalReached;
            }
        } else {
            res.reward = kWrongReward;
            ++st.wrong_total;
            if (++st.consecutive_wrong >= cfg_.consecutive_wrong_limit) {
                res.done = true;
                res.reason = EndReason::TooManyWrong;
            } else {
                for (int h = 0; h < cfg_.back_hop && st.current != g.start; ++h) {
                    const auto preds = g.dag.in(st.current);
                    st.current = preds[st.rng.index(preds.size())];
                    st.visited[st.current.index()] = true;
                }
            }
        }
        ++st.step_index;
        if (!res.done && cfg_.max_steps && st.step_index >= *cfg_.max_steps) {
            res.done = true;
            res.reason = EndReason::StepCapExceeded;
        }
        st.cumulative_reward += res.reward;
        st.done = res.done;
        st.reason = res.reason;
        if (!res.done) res.next_observation = sample_choices(st);

        rec.reward = res.reward;
        rec.done = res.done;
        rec.reason = res.reason;
        rec.next = g.dag.name(st.current);
        st.log.steps.push_back(std::move(rec));
        return res;
    }

private:
    void build_tables() {
        const ScenarioGraph& g = graph();
        const std::size_t n = g.size();

        successors_.assign(n, {});
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<bool> seen(n, false);
            std::vector<NodeId> stack{node_at(i)};
            while (!stack.empty()) {
                NodeId cur = stack.back();
                stack.pop_back();
                for (NodeId m : g.dag.out(cur)) {
                    if (seen[m.index()]) continue;
                    seen[m.index()] = true;
                    if (g.is_step(m)) successors_[i].push_back(m);
                    else if (m != g.end) stack.push_back(m);
                }
            }
            std::sort(successors_[i].begin(), successors_[i].end());
        }

        distances_.assign(n, {});
        if (cfg_.distance_space == DistanceSpace::ScenarioGraph) {
            for (std::size_t i = 0; i < n; ++i) distances_[i] = undirected_hops_from(g.dag, node_at(i));
        } else {
            const CompactGraph& cg = assets_->compact;
            std::vector<NodeId> compact_of(n);
            std::vector<NodeId> cluster_node(assets_->scenario.clusters.size());
            for (std::size_t c = 0; c < cg.dag.size(); ++c)
                if (auto ci = cg.cluster_of[c]) cluster_node[*ci] = node_at(c);
            for (std::size_t i = 0; i < n; ++i) {
                const auto& info = g.info[i];
                compact_of[i] = info.kind == NodeKind::Start ? cg.start
                              : info.kind == NodeKind::End   ? cg.end
                                                             : cluster_node[info.cluster];
            }
            std::vector<std::vector<std::size_t>> compact_dist(cg.dag.size());
            for (std::size_t c = 0; c < cg.dag.size(); ++c) compact_dist[c] = undirected_hops_from(cg.dag, node_at(c));
            for (std::size_t i = 0; i < n; ++i) {
                distances_[i].resize(n);
                for (std::size_t j = 0; j < n; ++j)
                    distances_[i][j] = compact_dist[compact_of[i].index()][compact_of[j].index()];
            }
        }

        const auto d = static_cast<std::size_t>(neg_distance());
        const auto need = static_cast<std::size_t>(cfg_.num_choices - 1);
        negatives_.assign(n, {});
        successor_texts_.assign(n, {});
        for (std::size_t i = 0; i < n; ++i) {
            for (NodeId s : successors_[i])
                for (const auto& t : g.texts(s)) successor_texts_[i].insert(text::normalize(t));
            if (successors_[i].empty()) continue;
            std::set<std::string> usable_texts;
            for (std::size_t j = 0; j < n; ++j) {
                const NodeId m = node_at(j);
                if (!g.is_step(m) || distances_[i][j] <= d || distances_[i][j] == kUnreachable) continue;
                if (std::binary_search(successors_[i].begin(), successors_[i].end(), m)) continue;
                bool any = false;
                for (const auto& t : g.texts(m)) {
                    const std::string key = text::normalize(t);
                    if (successor_texts_[i].count(key)) continue;
                    usable_texts.insert(key);
                    any = true;
                }
                if (any) negatives_[i].push_back(m);
            }
            // Each negative needs its own node and its own text.
            if (negatives_[i].size() < need || usable_texts.size() < need)
                throw SamplingError("node '" + g.dag.name(node_at(i)) + "' has " +
                                    std::to_string(negatives_[i].size()) + " candidate negative node(s) beyond " +
                                    std::to_string(d) + " hops; " + std::to_string(need) + " needed");
        }
    }

    /// Marks the pass-through nodes between from and its successor to.
    void mark_passage(GameState& st, NodeId from, NodeId to) const {
        const ScenarioGraph& g = graph();
        std::vector<NodeId> parent(g.size(), from);
        std::vector<bool> seen(g.size(), false);
        std::deque<NodeId> queue{from};
        seen[from.index()] = true;
        while (!queue.empty()) {
            NodeId cur = queue.front();
            queue.pop_front();
            if (cur == to) break;
            for (NodeId m : g.dag.out(cur)) {
                if (seen[m.index()]) continue;
                if (m != to && (g.is_step(m) || m == g.end)) continue;
                seen[m.index()] = true;
                parent[m.index()] = cur;
                queue.push_back(m);
            }
        }
        for (NodeId cur = to; cur != from; cur = parent[cur.index()]) st.visited[cur.index()] = true;
    }

    std::shared_ptr<const GameAssets> assets_;
    GameConfig cfg_;
    std::vector<std::vector<NodeId>> successors_;
    std::vector<std::vector<std::size_t>> distances_;
    std::vector<std::vector<NodeId>> negatives_;
    std::vector<std::set<std::string>> successor_texts_;
};

} // namespace scriptworld
